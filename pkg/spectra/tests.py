import math
from unittest import mock

import numpy as np
from django.test import SimpleTestCase, override_settings, tag
from scipy import linalg

from core.exception import ContractError, ConvergenceFailure, DimensionMismatch, DomainError
from ensemble.models import EnsembleSpec, RealMatrix
from ensemble.services import sample_factors
from spectra.models import ComplexSpectrum
from spectra.services import (
    build_linearization, eigenvalues, empirical_cdf, log_abs_det, partial_product, product,
    product_sv_inequality, radial_angular_split, resolvent_trace, shifted_singular_values,
    symmetrize_cdf, symmetrized_distance, symmetrized_spectrum,
)


def random_factors(n, m, seed, rho=0.0):
    return sample_factors(EnsembleSpec(n=n, m=m, rho=rho, master_seed=seed), trial_index=0)


class ProductTests(SimpleTestCase):

    def test_scaling_cancels(self):
        n = 3
        root_n = RealMatrix(math.sqrt(n) * np.eye(n))
        np.testing.assert_allclose(product([root_n, root_n]).entries, np.eye(n))

    def test_hand_multiplied_two_by_two(self):
        a = RealMatrix(np.array([[1.0, 2.0], [3.0, 4.0]]))
        b = RealMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
        # Each factor picks up 1/sqrt(2), so the product carries 1/2.
        expected = 0.5 * np.array([[2.0, 1.0], [4.0, 3.0]])
        np.testing.assert_allclose(product([a, b]).entries, expected)

    def test_single_factor_is_scaled(self):
        entries = np.arange(16, dtype=float).reshape(4, 4)
        np.testing.assert_allclose(product([RealMatrix(entries)]).entries, entries / 2.0)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            product([RealMatrix(np.eye(2)), RealMatrix(np.eye(3))])


class EigenvalueTests(SimpleTestCase):

    def test_identity(self):
        spectrum = eigenvalues(np.eye(2))
        np.testing.assert_allclose(spectrum.values, [1.0, 1.0])
        self.assertEqual(spectrum.n, 2)

    def test_nilpotent(self):
        spectrum = eigenvalues(np.array([[0.0, 1.0], [0.0, 0.0]]))
        np.testing.assert_allclose(spectrum.values, [0.0, 0.0], atol=1e-12)

    def test_cube_roots_of_unity(self):
        companion = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        spectrum = eigenvalues(companion)
        roots = np.exp(2j * math.pi * np.arange(3) / 3)
        for root in roots:
            self.assertLess(np.min(np.abs(spectrum.values - root)), 1e-8)

    def test_random_product_residuals_and_conjugate_pairs(self):
        W = product(random_factors(32, 2, seed=3))
        spectrum = eigenvalues(W)
        self.assertEqual(spectrum.values.size, 32)
        self.assertLess(spectrum.log_det_residual, 1e-6)
        scale = float(np.max(np.abs(spectrum.values)))
        self.assertLessEqual(spectrum.conjugate_pair_defect(), 1e-8 * scale)

    def test_determinant_mismatch_raises(self):
        W = product(random_factors(16, 2, seed=5))
        true_log_det = log_abs_det(W.entries)
        with mock.patch('spectra.services.log_abs_det', return_value=true_log_det + 1e-3):
            with self.assertRaises(ConvergenceFailure) as caught:
                eigenvalues(W)
        self.assertAlmostEqual(caught.exception.residuals['log_det'], 1e-3, delta=1e-6)

    def test_determinant_mismatch_inside_tolerance_passes(self):
        W = product(random_factors(16, 2, seed=5))
        true_log_det = log_abs_det(W.entries)
        with mock.patch('spectra.services.log_abs_det', return_value=true_log_det + 1e-8):
            self.assertLess(eigenvalues(W).log_det_residual, 1e-6)

    def test_singular_matrix_skips_determinant_identity(self):
        spectrum = eigenvalues(np.array([[1.0, 3.0], [0.0, 0.0]]))
        np.testing.assert_allclose(spectrum.values, [0.0, 1.0], atol=1e-15)

    def test_non_finite_entries_rejected(self):
        with self.assertRaises(ContractError):
            eigenvalues(np.array([[np.nan, 0.0], [0.0, 1.0]]))

    def test_non_square_rejected(self):
        with self.assertRaises(DimensionMismatch):
            eigenvalues(np.zeros((2, 3)))

    @override_settings(LAB_EIG_MAX_N=4)
    def test_dimension_cap(self):
        with self.assertRaises(ContractError):
            eigenvalues(np.eye(5))


class LinearizationTests(SimpleTestCase):

    def test_identity_factors_give_j(self):
        n = 4
        root_n = RealMatrix(math.sqrt(n) * np.eye(n))
        lin = build_linearization([root_n, root_n], 0)
        np.testing.assert_allclose(lin.matrix, lin.j_block)
        spectrum = symmetrized_spectrum(lin)
        np.testing.assert_allclose(spectrum.values, [-1.0] * n + [1.0] * n)

    def test_scalar_closed_form(self):
        a, b, z = 1.5, -0.7, 0.2 + 0.9j
        lin = build_linearization([RealMatrix([[a]]), RealMatrix([[b]])], z)
        np.testing.assert_allclose(lin.matrix, [[0, a * b - z], [a * b - np.conj(z), 0]])
        np.testing.assert_allclose(symmetrized_spectrum(lin).values, [-abs(a * b - z), abs(a * b - z)])

    def test_hermitian(self):
        lin = build_linearization(random_factors(10, 3, seed=1, rho=0.5), 1.1 - 0.4j)
        self.assertLessEqual(lin.hermitian_defect(), 1e-12)
        self.assertEqual(lin.dimension, 20)

    def test_off_diagonal_block_is_shifted_product(self):
        factors = random_factors(6, 2, seed=2, rho=-0.3)
        z = 0.3 + 0.1j
        lin = build_linearization(factors, z)
        W = product(factors).entries
        np.testing.assert_allclose(lin.matrix[:6, 6:], W - z * np.eye(6), atol=1e-12)

    def test_partial_product_empty_range_is_identity(self):
        factors = random_factors(5, 3, seed=4)
        np.testing.assert_array_equal(partial_product(factors, 3, 2), np.eye(10))

    def test_partial_product_composes(self):
        factors = random_factors(5, 3, seed=4)
        left = partial_product(factors, 1, 1)
        right = partial_product(factors, 2, 3)
        np.testing.assert_allclose(left @ right, partial_product(factors, 1, 3), atol=1e-12)

    def test_partial_product_bounds(self):
        with self.assertRaises(DomainError):
            partial_product(random_factors(4, 2, seed=0), 1, 3)


class SymmetrizedSpectrumTests(SimpleTestCase):

    def test_positive_half_matches_svd(self):
        factors = random_factors(8, 2, seed=5)
        z = 0.3 + 0.1j
        spectrum = symmetrized_spectrum(build_linearization(factors, z))
        W = product(factors).entries
        expected = linalg.svdvals(W - z * np.eye(8))
        np.testing.assert_allclose(spectrum.positive_half(), expected, atol=1e-8)

    def test_pairing_over_random_trials(self):
        rng = np.random.default_rng(12)
        for trial in range(100):
            n = int(rng.integers(2, 65))
            m = int(rng.integers(2, 4))
            radius, angle = 2 * math.sqrt(rng.random()), 2 * math.pi * rng.random()
            spec = EnsembleSpec(n=n, m=m, rho=float(rng.uniform(-1, 1)), master_seed=trial)
            spectrum = symmetrized_spectrum(build_linearization(sample_factors(spec, 0), radius * np.exp(1j * angle)))
            self.assertLessEqual(spectrum.pairing_defect(), 1e-8 * max(spectrum.spectral_radius, 1e-300))
            self.assertTrue(np.all(np.diff(spectrum.values) >= 0))

    def test_squares_match_gram_eigenvalues(self):
        factors = random_factors(16, 3, seed=6)
        z = -0.5 + 0.2j
        shifted = product(factors).entries - z * np.eye(16)
        gram = np.sort(linalg.eigvalsh(shifted.conj().T @ shifted))[::-1]
        squares = symmetrized_spectrum(build_linearization(factors, z)).squared_view()
        np.testing.assert_allclose(squares, gram, rtol=1e-6, atol=1e-12)


class ShiftedSingularValueTests(SimpleTestCase):

    def test_zero_matrix_unit_shift(self):
        np.testing.assert_allclose(shifted_singular_values(np.zeros((3, 3)), 1.0), [1.0, 1.0, 1.0])

    def test_diagonal(self):
        values = shifted_singular_values(np.diag([2.0, 0.0]), 0.0)
        np.testing.assert_allclose(values, [2.0, 0.0], atol=1e-12)

    def test_product_equals_determinant(self):
        W = np.random.default_rng(3).standard_normal((6, 6))
        z = 0.4 - 0.2j
        for method in ('hermitian', 'svd'):
            values = shifted_singular_values(W, z, method=method)
            self.assertTrue(np.all(np.diff(values) <= 0))
            determinant = abs(linalg.det(W - z * np.eye(6)))
            self.assertAlmostEqual(float(np.prod(values)) / determinant, 1.0, delta=1e-6)

    def test_unknown_method(self):
        with self.assertRaises(DomainError):
            shifted_singular_values(np.eye(2), 0.0, method='jacobi')


class EmpiricalDistributionTests(SimpleTestCase):

    def test_step_function(self):
        cdf = empirical_cdf([1.0, 2.0, 3.0])
        self.assertAlmostEqual(float(cdf(2.0)), 2.0 / 3.0)
        self.assertEqual(float(cdf(0.5)), 0.0)
        self.assertEqual(float(cdf(3.0)), 1.0)

    def test_sup_deviation_single_point(self):
        cdf = empirical_cdf([0.5])
        self.assertAlmostEqual(cdf.sup_distance(lambda x: np.clip(x, 0.0, 1.0)), 0.5)

    def test_empty_input(self):
        with self.assertRaises(DomainError):
            empirical_cdf([])

    def test_radial_angular_split(self):
        radii, angles = radial_angular_split(ComplexSpectrum(np.array([1j, -1j]), n=2))
        np.testing.assert_allclose(radii, [1.0, 1.0])
        np.testing.assert_allclose(angles, [math.pi / 2, 3 * math.pi / 2])

    def test_symmetrized_distance_is_half(self):
        grid = np.linspace(-2.0, 2.0, 401)
        uniform = lambda x: np.clip(x, 0.0, 1.0)
        square_root = lambda x: np.sqrt(np.clip(x, 0.0, 1.0))
        direct = float(np.max(np.abs(uniform(grid ** 2) - square_root(grid ** 2))))
        self.assertAlmostEqual(symmetrized_distance(uniform, square_root, grid), direct / 2)
        self.assertEqual(float(symmetrize_cdf(uniform)(0.0)), 0.5)


class ResolventTests(SimpleTestCase):

    def test_matches_dense_inverse(self):
        lin = build_linearization(random_factors(6, 2, seed=8), 0.2 + 0.3j)
        spectrum = symmetrized_spectrum(lin)
        alpha = 0.1 + 0.5j
        dense = np.trace(linalg.inv(lin.matrix - alpha * np.eye(12))) / 12
        self.assertAlmostEqual(abs(resolvent_trace(spectrum, alpha) - dense), 0.0, delta=1e-10)

    def test_imaginary_part_positive(self):
        spectrum = symmetrized_spectrum(build_linearization(random_factors(6, 2, seed=8), 0.0))
        self.assertGreater(resolvent_trace(spectrum, 0.3 + 0.01j).imag, 0.0)

    def test_real_alpha_rejected(self):
        spectrum = symmetrized_spectrum(build_linearization(random_factors(4, 2, seed=8), 0.0))
        with self.assertRaises(DomainError):
            resolvent_trace(spectrum, 0.5)


class SingularValueProductTests(SimpleTestCase):

    def test_determinant_identity(self):
        rng = np.random.default_rng(21)
        a, b = rng.standard_normal((8, 8)), rng.standard_normal((8, 8))
        _, equality_gap = product_sv_inequality(a, b)
        self.assertLess(equality_gap, 1e-6)

    @tag('slow')
    def test_tail_products_never_violated(self):
        rng = np.random.default_rng(22)
        worst = min(
            product_sv_inequality(rng.standard_normal((8, 8)), rng.standard_normal((8, 8)))[0]
            for _ in range(1000)
        )
        self.assertGreaterEqual(worst, -1e-9)
