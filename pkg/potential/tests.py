import csv
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, tag

from core.exception import CheckSkipped, DomainError
from ensemble.models import EnsembleSpec
from harness.executor import TrialExecutor
from limitlaw.models import LimitLaw
from limitlaw.services import density, limit_potential
from potential.models import PotentialGridSpec, PotentialValue, TailDiagnostics
from potential.serializer import PotentialGridSpecSerializer, TailDiagnosticsSerializer
from potential.services import (
    DENSITY_HEADER, POTENTIAL_HEADER, empirical_potential, export_density_csv, export_potential_csv,
    laplacian_density, log_integrability_tail, log_tail_split, mean_potential_grid,
    potential_grid_from_function, potentials_from_eigenvalues, quantile_floor_check, smallest_singular_value,
    smallest_sv_tail, sv_profile_check, tail_indicator,
)
from spectra.services import hermitize, log_abs_det, symmetrized_spectrum


def analytic_grid(m, bound, step):
    spec = PotentialGridSpec(x_min=-bound, x_max=bound, y_min=-bound, y_max=bound, step=step)
    return potential_grid_from_function(lambda z: limit_potential(LimitLaw(m), z), spec)


class EmpiricalPotentialTests(SimpleTestCase):

    def test_zero_matrix_unit_shift(self):
        self.assertEqual(empirical_potential(np.zeros((4, 4)), 1.0), PotentialValue(0.0))

    def test_eigenvalue_shift_is_flagged_infinite(self):
        result = empirical_potential(np.diag([2.0, 0.0]), 0.0)
        self.assertTrue(result.eigenvalue_hit)
        self.assertEqual(result.value, math.inf)

    def test_shift_inside_the_zero_floor_is_flagged(self):
        # floor = 8·eps·max(s_1, 1) is about 2.3e-15.
        matrix = np.diag([0.5, -0.25, 0.75, 0.1, -0.6, 0.3, 0.9, -0.8])
        result = empirical_potential(matrix, 0.5 + 1e-15, method='svd')
        self.assertTrue(result.eigenvalue_hit)
        self.assertEqual(result.value, math.inf)
        self.assertFalse(empirical_potential(matrix, 0.5 + 1e-6, method='svd').eigenvalue_hit)

    def test_matches_lu_determinant(self):
        rng = np.random.default_rng(11)
        for n in (4, 16, 64):
            matrix = rng.standard_normal((n, n)) / math.sqrt(n)
            z = 0.3 + 0.2j
            expected = -log_abs_det(matrix - z * np.eye(n)) / n
            for method in ('hermitian', 'svd'):
                result = empirical_potential(matrix, z, method=method)
                self.assertFalse(result.eigenvalue_hit)
                self.assertAlmostEqual(float(result), expected, delta=1e-6 * max(1.0, abs(expected)))


class EigenvaluePotentialTests(SimpleTestCase):

    def setUp(self):
        self.spectrum = np.linspace(-1.0, 1.0, 16) + 0.1j

    def test_point_next_to_an_eigenvalue_is_masked(self):
        points = np.array([self.spectrum[5] + 1e-15, 2.0 + 0.5j])
        values = potentials_from_eigenvalues(self.spectrum, points)
        self.assertEqual(values[0], math.inf)
        expected = -float(np.mean(np.log(np.abs(points[1] - self.spectrum))))
        self.assertAlmostEqual(values[1], expected)

    def test_exact_eigenvalue_is_masked(self):
        values = potentials_from_eigenvalues(self.spectrum, self.spectrum[:3].reshape(1, 3))
        self.assertEqual(values.shape, (1, 3))
        self.assertTrue(np.all(np.isposinf(values)))


class MeanPotentialGridTests(SimpleTestCase):

    def setUp(self):
        self.spec = EnsembleSpec(n=32, m=2, rho=0.3, master_seed=7)
        self.grid_spec = PotentialGridSpec(x_min=-1.0, x_max=1.0, y_min=-1.0, y_max=1.0, step=0.5)

    def test_single_trial_is_deterministic(self):
        first = mean_potential_grid(self.spec, self.grid_spec, 1)
        second = mean_potential_grid(self.spec, self.grid_spec, 1)
        np.testing.assert_array_equal(first.values, second.values)

    def test_worker_count_does_not_change_grid(self):
        serial = mean_potential_grid(self.spec, self.grid_spec, 4, executor=TrialExecutor(threads=1))
        pooled = mean_potential_grid(self.spec, self.grid_spec, 4, executor=TrialExecutor(threads=3))
        np.testing.assert_array_equal(serial.values, pooled.values)
        np.testing.assert_array_equal(serial.variance, pooled.variance)

    def test_eigen_and_svd_routes_agree(self):
        eigen = mean_potential_grid(self.spec, self.grid_spec, 2, method='eigen')
        svd = mean_potential_grid(self.spec, self.grid_spec, 2, method='svd')
        np.testing.assert_allclose(eigen.values, svd.values, atol=1e-8)

    def test_no_masked_points_on_random_products(self):
        grid = mean_potential_grid(self.spec, self.grid_spec, 3)
        self.assertEqual(grid.masked_fraction(), 0.0)
        self.assertEqual(grid.shape, (5, 5))
        self.assertTrue(np.all(grid.variance >= 0))

    def test_matches_limit_potential(self):
        spec = EnsembleSpec(n=256, m=2, rho=0.5, master_seed=2024)
        grid_spec = PotentialGridSpec(x_min=0.0, x_max=2.0, y_min=0.0, y_max=1.0, step=1.0)
        grid = mean_potential_grid(spec, grid_spec, 10)
        self.assertAlmostEqual(grid.values[0, 0], 1.0, delta=0.05)
        self.assertAlmostEqual(grid.values[0, 2], -math.log(2.0), delta=0.05)

    def test_needs_a_trial(self):
        with self.assertRaises(DomainError):
            mean_potential_grid(self.spec, self.grid_spec, 0)

    def test_unknown_method(self):
        with self.assertRaises(DomainError):
            mean_potential_grid(self.spec, self.grid_spec, 1, method='qr')


class LaplacianDensityTests(SimpleTestCase):

    def test_uniform_disc(self):
        field = laplacian_density(analytic_grid(1, 1.0, 0.01))
        inside = np.abs(field.points()) <= 0.9
        np.testing.assert_allclose(field.density[inside], 1 / math.pi, rtol=0.01)

    def test_square_law(self):
        field = laplacian_density(analytic_grid(2, 1.0, 0.01))
        points = field.points()
        annulus = (np.abs(points) >= 0.2) & (np.abs(points) <= 0.9)
        expected = density(LimitLaw(2), points.real, points.imag)
        np.testing.assert_allclose(field.density[annulus], expected[annulus], rtol=0.01)

    def test_harmonic_outside_support(self):
        field = laplacian_density(analytic_grid(2, 2.0, 0.01))
        outside = np.abs(field.points()) >= 1.2
        self.assertLessEqual(np.max(np.abs(field.density[outside])), 1e-3)

    def test_grid_too_small(self):
        spec = PotentialGridSpec(x_min=0.0, x_max=1.0, y_min=0.0, y_max=1.0, step=1.0)
        with self.assertRaises(DomainError):
            laplacian_density(potential_grid_from_function(np.abs, spec))

    @tag('slow')
    def test_monte_carlo_annulus_mass(self):
        spec = EnsembleSpec(n=256, m=2, rho=0.5, master_seed=31)
        grid_spec = PotentialGridSpec(x_min=-1.2, x_max=1.2, y_min=-1.2, y_max=1.2, step=0.05)
        grid = mean_potential_grid(spec, grid_spec, 40)
        self.assertLessEqual(grid.masked_fraction(), 1e-3)
        field = laplacian_density(grid)
        radii = np.abs(field.points())
        mass = field.mass((radii >= 0.4) & (radii <= 0.85))
        self.assertAlmostEqual(mass / 0.45, 1.0, delta=0.15)

    def test_csv_exports(self):
        grid = analytic_grid(2, 1.0, 0.5)
        with tempfile.TemporaryDirectory() as tmp:
            potential_path = export_potential_csv(Path(tmp) / 'potential.csv', grid)
            density_path = export_density_csv(Path(tmp) / 'density.csv', laplacian_density(grid))
            with open(potential_path, newline='') as handle:
                potential_rows = list(csv.reader(handle))
            with open(density_path, newline='') as handle:
                density_rows = list(csv.reader(handle))
        self.assertEqual(potential_rows[0], POTENTIAL_HEADER)
        self.assertEqual(len(potential_rows), 1 + 25)
        self.assertEqual(density_rows[0], DENSITY_HEADER)
        self.assertEqual(len(density_rows), 1 + 9)


class SmallestSingularValueTests(SimpleTestCase):

    def test_identity_is_above_threshold(self):
        self.assertAlmostEqual(smallest_singular_value(np.eye(8)), 1.0)
        self.assertFalse(tail_indicator(np.eye(8), 2.0))

    def test_duplicate_rows_trigger_indicator(self):
        matrix = np.random.default_rng(5).standard_normal((6, 6))
        matrix[1] = matrix[0]
        self.assertTrue(tail_indicator(matrix, 2.0))

    def test_report_structure(self):
        spec = EnsembleSpec(n=8, m=2, master_seed=3)
        report = smallest_sv_tail(spec, TailDiagnostics(), 20, n_ladder=(8, 16))
        self.assertEqual([level.n for level in report.levels], [8, 16])
        for level in report.levels:
            self.assertEqual(level.trials, 20)
            self.assertEqual(level.resampled, 0)
            low, high = level.interval
            self.assertTrue(0.0 <= low <= level.frequency <= high <= 1.0)
            self.assertGreater(level.median_smallest, 0.0)

    def test_three_factor_prefix(self):
        spec = EnsembleSpec(n=8, m=3, rho=0.2, master_seed=9)
        report = smallest_sv_tail(spec, TailDiagnostics(), 5, n_ladder=(8,))
        self.assertEqual(report.levels[0].trials, 5)

    def test_worker_count_does_not_change_report(self):
        spec = EnsembleSpec(n=8, m=2, master_seed=4)
        serial = smallest_sv_tail(spec, TailDiagnostics(), 10, n_ladder=(8, 16), executor=TrialExecutor(threads=1))
        pooled = smallest_sv_tail(spec, TailDiagnostics(), 10, n_ladder=(8, 16), executor=TrialExecutor(threads=4))
        self.assertEqual(serial.as_dict(), pooled.as_dict())

    @tag('slow')
    def test_tail_frequency_does_not_grow(self):
        spec = EnsembleSpec(n=64, m=2, master_seed=17)
        report = smallest_sv_tail(spec, TailDiagnostics(B=2.0), 500)
        self.assertTrue(report.non_increasing)


class SingularValueProfileTests(SimpleTestCase):

    def test_identity(self):
        check = sv_profile_check(np.eye(10), 0.7)
        self.assertEqual(check.j_max, 4)
        self.assertEqual(check.argmin, 1)
        self.assertAlmostEqual(check.c, 10 / 9)

    def test_rank_one(self):
        check = sv_profile_check(np.ones((16, 16)), 0.9)
        self.assertEqual(check.j_max, 3)
        self.assertAlmostEqual(check.c, 0.0, delta=1e-12)
        self.assertIn(check.argmin, (2, 3))

    def test_empty_range(self):
        check = sv_profile_check(np.eye(2), 0.9)
        self.assertTrue(check.vacuous)
        self.assertEqual(check.c, math.inf)

    def test_gamma_range(self):
        with self.assertRaises(DomainError):
            sv_profile_check(np.eye(4), 0.5)
        with self.assertRaises(DomainError):
            TailDiagnostics(gamma=1.0)


class QuantileFloorTests(SimpleTestCase):

    def test_values_above_floor(self):
        self.assertTrue(quantile_floor_check(np.linspace(1.0, 2.0, 10), 0.5, 2))

    def test_symmetrized_spectrum_input(self):
        spectrum = symmetrized_spectrum(hermitize(np.eye(10), 0.0))
        self.assertTrue(quantile_floor_check(spectrum, 0.5, 2))

    def test_lower_tail_below_floor(self):
        values = np.array([1.0] * 5 + [0.01] * 5)
        self.assertFalse(quantile_floor_check(values, 0.05, 2))

    def test_index_out_of_range_is_skipped(self):
        with self.assertRaises(CheckSkipped):
            quantile_floor_check(np.ones(10), 0.5, 2, C=10.0)


class LogIntegrabilityTests(SimpleTestCase):

    def test_unit_singular_values(self):
        self.assertEqual(log_integrability_tail(np.ones(5), 1.0), (0.0, False))

    def test_single_value(self):
        value, exceeds = log_integrability_tail(np.array([math.e]), 1.0)
        self.assertAlmostEqual(value, 2.0)
        self.assertTrue(exceeds)

    def test_zero_singular_value(self):
        self.assertEqual(log_integrability_tail(np.array([1.0, 0.0]), 10.0), (math.inf, True))

    def test_threshold_must_be_positive(self):
        with self.assertRaises(DomainError):
            log_integrability_tail(np.ones(3), 0.0)

    def test_split_adds_up(self):
        values = np.array([10.0, 1.0, 0.1])
        low, middle, high = log_tail_split(values, 0.05)
        self.assertAlmostEqual(low, math.log(100) / 3)
        self.assertEqual(middle, 0.0)
        self.assertAlmostEqual(high, math.log(100) / 3)
        self.assertAlmostEqual(low + middle + high, log_integrability_tail(values, 1.0)[0])


class SerializerTests(SimpleTestCase):

    def test_grid_defaults(self):
        serializer = PotentialGridSpecSerializer(data={})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(serializer.save().step, 0.05)

    def test_grid_rejects_unknown_key(self):
        serializer = PotentialGridSpecSerializer(data={'stride': 0.1})
        self.assertFalse(serializer.is_valid())
        self.assertIn('stride', serializer.errors)

    def test_diagnostics_gamma(self):
        serializer = TailDiagnosticsSerializer(data={'gamma': 0.5})
        self.assertFalse(serializer.is_valid())
        self.assertIn('gamma', serializer.errors)
