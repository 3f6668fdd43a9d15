import csv
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, tag

from core.exception import ConvergenceFailure, DomainError
from ensemble.models import EnsembleSpec
from ensemble.services import sample_factors
from limitlaw.services import fuss_catalan_moment, support_edge
from spectra.services import build_linearization, symmetrized_spectrum
from stieltjes.models import StieltjesQuery, SystemForm
from stieltjes.serializer import DensitySweepSerializer, StieltjesQuerySerializer
from stieltjes.services import (
    PROFILE_HEADER, compare_with_empirical, continuation_ladder, density_from_inversion,
    export_profile_csv, extrapolated_moment, form_discrimination, get_form_strategy, integrated_cdf,
    polynomial_roots, profile_distance, solve_system,
)

STATEMENT = SystemForm.STATEMENT
THEOREM = SystemForm.THEOREM


class ContinuationLadderTests(SimpleTestCase):

    def test_geometric_rungs_end_at_target(self):
        ladder = continuation_ladder(0.01)
        self.assertEqual(ladder[0], 10.0)
        self.assertEqual(ladder[-1], 0.01)
        self.assertAlmostEqual(ladder[2] / ladder[1], 0.85)
        self.assertTrue(all(a > b for a, b in zip(ladder, ladder[1:])))

    def test_target_above_start(self):
        self.assertEqual(continuation_ladder(12.0), [12.0])


class PolynomialRootsTests(SimpleTestCase):

    def test_rows_are_solved_independently(self):
        roots = polynomial_roots([[2.0, -3.0, 1.0], [-1.0, 0.0, 1.0]])
        np.testing.assert_allclose(np.sort_complex(roots[0]), [1.0, 2.0], atol=1e-12)
        np.testing.assert_allclose(np.sort_complex(roots[1]), [-1.0, 1.0], atol=1e-12)

    def test_negligible_leading_column_is_dropped(self):
        roots = polynomial_roots([[2.0, -3.0, 1.0, 1e-20]])
        self.assertEqual(roots.shape, (1, 2))
        np.testing.assert_allclose(np.sort_complex(roots[0]), [1.0, 2.0], atol=1e-12)

    def test_row_without_leading_term_gets_nan(self):
        roots = polynomial_roots([[2.0, -3.0, 1.0], [1.0, 1.0, 0.0]])
        self.assertTrue(np.all(np.isnan(roots[1])))


class FormStrategyTests(SimpleTestCase):

    def test_fraction_solves_the_quadratic(self):
        u = np.array([0.3 + 0.2j, -1.1 + 0.7j, 2.0j])
        for form in (STATEMENT, THEOREM):
            strategy = get_form_strategy(form)
            for z2 in (0.0, 0.25, 0.5):
                numerator, denominator = strategy.s_fraction(z2)
                s = np.polynomial.polynomial.polyval(u, numerator) / np.polynomial.polynomial.polyval(u, denominator)
                t = z2 * u
                np.testing.assert_allclose(sum(strategy.quadratic_terms(s, t, z2)), 0.0, atol=1e-14)
                np.testing.assert_allclose(strategy.u_of(s, t), u, rtol=1e-13)


class SolveSystemTests(SimpleTestCase):

    def test_large_v_asymptotics(self):
        solution = solve_system(StieltjesQuery(alpha=10j, z=0, m=2))
        self.assertLess(abs(solution.s - 0.1j), 5e-2)
        self.assertTrue(solution.branch_ok)
        self.assertLessEqual(solution.residual, 1e-12)

    def test_forms_share_the_quadratic_root_at_origin(self):
        for form in (STATEMENT, THEOREM):
            solution = solve_system(StieltjesQuery(alpha=0.4 + 2j, z=0, m=2, form=form))
            self.assertAlmostEqual(abs(solution.w - (0.4 + 2j)), 0.0, delta=1e-14)

    def test_only_statement_form_reduces_to_fuss_catalan_at_origin(self):
        alpha = 0.4 + 1j
        statement = solve_system(StieltjesQuery(alpha=alpha, z=0, m=2, form=STATEMENT)).s
        theorem = solve_system(StieltjesQuery(alpha=alpha, z=0, m=2, form=THEOREM)).s
        # m = 2: 1 + αs - αs³ = 0 against 1 + αs - α²s³ = 0.
        self.assertAlmostEqual(abs(1 + alpha * statement - alpha * statement ** 3), 0.0, delta=1e-10)
        self.assertAlmostEqual(abs(1 + alpha * theorem - alpha ** 2 * theorem ** 3), 0.0, delta=1e-10)
        self.assertGreater(abs(1 + alpha * theorem - alpha * theorem ** 3), 1e-3)

    def test_nevanlinna_and_branch(self):
        for m in (2, 3):
            for z in (0.0, 0.5, 0.3 + 0.4j):
                for alpha in (0.5 + 0.1j, -1.2 + 0.05j, 2.0 + 0.3j):
                    solution = solve_system(StieltjesQuery(alpha=alpha, z=z, m=m))
                    self.assertGreater(solution.s.imag, 0.0)
                    self.assertLessEqual(abs(solution.s), 1.0 / alpha.imag)
                    self.assertLessEqual(max(solution.residuals), 1e-12)
                    if z != 0:
                        self.assertGreater((solution.w - alpha).imag, 0.0)

    def test_mirror_symmetry(self):
        for alpha in (0.7 + 0.05j, 1.9 + 0.2j):
            right = solve_system(StieltjesQuery(alpha=alpha, z=0.4 - 0.2j, m=2))
            left = solve_system(StieltjesQuery(alpha=-alpha.conjugate(), z=0.4 - 0.2j, m=2))
            self.assertAlmostEqual(abs(left.s + right.s.conjugate()), 0.0, delta=1e-8)

    def test_converges_near_the_origin_off_axis(self):
        alpha = 0.05 + 0.01j
        solution = solve_system(StieltjesQuery(alpha=alpha, z=0.5 + 0.2j, m=2))
        self.assertLessEqual(solution.residual, 1e-12)
        self.assertGreater(solution.s.imag, 0.0)
        self.assertGreater((solution.w - alpha).imag, 0.0)

    def test_imaginary_axis_limit(self):
        # At α -> 0 the quadratic in t has a double root for |z| = 1/2, m = 2
        # (s = i, t = i/2); for m = 3 and |z|² = 1/2, s = u/(1 - y) with
        # y = |z|²u² = 1/(1 - 2^(1/3)).
        cases = ((2, 0.5, 1j), (3, 0.5 + 0.5j, 0.572259j))
        for m, z, expected in cases:
            solution = solve_system(StieltjesQuery(alpha=1e-5j, z=z, m=m))
            self.assertAlmostEqual(abs(solution.s - expected), 0.0, delta=1e-3)
            self.assertGreater((solution.w - 1e-5j).imag, 0.0)

    def test_iteration_cap_raises_with_residuals(self):
        query = StieltjesQuery(alpha=0.3 + 0.01j, z=0, m=2)
        with self.assertRaises(ConvergenceFailure) as ctx:
            solve_system(query, init=5 + 5j, max_iter=1, continuation=False)
        self.assertIn('first', ctx.exception.residuals)

    def test_invalid_inputs(self):
        with self.assertRaises(DomainError):
            StieltjesQuery(alpha=0.5, z=0, m=2)
        with self.assertRaises(DomainError):
            StieltjesQuery(alpha=1j, z=0, m=2, form='other')
        with self.assertRaises(DomainError):
            solve_system(StieltjesQuery(alpha=1j, z=0, m=2), tol=0.0)


class DensityInversionTests(SimpleTestCase):

    def test_density_is_even(self):
        grid = np.linspace(-3.0, 3.0, 121)
        profile = density_from_inversion(0, 2, STATEMENT, grid, 0.01)
        self.assertEqual(profile.failures, [])
        np.testing.assert_allclose(profile.density, profile.density[::-1], atol=1e-6)

    def test_total_mass(self):
        grid = np.linspace(-3.0, 3.0, 1201)
        profile = density_from_inversion(0, 2, STATEMENT, grid, 0.01)
        self.assertTrue(0.97 <= profile.total_mass() <= 1.03)
        self.assertTrue(np.all(profile.density >= 0))

    def test_full_grid_away_from_origin(self):
        grid = np.linspace(-4.0, 4.0, 801)
        for m in (2, 3):
            for z in (0.5, 0.5 + 0.5j):
                profile = density_from_inversion(z, m, STATEMENT, grid, 0.01)
                self.assertEqual(profile.failures, [], f"m={m}, z={z}")
                self.assertLessEqual(float(np.max(profile.residuals)), 1e-12)
                self.assertAlmostEqual(profile.total_mass(), 1.0, delta=0.03)
                centre = profile.density[400]
                self.assertGreater(centre, 0.1)

    def test_density_vanishes_beyond_support_edge(self):
        edge = support_edge(2)
        self.assertGreater(3.5, edge)
        profile = density_from_inversion(0, 2, STATEMENT, [-3.5, 3.5], 0.005)
        self.assertTrue(np.all(profile.density < 1e-2))

    @tag('slow')
    def test_even_moments_match_fuss_catalan(self):
        grid = np.linspace(-2.7, 2.7, 2161)
        for p in (1, 2, 3):
            moment = extrapolated_moment(0, 2, STATEMENT, grid, 0.005, 2 * p)
            expected = float(fuss_catalan_moment(2, p))
            self.assertAlmostEqual(moment / expected, 1.0, delta=0.02)

    def test_eps_must_be_positive(self):
        with self.assertRaises(DomainError):
            density_from_inversion(0, 2, STATEMENT, [0.0], 0.0)

    def test_csv_export(self):
        profile = density_from_inversion(0.3, 2, STATEMENT, np.linspace(-1, 1, 5), 0.05)
        with tempfile.TemporaryDirectory() as tmp:
            path = export_profile_csv(Path(tmp) / 'profile.csv', profile)
            with open(path, newline='') as handle:
                rows = list(csv.reader(handle))
        self.assertEqual(rows[0], PROFILE_HEADER)
        self.assertEqual(len(rows), 6)


class EmpiricalComparisonTests(SimpleTestCase):

    def setUp(self):
        self.profile = density_from_inversion(0, 2, STATEMENT, np.linspace(-3.0, 3.0, 1201), 0.01)

    def test_inverse_transform_sample(self):
        size = 10_000
        cdf = integrated_cdf(self.profile)
        sample = np.interp(np.random.default_rng(4).random(size), cdf, self.profile.x)
        self.assertLessEqual(compare_with_empirical(self.profile, sample), 1.63 / math.sqrt(size))

    def test_identical_profiles(self):
        self.assertEqual(profile_distance(self.profile, self.profile), 0.0)

    def test_forms_differ_at_origin(self):
        theorem = density_from_inversion(0, 2, THEOREM, np.linspace(-3.0, 3.0, 1201), 0.01)
        self.assertGreater(profile_distance(self.profile, theorem), 0.1)

    def test_empty_spectrum(self):
        with self.assertRaises(DomainError):
            compare_with_empirical(self.profile, np.array([]))


class FormDiscriminationTests(SimpleTestCase):

    def test_flags_insufficient_resolution(self):
        far_away = [np.full(16, 10.0)]
        report = form_discrimination(0.5, 2, far_away, np.linspace(-3.0, 3.0, 121), 0.05)
        self.assertTrue(report.insufficient_resolution)
        self.assertEqual(set(report.distances), {STATEMENT, THEOREM})

    def test_empty_spectra(self):
        with self.assertRaises(DomainError):
            form_discrimination(0.5, 2, [], [0.0], 0.05)

    @tag('slow')
    def test_statement_form_matches_simulation(self):
        z = 0.5 + 0.2j
        spec = EnsembleSpec(n=256, m=2, rho=0.5, master_seed=2024)
        spectra = [
            symmetrized_spectrum(build_linearization(sample_factors(spec, trial), z))
            for trial in range(4)
        ]
        report = form_discrimination(z, 2, spectra, np.linspace(-4.0, 4.0, 801), 0.01)
        self.assertEqual(report.winner, STATEMENT)
        self.assertLessEqual(report.distances[STATEMENT], 0.08)
        self.assertFalse(report.insufficient_resolution)


class SerializerTests(SimpleTestCase):

    def test_query_round_trip(self):
        serializer = StieltjesQuerySerializer(data={'alpha': [0.5, 0.1], 'z': [0.3, -0.2], 'm': 3})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        query = serializer.save()
        self.assertEqual(query.alpha, 0.5 + 0.1j)
        self.assertEqual(query.form, STATEMENT)

    def test_query_needs_upper_half_plane(self):
        serializer = StieltjesQuerySerializer(data={'alpha': [0.5, 0.0], 'z': [0, 0]})
        self.assertFalse(serializer.is_valid())
        self.assertIn('alpha', serializer.errors)

    def test_sweep_grid(self):
        serializer = DensitySweepSerializer(data={'z': [0.5, 0], 'x_min': -1, 'x_max': 1, 'points': 5})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        np.testing.assert_allclose(serializer.grid(), [-1.0, -0.5, 0.0, 0.5, 1.0])

    def test_sweep_rejects_reversed_interval(self):
        serializer = DensitySweepSerializer(data={'z': [0, 0], 'x_min': 1, 'x_max': -1})
        self.assertFalse(serializer.is_valid())
