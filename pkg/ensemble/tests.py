import math

import numpy as np
from django.test import SimpleTestCase, tag

from core.exception import ContractError, DimensionMismatch, DomainError
from ensemble.models import EnsembleSpec, EntryDist, EntryDistKind, RealMatrix, Truncation
from ensemble.serializer import EnsembleSpecSerializer
from ensemble.services import (
    expected_lindeberg_ratio, interpolate, lindeberg_ratio, sample_correlated_pair, sample_correlated_pairs,
    sample_elliptic_matrix, sample_factors, sample_gaussian_companion, trial_rng,
    truncate_and_center, ui_ratio,
)

GAUSSIAN = EntryDist(EntryDistKind.GAUSSIAN)
RADEMACHER = EntryDist(EntryDistKind.RADEMACHER)
HEAVY_TAIL = EntryDist(EntryDistKind.HEAVY_TAIL, 2.5)


def default_tau(n):
    return Truncation().tau_n(n)


def pooled_pair_correlation(matrices):
    xs, ys = [], []
    for matrix in matrices:
        rows, cols = np.triu_indices(matrix.rows, 1)
        xs.append(matrix.entries[rows, cols])
        ys.append(matrix.entries[cols, rows])
    x, y = np.concatenate(xs), np.concatenate(ys)
    return float(np.mean(x * y))


class CorrelatedPairTests(SimpleTestCase):
    N = 100_000

    def test_full_correlation_gives_identical_gaussian_pair(self):
        x, y = sample_correlated_pair(1.0, GAUSSIAN, trial_rng(7, 0, 1))
        self.assertEqual(x, y)

    def test_rademacher_uncorrelated(self):
        x, y = sample_correlated_pairs(0.0, RADEMACHER, trial_rng(1, 0, 1), self.N)
        self.assertTrue(set(np.unique(x)) <= {-1.0, 1.0})
        self.assertAlmostEqual(float(np.corrcoef(x, y)[0, 1]), 0.0, delta=0.02)

    def test_gaussian_correlation_and_variances(self):
        x, y = sample_correlated_pairs(0.5, GAUSSIAN, trial_rng(2, 0, 1), self.N)
        self.assertAlmostEqual(float(np.corrcoef(x, y)[0, 1]), 0.5, delta=0.02)
        self.assertAlmostEqual(float(np.var(x)), 1.0, delta=0.02)
        self.assertAlmostEqual(float(np.var(y)), 1.0, delta=0.02)

    def test_marginals_centered_for_every_law(self):
        tolerance = 4 / math.sqrt(self.N)
        for dist in (GAUSSIAN, RADEMACHER, EntryDist(EntryDistKind.HEAVY_TAIL, 6.0)):
            x, y = sample_correlated_pairs(-0.4, dist, trial_rng(3, 0, 1), self.N)
            self.assertAlmostEqual(float(np.mean(x)), 0.0, delta=tolerance)
            self.assertAlmostEqual(float(np.mean(y)), 0.0, delta=tolerance)
            self.assertAlmostEqual(float(np.mean(x * y)), -0.4, delta=0.05)

    def test_heavy_tail_second_moment(self):
        x, _ = sample_correlated_pairs(0.0, EntryDist(EntryDistKind.HEAVY_TAIL, 6.0), trial_rng(4, 0, 1), self.N)
        self.assertAlmostEqual(float(np.mean(x ** 2)), 1.0, delta=0.05)

    def test_rho_outside_unit_interval_is_rejected(self):
        with self.assertRaises(DomainError):
            sample_correlated_pair(1.5, GAUSSIAN, trial_rng(0, 0, 1))


class EllipticMatrixTests(SimpleTestCase):

    def test_fully_correlated_matrix_is_symmetric(self):
        spec = EnsembleSpec(n=2, m=2, rho=1.0)
        matrix = sample_elliptic_matrix(spec, 1, trial_rng(0, 0, 1))
        self.assertEqual(matrix.entries[0, 1], matrix.entries[1, 0])
        self.assertTrue(matrix.is_raw)

    def test_pooled_pair_correlation(self):
        spec = EnsembleSpec(n=64, m=2, rho=0.3, master_seed=11)
        matrices = [sample_elliptic_matrix(spec, 1, trial_rng(11, t, 1)) for t in range(50)]
        self.assertAlmostEqual(pooled_pair_correlation(matrices), 0.3, delta=0.03)

    def test_same_seed_gives_identical_matrix(self):
        spec = EnsembleSpec(n=16, m=3, rho=-0.2, entry_dist=RADEMACHER, master_seed=99)
        first = sample_factors(spec, trial_index=4)
        second = sample_factors(spec, trial_index=4)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.entries, b.entries)

    def test_streams_differ_across_factors_and_companion(self):
        spec = EnsembleSpec(n=8, m=2, master_seed=5)
        x1, x2 = sample_factors(spec, 0)
        y1, _ = sample_gaussian_companion(spec, 0)
        self.assertFalse(np.array_equal(x1.entries, x2.entries))
        self.assertFalse(np.array_equal(x1.entries, y1.entries))

    def test_factor_index_out_of_range(self):
        spec = EnsembleSpec(n=4, m=2)
        with self.assertRaises(DomainError):
            sample_elliptic_matrix(spec, 3, trial_rng(0, 0, 3))


class TruncationTests(SimpleTestCase):

    def test_bounded_symmetric_entries_only_shift_by_mean(self):
        entries = np.array([[0.5, -0.5], [-0.5, 0.5]])
        result = truncate_and_center(RealMatrix(entries), c=1.0, tau_n=1.0)
        np.testing.assert_allclose(result.entries, entries, atol=np.finfo(float).eps)

    def test_single_large_entry_removed_then_centered(self):
        threshold = 1.0 * 0.5 * math.sqrt(2)
        entries = np.array([[10 * threshold, 0.0], [0.0, 0.0]])
        result = truncate_and_center(RealMatrix(entries), c=1.0, tau_n=0.5)
        np.testing.assert_array_equal(result.entries, np.zeros((2, 2)))

    def test_mixed_entries_hand_computation(self):
        entries = np.array([[5.0, 1.0], [0.0, -0.2]])
        result = truncate_and_center(RealMatrix(entries), c=1.0, tau_n=1.0 / math.sqrt(2))
        kept = np.array([[0.0, 1.0], [0.0, -0.2]])
        np.testing.assert_allclose(result.entries, kept - kept.mean())

    def test_gaussian_truncation_contract(self):
        n = 256
        spec = EnsembleSpec(n=n, m=2, rho=0.5, truncation=Truncation(c=1.0, tau_exponent=0.125))
        raw = sample_elliptic_matrix(spec, 1, trial_rng(3, 0, 1))
        tau_n = spec.truncation.tau_n(n)
        result = truncate_and_center(raw, c=1.0, tau_n=tau_n)
        self.assertLessEqual(float(np.max(np.abs(result.entries))), 2 * tau_n * math.sqrt(n))
        self.assertLessEqual(abs(float(result.entries.mean())), 1e-12)
        self.assertEqual(lindeberg_ratio([result], tau_n), 0.0)

    def test_analytic_mean_leaves_bounded_entries_untouched(self):
        spec = EnsembleSpec(n=32, m=2, entry_dist=RADEMACHER)
        raw = sample_elliptic_matrix(spec, 1, trial_rng(5, 0, 1))
        result = truncate_and_center(raw, c=1.0, tau_n=default_tau(32), mean=0.0)
        np.testing.assert_array_equal(result.entries, raw.entries)

    def test_analytic_mean_is_subtracted_as_given(self):
        entries = np.array([[5.0, 1.0], [0.0, -0.2]])
        result = truncate_and_center(RealMatrix(entries), c=1.0, tau_n=1.0 / math.sqrt(2), mean=0.25)
        np.testing.assert_allclose(result.entries, np.array([[0.0, 1.0], [0.0, -0.2]]) - 0.25)

    def test_scaled_input_is_rejected(self):
        scaled = RealMatrix(np.eye(4) / 2.0, scale=0.5)
        with self.assertRaises(ContractError):
            truncate_and_center(scaled, c=1.0, tau_n=0.5)


class TailFunctionalTests(SimpleTestCase):

    def test_bounded_entries_give_zero(self):
        tau, n = 0.5, 4
        entries = np.full((n, n), tau * math.sqrt(n) / 2)
        self.assertEqual(lindeberg_ratio([RealMatrix(entries)], tau), 0.0)

    def test_single_exceeding_entry(self):
        # tau = 0.5, n = 4: level tau*sqrt(n) = 1, one entry of size 3.
        entries = np.full((4, 4), 0.25)
        entries[2, 1] = 3.0
        self.assertAlmostEqual(lindeberg_ratio([RealMatrix(entries)], 0.5), 9.0 / 16.0)

    def test_maximum_over_family(self):
        small = RealMatrix(np.zeros((4, 4)))
        large = np.zeros((4, 4))
        large[0, 0] = 4.0
        self.assertAlmostEqual(lindeberg_ratio([small, RealMatrix(large)], 0.5), 1.0)

    def test_gaussian_tail_is_negligible(self):
        spec = EnsembleSpec(n=256, m=2)
        matrix = sample_elliptic_matrix(spec, 1, trial_rng(8, 0, 1))
        self.assertLess(lindeberg_ratio([matrix], 0.5), 1e-6)

    def test_empty_family_rejected(self):
        with self.assertRaises(DomainError):
            lindeberg_ratio([], 0.5)

    def test_expected_ratio_heavy_tail_closed_form(self):
        # level tau*sqrt(n) = 2; |X|*sqrt(5) is Pareto(2.5) on [1, inf).
        expected = (2.0 * math.sqrt(5.0)) ** -0.5
        self.assertAlmostEqual(expected_lindeberg_ratio(HEAVY_TAIL, 16, 0.5), expected)

    def test_expected_ratio_below_the_bulk_is_full_variance(self):
        self.assertEqual(expected_lindeberg_ratio(HEAVY_TAIL, 4, 0.1), 1.0)
        self.assertEqual(expected_lindeberg_ratio(RADEMACHER, 4, 0.5), 1.0)
        self.assertEqual(expected_lindeberg_ratio(RADEMACHER, 16, 0.5), 0.0)
        self.assertAlmostEqual(expected_lindeberg_ratio(GAUSSIAN, 4, 1e-12), 1.0)

    def test_expected_ratio_decreases_along_truncation_levels(self):
        truncation = Truncation()
        values = [
            expected_lindeberg_ratio(HEAVY_TAIL, n, truncation.c * truncation.tau_n(n)) for n in (64, 128, 256, 512)
        ]
        self.assertTrue(all(later < earlier for earlier, later in zip(values, values[1:])))

    def test_empirical_ratio_tracks_expected_for_gaussian(self):
        spec = EnsembleSpec(n=256, m=2)
        matrix = sample_elliptic_matrix(spec, 1, trial_rng(4, 0, 1))
        tau = 1.0 / 16.0
        self.assertAlmostEqual(expected_lindeberg_ratio(GAUSSIAN, 256, tau), 0.8013, places=3)
        self.assertAlmostEqual(lindeberg_ratio([matrix], tau), expected_lindeberg_ratio(GAUSSIAN, 256, tau), delta=0.03)

    def test_ui_ratio_non_increasing_in_level(self):
        spec = EnsembleSpec(n=64, m=2, entry_dist=EntryDist(EntryDistKind.HEAVY_TAIL, 2.5))
        matrices = [sample_elliptic_matrix(spec, 1, trial_rng(9, t, 1)) for t in range(5)]
        values = [ui_ratio(matrices, level) for level in (0.5, 1.0, 2.0, 4.0, 8.0)]
        self.assertEqual(values, sorted(values, reverse=True))


class InterpolationTests(SimpleTestCase):

    def setUp(self):
        rng = np.random.default_rng(0)
        self.x = RealMatrix(rng.standard_normal((5, 5)))
        self.y = RealMatrix(rng.standard_normal((5, 5)))

    def test_endpoints_are_exact(self):
        np.testing.assert_array_equal(interpolate(self.x, self.y, 0.0).entries, self.x.entries)
        np.testing.assert_array_equal(interpolate(self.x, self.y, math.pi / 2).entries, self.y.entries)

    def test_linearity_on_identity(self):
        n = 4
        identity = RealMatrix(math.sqrt(n) * np.eye(n))
        result = interpolate(identity, identity, math.pi / 4)
        np.testing.assert_allclose(result.entries, math.sqrt(2) * identity.entries)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            interpolate(self.x, RealMatrix(np.zeros((4, 4))), 0.3)

    def test_phi_outside_quarter_turn(self):
        with self.assertRaises(DomainError):
            interpolate(self.x, self.y, 2.0)

    @tag('slow')
    def test_interpolation_keeps_pair_correlation(self):
        spec = EnsembleSpec(n=64, m=2, rho=0.4, entry_dist=RADEMACHER)
        z_matrices = []
        for trial in range(30):
            x = sample_factors(spec, trial)[0]
            y = sample_gaussian_companion(spec, trial)[0]
            z_matrices.append(interpolate(x, y, 0.7))
        self.assertAlmostEqual(pooled_pair_correlation(z_matrices), 0.4, delta=0.03)


class EnsembleSpecSerializerTests(SimpleTestCase):

    def test_round_trip(self):
        payload = {
            'n': 32, 'm': 3, 'rho': 0.25,
            'entry_dist': {'kind': 'heavy_tail', 'exponent': 2.5},
            'truncation': {'c': 1.0, 'tau_exponent': 0.125},
            'master_seed': 17,
        }
        serializer = EnsembleSpecSerializer(data=payload)
        self.assertTrue(serializer.is_valid(), serializer.errors)
        spec = serializer.save()
        self.assertEqual(spec.entry_dist.exponent, 2.5)
        self.assertEqual(EnsembleSpecSerializer(spec).data['entry_dist'], payload['entry_dist'])
        self.assertEqual(spec.as_dict(), payload)

    def test_rho_above_one_names_invariant(self):
        serializer = EnsembleSpecSerializer(data={'n': 8, 'rho': 1.5})
        self.assertFalse(serializer.is_valid())
        self.assertIn('rho', serializer.errors)

    def test_unknown_key_rejected(self):
        serializer = EnsembleSpecSerializer(data={'n': 8, 'size': 3})
        self.assertFalse(serializer.is_valid())

    def test_limit_regime_rejects_unit_rho(self):
        serializer = EnsembleSpecSerializer(data={'n': 8, 'rho': 1.0}, context={'limit_regime': True})
        self.assertFalse(serializer.is_valid())
        self.assertTrue(EnsembleSpecSerializer(data={'n': 8, 'rho': 1.0}).is_valid())
