import math

import numpy as np
from django.test import SimpleTestCase, tag

from core.exception import DomainError
from core.utils import canonical_json
from ensemble.models import EnsembleSpec, EntryDist, EntryDistKind
from harness.executor import TrialExecutor
from harness.models import CheckName, ExperimentConfig
from harness.serializer import ExperimentConfigSerializer
from harness.services import (
    appendix_diagnostics, elliptic_law_experiment, limit_law_experiment, linearization_exactness, stieltjes_checks,
    truncation_stability, universality_sweep, verify,
)
from harness.statistics import (
    binomial_interval, ks_distance, kuiper_statistic, loglog_slope, mean_interval, non_increasing_frequencies,
    two_sample_ks,
)


HEAVY_TAIL = EntryDist(EntryDistKind.HEAVY_TAIL, 2.5)


def small_config(**changes):
    data = {
        'ensemble': EnsembleSpec(n=16, m=2, rho=0.3, master_seed=99),
        'trials': 3,
        'n_ladder': (8, 16),
        'appendix_ladder': (8, 16, 32),
        'appendix_trials': 20,
    }
    data.update(changes)
    return ExperimentConfig(**data)


class StatisticsTests(SimpleTestCase):

    def test_plug_in_quantiles(self):
        size = 50
        sample = (np.arange(1, size + 1) - 0.5) / size
        self.assertAlmostEqual(ks_distance(sample, lambda x: np.clip(x, 0, 1)), 0.5 / size)

    def test_single_point(self):
        self.assertAlmostEqual(ks_distance([0.5], lambda x: np.clip(x, 0, 1)), 0.5)

    def test_kuiper_equispaced(self):
        size = 40
        angles = 2 * math.pi * np.arange(size) / size
        self.assertAlmostEqual(kuiper_statistic(angles), 1 / size)

    def test_kuiper_rotation_invariant(self):
        angles = np.random.default_rng(3).uniform(0, 2 * math.pi, 200)
        rotated = np.mod(angles + 1.234, 2 * math.pi)
        self.assertAlmostEqual(kuiper_statistic(angles), kuiper_statistic(rotated), delta=1e-12)
        self.assertTrue(0.0 <= kuiper_statistic(angles) <= 2.0)

    def test_empty_samples(self):
        with self.assertRaises(DomainError):
            ks_distance([], lambda x: x)
        with self.assertRaises(DomainError):
            kuiper_statistic([])
        with self.assertRaises(DomainError):
            two_sample_ks([], [1.0])

    def test_binomial_interval(self):
        low, high = binomial_interval(0, 10)
        self.assertEqual(low, 0.0)
        self.assertLess(high, 0.35)
        low, high = binomial_interval(5, 10)
        self.assertTrue(low < 0.5 < high)

    def test_loglog_slope_of_power_law(self):
        slope, _ = loglog_slope([1, 2, 4, 8], [3.0, 1.5, 0.75, 0.375])
        self.assertAlmostEqual(slope, -1.0)
        with self.assertRaises(DomainError):
            loglog_slope([1, 2], [1.0, 0.0])

    def test_mean_interval(self):
        self.assertEqual(mean_interval([2.0]), (2.0, 0.0))
        mean, half_width = mean_interval([1.0, 2.0, 3.0])
        self.assertEqual(mean, 2.0)
        self.assertGreater(half_width, 0.0)

    def test_non_increasing_frequencies(self):
        self.assertTrue(non_increasing_frequencies([10, 2], 100)[0])
        self.assertFalse(non_increasing_frequencies([0, 30], 100)[0])


class TrialExecutorTests(SimpleTestCase):

    @staticmethod
    def square_or_fail(key):
        if key == 3:
            raise DomainError("trial 3 is out of its domain")
        return key * key

    def test_results_in_key_order(self):
        for threads in (1, 4):
            batch = TrialExecutor(threads=threads).run(self.square_or_fail, range(6))
            self.assertEqual(batch.values, [0, 1, 4, 16, 25])
            self.assertEqual(list(batch.failures), [3])
            self.assertAlmostEqual(batch.exclusion_rate, 1 / 6)

    def test_other_errors_propagate(self):
        def broken(key):
            raise ValueError("not a lab failure")
        for threads in (1, 2):
            with self.assertRaises(ValueError):
                TrialExecutor(threads=threads).run(broken, range(3))


class ExperimentConfigSerializerTests(SimpleTestCase):

    def test_minimal_config(self):
        serializer = ExperimentConfigSerializer(data={'ensemble': {'n': 8}})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        config = serializer.save()
        self.assertEqual(config.ensemble.n, 8)
        self.assertEqual(config.checks, CheckName.CHOICES)
        self.assertEqual(config.z_list, (0.5 + 0.2j,))

    def test_rho_outside_unit_interval(self):
        serializer = ExperimentConfigSerializer(data={'ensemble': {'n': 8, 'rho': 1.5}})
        self.assertFalse(serializer.is_valid())
        self.assertIn('rho', str(serializer.errors['ensemble']))

    def test_unit_rho_rejected_for_experiments(self):
        serializer = ExperimentConfigSerializer(data={'ensemble': {'n': 8, 'rho': 1.0}})
        self.assertFalse(serializer.is_valid())

    def test_alpha_on_real_axis(self):
        serializer = ExperimentConfigSerializer(data={'ensemble': {'n': 8}, 'alpha_grid': [[0.5, 0.0]]})
        self.assertFalse(serializer.is_valid())
        self.assertIn('alpha_grid', serializer.errors)

    def test_unknown_keys(self):
        serializer = ExperimentConfigSerializer(data={'ensemble': {'n': 8}, 'trails': 3})
        self.assertFalse(serializer.is_valid())
        self.assertIn('trails', serializer.errors)

    def test_partial_range_beyond_m(self):
        serializer = ExperimentConfigSerializer(data={'ensemble': {'n': 8, 'm': 2}, 'partial_range': [1, 3]})
        self.assertFalse(serializer.is_valid())
        self.assertIn('partial_range', serializer.errors)

    def test_truncation_dist(self):
        serializer = ExperimentConfigSerializer(data={'ensemble': {'n': 8}})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertIsNone(serializer.save().truncation_dist)
        serializer = ExperimentConfigSerializer(
            data={'ensemble': {'n': 8}, 'truncation_dist': {'kind': 'heavy_tail', 'exponent': 1.5}},
        )
        self.assertFalse(serializer.is_valid())
        self.assertIn('truncation_dist', serializer.errors)


class LimitLawExperimentTests(SimpleTestCase):

    def test_statistics_in_range(self):
        report = limit_law_experiment(small_config(trials=4))
        radial = report.check('radial_ks')
        kuiper = report.check('angular_kuiper')
        self.assertTrue(0.0 <= radial.statistic <= 1.0)
        self.assertTrue(0.0 <= kuiper.statistic <= 2.0)
        self.assertEqual(radial.sample_size, 4)
        self.assertTrue(report.check('exclusions').passed)

    def test_worker_count_does_not_change_report(self):
        config = small_config(trials=5)
        serial = limit_law_experiment(config, TrialExecutor(threads=1))
        pooled = limit_law_experiment(config, TrialExecutor(threads=3))
        self.assertEqual(canonical_json(serial.as_dict()), canonical_json(pooled.as_dict()))

    def test_elliptic_single_factor(self):
        report = elliptic_law_experiment(small_config(trials=2))
        self.assertEqual(report.summary['law_m'], 1)
        self.assertTrue(0.0 <= report.check('radial_ks').statistic <= 1.0)

    def test_unit_rho_is_not_a_limit_regime(self):
        with self.assertRaises(DomainError):
            limit_law_experiment(small_config(ensemble=EnsembleSpec(n=16, m=2, rho=1.0)))

    @tag('slow')
    def test_square_law_at_desk_scale(self):
        config = ExperimentConfig(ensemble=EnsembleSpec(n=256, m=2, rho=0.5, master_seed=1), trials=20)
        report = limit_law_experiment(config)
        self.assertTrue(report.check('radial_ks').passed, report.check('radial_ks').as_dict())


class LinearizationExactnessTests(SimpleTestCase):

    def test_all_instances_pass(self):
        report = linearization_exactness(small_config())
        self.assertTrue(report.passed, [check.as_dict() for check in report.checks])


class UniversalitySweepTests(SimpleTestCase):

    def test_phi_zero_is_exact(self):
        report = universality_sweep(small_config(), phi_list=(0.0, math.pi / 2))
        self.assertTrue(report.check('phi_zero_exact').passed)
        self.assertEqual(report.summary['max_difference']['0.0'], [0.0, 0.0])

    def test_phi_outside_quarter_turn(self):
        with self.assertRaises(DomainError):
            universality_sweep(small_config(), phi_list=(2.0,))

    def test_rademacher_to_gaussian_difference_decreases(self):
        spec = EnsembleSpec(n=32, m=2, rho=0.5, entry_dist=EntryDist(EntryDistKind.RADEMACHER), master_seed=17)
        config = small_config(ensemble=spec, trials=10, alpha_grid=(1j,), n_ladder=(32, 64, 128))
        report = universality_sweep(config, phi_list=(math.pi / 2,))
        check = report.check(f'decreasing_phi={math.pi / 2:.4f}')
        self.assertTrue(check.passed, check.as_dict())

    def test_gaussian_against_gaussian_within_two_standard_errors(self):
        spec = EnsembleSpec(n=32, m=2, rho=0.5, master_seed=23)
        config = small_config(ensemble=spec, trials=30, alpha_grid=(1j,), n_ladder=(32,))
        report = universality_sweep(config, phi_list=(math.pi / 2,))
        key = str(math.pi / 2)
        difference = report.summary['max_difference'][key][0]
        error = report.summary['standard_error'][key][0]
        self.assertGreater(error, 0.0)
        self.assertLessEqual(difference, 2 * error)


class TruncationStabilityTests(SimpleTestCase):

    def test_bounded_entries_are_left_unchanged(self):
        spec = EnsembleSpec(n=16, m=2, entry_dist=EntryDist(EntryDistKind.RADEMACHER), master_seed=5)
        report = truncation_stability(small_config(ensemble=spec, n_ladder=(32, 64)))
        self.assertEqual(report.summary['bound_shape'], [0.0, 0.0])
        self.assertEqual(report.summary['difference'], [0.0, 0.0])
        self.assertTrue(report.check('negligible').passed)

    def test_truncation_law_overrides_the_ensemble_law(self):
        report = truncation_stability(small_config(truncation_dist=HEAVY_TAIL))
        self.assertEqual(report.summary['entry_dist'], {'kind': 'heavy_tail', 'exponent': 2.5})
        self.assertTrue(all(shape > 0 for shape in report.summary['bound_shape']))

    def test_doubling_v_quarters_the_bound_shape(self):
        base = small_config(truncation_dist=HEAVY_TAIL, alpha_grid=(1j, 0.5 + 1j))
        doubled = base.with_changes(alpha_grid=(2j, 0.5 + 2j))
        shapes = truncation_stability(base).summary['bound_shape']
        doubled_shapes = truncation_stability(doubled).summary['bound_shape']
        for shape, doubled_shape in zip(shapes, doubled_shapes):
            self.assertAlmostEqual(doubled_shape / shape, 0.25)

    def test_differences_stay_under_the_fitted_bound(self):
        report = truncation_stability(small_config(truncation_dist=HEAVY_TAIL))
        fitted = report.summary['fitted_constant']
        for difference, shape in zip(report.summary['difference'], report.summary['bound_shape']):
            self.assertLessEqual(difference, fitted * shape * (1 + 1e-12))

    @tag('slow')
    def test_heavy_tail_difference_decreases_along_the_ladder(self):
        spec = EnsembleSpec(n=64, m=2, rho=0.5, master_seed=31)
        config = small_config(
            ensemble=spec, truncation_dist=HEAVY_TAIL, trials=30, n_ladder=(32, 128, 512),
        )
        report = truncation_stability(config, TrialExecutor(threads=4))
        shapes = report.summary['bound_shape']
        self.assertTrue(all(later < earlier for earlier, later in zip(shapes, shapes[1:])))
        self.assertTrue(report.check('decreasing').passed, report.check('decreasing').as_dict())


class AppendixDiagnosticsTests(SimpleTestCase):

    def test_report_structure(self):
        report = appendix_diagnostics(small_config())
        ratios = report.summary['frobenius_over_n']
        self.assertEqual(len(ratios), 3)
        self.assertTrue(all(1.0 < ratio < 3.0 for ratio in ratios))
        self.assertTrue(all(variance > 0 for variance in report.summary['trace_variance']))
        self.assertIsNotNone(report.check('trace_variance_decay'))

    @tag('slow')
    def test_desk_scale_ladder(self):
        spec = EnsembleSpec(n=64, m=2, rho=0.5, master_seed=41)
        config = small_config(ensemble=spec, appendix_ladder=(32, 64, 128, 256), appendix_trials=200, appendix_v=2.0)
        report = appendix_diagnostics(config, TrialExecutor(threads=4))
        frobenius = report.check('frobenius_slope')
        self.assertTrue(frobenius.passed, frobenius.as_dict())
        self.assertTrue(0.9 <= frobenius.statistic <= 1.1)
        self.assertTrue(report.check('frobenius_bounded').passed)
        decay = report.check('trace_variance_decay')
        self.assertTrue(decay.passed, decay.as_dict())
        self.assertIn('within_band', decay.detail)
        self.assertTrue(report.check('entry_mean').passed)


class StieltjesChecksTests(SimpleTestCase):

    def test_solver_grid_mass_and_moments(self):
        report = stieltjes_checks(small_config())
        self.assertTrue(report.passed, [check.as_dict() for check in report.checks if not check.passed])


class VerifyTests(SimpleTestCase):

    def test_only_enabled_blocks_run(self):
        report = verify(small_config(checks=(CheckName.LINEARIZATION,)))
        self.assertEqual({check.name.split('.')[0] for check in report.checks}, {CheckName.LINEARIZATION})
        self.assertTrue(report.passed)

    def test_block_errors_become_failed_checks(self):
        config = small_config(ensemble=EnsembleSpec(n=16, m=2, rho=1.0), checks=(CheckName.LIMIT_LAW,))
        report = verify(config)
        self.assertFalse(report.passed)
        self.assertIsNotNone(report.check('limit_law.error'))

    def test_reports_are_byte_identical_across_workers(self):
        config = small_config(checks=(CheckName.LIMIT_LAW, CheckName.APPENDIX))
        timings = {}
        serial = verify(config, TrialExecutor(threads=1), timings=timings)
        pooled = verify(config, TrialExecutor(threads=4))
        self.assertEqual(canonical_json(serial.as_dict()), canonical_json(pooled.as_dict()))
        self.assertEqual(set(timings), {CheckName.LIMIT_LAW, CheckName.APPENDIX})
