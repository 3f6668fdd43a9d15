"""
Monte Carlo experiments and the acceptance harness.

Each experiment takes an ExperimentConfig and returns an ExperimentReport.
Trials run through a TrialExecutor and are reduced in trial order, so a
report depends only on (config, master_seed).
"""
import logging
import math
import time
from contextlib import contextmanager

import numpy as np

from core.exception import CheckSkipped, DomainError, LabException
from core.utils import content_hash
from ensemble.models import EntryDist, EntryDistKind, Truncation
from ensemble.services import (
    expected_lindeberg_ratio, get_distribution_strategy, interpolate, lindeberg_ratio, sample_elliptic_matrix,
    sample_factors, sample_gaussian_companion, trial_rng, truncate_and_center,
)
from harness.executor import TrialExecutor
from harness.models import CheckName, ExperimentConfig, ExperimentReport
from harness.statistics import kuiper_statistic, ks_distance, loglog_slope, mean_interval, two_sample_ks
from limitlaw.models import EllipticLaw, LimitLaw
from limitlaw.services import density, fuss_catalan_moment, limit_potential, radial_cdf, to_unit_disc
from potential.services import (
    laplacian_density, log_integrability_tail, mean_potential_grid, potential_grid_from_function,
    quantile_floor_check, smallest_sv_tail,
)
from potential.models import PotentialGridSpec
from spectra.services import (
    build_linearization, eigenvalues, partial_product, product, product_sv_inequality, resolvent_trace,
    shifted_singular_values, symmetrized_spectrum,
)
from stieltjes.models import SystemForm
from stieltjes.services import density_from_inversion, extrapolated_moment, form_discrimination

logger = logging.getLogger(__name__)

RADIAL_KS_THRESHOLD = 0.05
RADEMACHER_KS_THRESHOLD = 0.06
RHO_KS_THRESHOLD = 0.03
KUIPER_SCALE = 1.9
REAL_AXIS_TOLERANCE = 1e-10
EXCLUSION_CAP = 0.01
ALTERNATIVE_RHO = 0.5

LINEARIZATION_INSTANCES = 100
LINEARIZATION_SIZES = (4, 8, 16, 32, 64)
PAIRING_TOLERANCE = 1e-8
SVD_AGREEMENT_TOLERANCE = 1e-6

STIELTJES_Z = (0.0, 0.5, 0.5 + 0.5j)
STIELTJES_M = (2, 3)
STIELTJES_U = np.linspace(-3.0, 3.0, 40)
STIELTJES_V = (0.01, 0.05, 0.1, 0.5, 1.0)
RESIDUAL_TOLERANCE = 1e-12
MASS_TOLERANCE = 0.03
MOMENT_GRID = np.linspace(-2.7, 2.7, 2161)
MOMENT_EPS = 0.005
MOMENT_TOLERANCE = 0.02
DISCRIMINATION_THRESHOLD = 0.08

ANALYTIC_STEP = 0.01
ANALYTIC_TOLERANCE = 0.01
ANNULUS = (0.4, 0.85)
ANNULUS_TOLERANCE = 0.15
MASKED_CAP = 1e-3

TAIL_Z = 0.5
SAFEGUARD_TRIALS = 200
LOG_TAIL_T = 10.0
LOG_TAIL_CAP = 0.05
PROFILE_FLOOR = 0.05
INEQUALITY_INSTANCES = 1000
INEQUALITY_SIZE = 8
INEQUALITY_SLACK = -1e-9

ENTRY_MEAN_SIGMAS = 4.0
FROBENIUS_SLOPE_BAND = (0.9, 1.1)
FROBENIUS_RATIO_CAP = 3.0
TRACE_VARIANCE_SLOPE_CAP = -0.65
TRACE_VARIANCE_BAND = (-1.35, -0.65)

UNIVERSALITY_MIN_V = 1.0
NEGLIGIBLE_DIFFERENCE = 1e-3


def _new_report(kind, config: ExperimentConfig):
    return ExperimentReport(
        kind=kind,
        config_hash=content_hash(config.as_dict()),
        master_seed=config.ensemble.master_seed,
    )


def _real_mask(values):
    scale = float(np.max(np.abs(values), initial=0.0))
    return np.abs(values.imag) <= REAL_AXIS_TOLERANCE * scale


def _spectral_law_report(kind, config, spectrum_of_trial, law, ks_threshold, executor):
    """Radial KS per trial and pooled angular Kuiper against the rotation-invariant law `law`."""
    n = config.ensemble.n

    def trial(index):
        values = spectrum_of_trial(index)
        radii = np.abs(values)
        real = _real_mask(values)
        return {
            'ks': ks_distance(radii, lambda r: radial_cdf(law, r)),
            'radii': radii,
            'angles': np.mod(np.angle(values[~real]), 2 * math.pi),
            'real': int(real.sum()),
        }

    batch = executor.run(trial, range(config.trials))
    report = _new_report(kind, config)
    report.excluded['trials'] = batch.failures
    results = batch.values
    if not results:
        report.add_check('exclusions', False, 1.0, EXCLUSION_CAP, config.trials)
        return report, np.array([])

    ks_values = [result['ks'] for result in results]
    mean_ks, half_width = mean_interval(ks_values)
    angles = np.concatenate([result['angles'] for result in results])
    real_count = sum(result['real'] for result in results)
    total = n * len(results)
    real_fraction = real_count / total
    kuiper = kuiper_statistic(angles) if angles.size else math.inf
    # Real eigenvalues of real matrices, and the matching depletion of
    # complex ones near the axis, move the angular CDF by about their mass.
    kuiper_threshold = KUIPER_SCALE / math.sqrt(total) + real_fraction

    report.summary.update({
        'n': n,
        'law_m': law.m,
        'trials': len(results),
        'mean_radial_ks': mean_ks,
        'radial_ks_half_width': half_width,
        'kuiper': kuiper,
        'real_eigenvalues': real_count,
        'real_fraction': real_fraction,
    })
    report.add_check('radial_ks', mean_ks <= ks_threshold, mean_ks, ks_threshold, len(results))
    report.add_check(
        'angular_kuiper', kuiper <= kuiper_threshold, kuiper, kuiper_threshold, int(angles.size),
        excluded_real=real_count,
    )
    report.add_check('exclusions', batch.exclusion_rate <= EXCLUSION_CAP, batch.exclusion_rate, EXCLUSION_CAP, config.trials)
    report.tables['radial_ks'] = (['trial', 'ks'], list(zip(
        [key for key in batch.keys if key in batch.results], ks_values,
    )))
    logger.info("%s: mean radial KS %.4f, Kuiper %.4f over %d trials", kind, mean_ks, kuiper, len(results))
    return report, np.concatenate([result['radii'] for result in results])


def limit_law_experiment(config: ExperimentConfig, executor=None, ks_threshold=RADIAL_KS_THRESHOLD):
    """Eigenvalues of the product against the law of u^m, u uniform on the disc."""
    spec = config.ensemble.require_limit_regime()
    report, _ = _limit_law_with_radii(config, spec, executor or TrialExecutor(), ks_threshold)
    return report


def _limit_law_with_radii(config, spec, executor, ks_threshold):
    return _spectral_law_report(
        'limit_law',
        config.with_changes(ensemble=spec),
        lambda trial: eigenvalues(product(sample_factors(spec, trial))).values,
        LimitLaw(spec.m),
        ks_threshold,
        executor,
    )


def elliptic_law_experiment(config: ExperimentConfig, executor=None, ks_threshold=RADIAL_KS_THRESHOLD):
    """
    A single elliptic factor: eigenvalues of n^(-1/2)·X mapped onto the unit
    disc by (x/(1+rho), y/(1-rho)) and compared with the uniform disc.
    """
    spec = config.ensemble.require_limit_regime()
    law = EllipticLaw(spec.rho)

    def spectrum(trial):
        factor = sample_elliptic_matrix(spec, 1, trial_rng(spec.master_seed, trial, 1))
        return to_unit_disc(law, eigenvalues(factor.scaled()).values)

    report, _ = _spectral_law_report('elliptic_law', config, spectrum, LimitLaw(1), ks_threshold, executor or TrialExecutor())
    return report


def rho_independence(config: ExperimentConfig, executor=None):
    """Two-sample KS between pooled radii at rho = 0 and at a second rho."""
    executor = executor or TrialExecutor()
    spec = config.ensemble.require_limit_regime()
    other_rho = spec.rho if spec.rho != 0.0 else ALTERNATIVE_RHO
    base = spec.with_changes(rho=0.0)
    # Second run on its own seed.
    other = spec.with_changes(rho=other_rho, master_seed=(spec.master_seed + 1) % 2 ** 64)
    _, radii_base = _limit_law_with_radii(config, base, executor, RADIAL_KS_THRESHOLD)
    _, radii_other = _limit_law_with_radii(config, other, executor, RADIAL_KS_THRESHOLD)
    report = _new_report('rho_independence', config)
    distance = two_sample_ks(radii_base, radii_other)
    report.summary.update({'rho': [0.0, other_rho], 'pooled': [int(radii_base.size), int(radii_other.size)]})
    report.add_check('pooled_radii_ks', distance <= RHO_KS_THRESHOLD, distance, RHO_KS_THRESHOLD, int(radii_base.size))
    return report


def entry_universality(config: ExperimentConfig, executor=None):
    """The limit-law experiment repeated with Rademacher entries."""
    rademacher = config.ensemble.with_changes(entry_dist=EntryDist(EntryDistKind.RADEMACHER), truncation=None)
    report = limit_law_experiment(config.with_changes(ensemble=rademacher), executor, RADEMACHER_KS_THRESHOLD)
    report.kind = 'entry_universality'
    return report


def _resolvent_traces(factors, z, alphas):
    spectrum = symmetrized_spectrum(build_linearization(factors, z))
    return np.array([resolvent_trace(spectrum, alpha) for alpha in alphas])


def _trend(ladder, values):
    """Log-log slope of a positive sequence over the ladder, None when undefined."""
    if len(ladder) < 2 or any(value <= 0 for value in values):
        return None
    return loglog_slope(ladder, values)[0]


def _standard_error(stack):
    """Standard error of the trial mean per column of complex samples; zero for one trial."""
    if len(stack) < 2:
        return np.zeros(stack.shape[1])
    deviations = np.abs(stack - stack.mean(axis=0)) ** 2
    return np.sqrt(deviations.sum(axis=0) / (len(stack) - 1) / len(stack))


def universality_sweep(config: ExperimentConfig, phi_list=None, executor=None):
    """
    s_n(alpha, z, phi) from the entrywise interpolation X·cos(phi) + Y·sin(phi)
    between the ensemble and a Gaussian companion, against phi = 0.
    """
    executor = executor or TrialExecutor()
    phi_list = tuple(config.phi_list if phi_list is None else phi_list)
    if any(not 0.0 <= phi <= math.pi / 2 for phi in phi_list):
        raise DomainError("phi values must lie in [0, pi/2].")
    alphas = np.array(config.alpha_grid, dtype=complex)
    checked = alphas.imag >= UNIVERSALITY_MIN_V
    if not checked.any():
        logger.info("no alpha with Im >= %g; universality results are informational", UNIVERSALITY_MIN_V)
        checked = np.ones_like(checked)
    z = config.z_list[0]
    report = _new_report('universality', config)
    differences = {phi: [] for phi in phi_list}
    errors = {phi: [] for phi in phi_list}

    for n in config.n_ladder:
        spec = config.ensemble.with_changes(n=int(n))

        def trial(index):
            xs = sample_factors(spec, index)
            ys = sample_gaussian_companion(spec, index)
            baseline = _resolvent_traces(xs, z, alphas)
            return {
                phi: _resolvent_traces([interpolate(x, y, phi) for x, y in zip(xs, ys)], z, alphas) - baseline
                for phi in phi_list
            }

        batch = executor.run(trial, range(config.trials))
        report.excluded[f'n={n}'] = batch.failures
        for phi in phi_list:
            stack = np.array([result[phi] for result in batch.values])
            mean = stack.mean(axis=0)
            error = _standard_error(stack)
            worst = int(np.argmax(np.where(checked, np.abs(mean), -1.0)))
            differences[phi].append(float(np.abs(mean[worst])))
            errors[phi].append(float(error[worst]))
        logger.info("universality n=%d: %s", n, {round(phi, 4): differences[phi][-1] for phi in phi_list})

    report.summary.update({
        'z': z,
        'n_ladder': list(config.n_ladder),
        'phi': list(phi_list),
        'max_difference': {str(phi): differences[phi] for phi in phi_list},
        'standard_error': {str(phi): errors[phi] for phi in phi_list},
        'informational_alpha': [complex(alpha) for alpha in alphas[~checked]],
    })
    rows = []
    for phi in phi_list:
        rows.extend((phi, n, d, e) for n, d, e in zip(config.n_ladder, differences[phi], errors[phi]))
        if phi == 0.0:
            report.add_check('phi_zero_exact', max(differences[phi]) == 0.0, max(differences[phi]), 0.0, config.trials)
            continue
        slope = _trend(config.n_ladder, differences[phi])
        if slope is not None:
            report.add_check(
                f'decreasing_phi={phi:.4f}', slope < 0.0, slope, 0.0, config.trials * len(config.n_ladder),
            )
    report.tables['universality'] = (['phi', 'n', 'max_difference', 'standard_error'], rows)
    return report


def truncation_stability(config: ExperimentConfig, executor=None):
    """
    Resolvent-trace estimates before and after truncate_and_center at the
    same draws, against the bound shape sqrt(L_n(tau_n))/v².

    The draws use `config.truncation_dist` when set, else the ensemble's own
    law. Centering removes the law's analytic truncated mean, so a law that
    nothing exceeds is left bit-for-bit unchanged. L_n is the law's expected
    Lindeberg ratio; the per-sample plug-in is reported next to it.
    """
    executor = executor or TrialExecutor()
    dist = config.truncation_dist or config.ensemble.entry_dist
    strategy = get_distribution_strategy(dist)
    truncation = config.ensemble.truncation or Truncation()
    alphas = np.array(config.alpha_grid, dtype=complex)
    v_min = float(alphas.imag.min())
    z = config.z_list[0]
    report = _new_report('truncation', config)
    differences, shapes, lindeberg_empirical = [], [], []

    for n in config.n_ladder:
        spec = config.ensemble.with_changes(n=int(n), entry_dist=dist, truncation=None)
        tau = truncation.tau_n(n)
        mean = strategy.truncated_mean(truncation.threshold(n))

        def trial(index):
            factors = sample_factors(spec, index)
            truncated = [truncate_and_center(factor, truncation.c, tau, mean=mean) for factor in factors]
            return (
                _resolvent_traces(factors, z, alphas) - _resolvent_traces(truncated, z, alphas),
                lindeberg_ratio(factors, truncation.c * tau),
            )

        batch = executor.run(trial, range(config.trials))
        report.excluded[f'n={n}'] = batch.failures
        stack = np.array([result[0] for result in batch.values])
        differences.append(float(np.max(np.abs(stack.mean(axis=0)))))
        lindeberg_empirical.append(float(np.mean([result[1] for result in batch.values])))
        shapes.append(math.sqrt(expected_lindeberg_ratio(dist, n, truncation.c * tau)) / v_min ** 2)
        logger.info("truncation n=%d: difference %.4g, bound shape %.4g", n, differences[-1], shapes[-1])

    positive = [d / s for d, s in zip(differences, shapes) if s > 0]
    fitted = max(positive) if positive else None
    report.summary.update({
        'entry_dist': dist.as_dict(),
        'n_ladder': list(config.n_ladder),
        'difference': differences,
        'bound_shape': shapes,
        'lindeberg_empirical': lindeberg_empirical,
        'fitted_constant': fitted,
        'v_min': v_min,
    })
    report.tables['truncation'] = (
        ['n', 'difference', 'bound_shape', 'lindeberg_empirical'],
        list(zip(config.n_ladder, differences, shapes, lindeberg_empirical)),
    )
    if max(differences) <= NEGLIGIBLE_DIFFERENCE:
        report.add_check('negligible', True, max(differences), NEGLIGIBLE_DIFFERENCE, config.trials)
    else:
        slope = _trend(config.n_ladder, differences)
        report.add_check(
            'decreasing', slope is not None and slope < 0.0, slope if slope is not None else math.nan, 0.0,
            config.trials * len(config.n_ladder),
        )
    return report


def appendix_diagnostics(config: ExperimentConfig, executor=None):
    """
    Entry means of partial products, Frobenius norm scaling and the decay of
    Var((1/2n)·Tr R) over the appendix ladder.
    """
    executor = executor or TrialExecutor()
    a, b = config.partial_range
    alpha = 1j * config.appendix_v
    z = config.z_list[0]
    report = _new_report('appendix', config)
    frobenius, variances, z_scores = [], [], []

    for n in config.appendix_ladder:
        spec = config.ensemble.with_changes(n=int(n))

        def trial(index):
            factors = sample_factors(spec, index)
            block = partial_product(factors, a, b)
            spectrum = symmetrized_spectrum(build_linearization(factors, z))
            return (
                float(np.mean(block[:n, :n])) + float(np.mean(block[n:, n:])),
                float(np.sum(block ** 2)),
                resolvent_trace(spectrum, alpha),
            )

        batch = executor.run(trial, range(config.appendix_trials))
        report.excluded[f'n={n}'] = batch.failures
        means = np.array([result[0] for result in batch.values])
        norms = np.array([result[1] for result in batch.values])
        traces = np.array([result[2] for result in batch.values])
        spread = means.std(ddof=1) / math.sqrt(means.size) if means.size > 1 else math.inf
        z_scores.append(abs(float(means.mean())) / spread if spread > 0 else 0.0)
        frobenius.append(float(norms.mean()))
        variances.append(float(np.sum(np.abs(traces - traces.mean()) ** 2) / max(traces.size - 1, 1)))

    ratios = [value / n for value, n in zip(frobenius, config.appendix_ladder)]
    frobenius_slope = _trend(config.appendix_ladder, frobenius)
    variance_slope = _trend(config.appendix_ladder, variances)
    trials = config.appendix_trials * len(config.appendix_ladder)
    report.summary.update({
        'ladder': list(config.appendix_ladder),
        'partial_range': [a, b],
        'entry_mean_z': z_scores,
        'frobenius_over_n': ratios,
        'trace_variance': variances,
        'v': config.appendix_v,
    })
    report.tables['appendix'] = (
        ['n', 'entry_mean_z', 'frobenius_over_n', 'trace_variance'],
        list(zip(config.appendix_ladder, z_scores, ratios, variances)),
    )
    report.add_check('entry_mean', max(z_scores) <= ENTRY_MEAN_SIGMAS, max(z_scores), ENTRY_MEAN_SIGMAS, trials)
    low, high = FROBENIUS_SLOPE_BAND
    report.add_check(
        'frobenius_slope', frobenius_slope is not None and low <= frobenius_slope <= high,
        frobenius_slope, list(FROBENIUS_SLOPE_BAND), trials,
    )
    ratio_spread = max(ratios) / min(ratios) if min(ratios) > 0 else math.inf
    report.add_check('frobenius_bounded', ratio_spread <= FROBENIUS_RATIO_CAP, ratio_spread, FROBENIUS_RATIO_CAP, trials)
    low, high = TRACE_VARIANCE_BAND
    report.add_check(
        'trace_variance_decay', variance_slope is not None and variance_slope <= TRACE_VARIANCE_SLOPE_CAP,
        variance_slope, TRACE_VARIANCE_SLOPE_CAP, trials,
        within_band=variance_slope is not None and low <= variance_slope <= high,
    )
    return report


def linearization_exactness(config: ExperimentConfig):
    """±-symmetry of V(z) spectra and agreement of the positive half with the SVD of W - zI."""
    report = _new_report('linearization', config)
    pairing, agreement = 0.0, 0.0
    for index in range(LINEARIZATION_INSTANCES):
        n = LINEARIZATION_SIZES[index % len(LINEARIZATION_SIZES)]
        z = config.z_list[index % len(config.z_list)]
        factors = sample_factors(config.ensemble.with_changes(n=n), index)
        spectrum = symmetrized_spectrum(build_linearization(factors, z))
        pairing = max(pairing, spectrum.pairing_defect())
        svd = shifted_singular_values(product(factors), z, method='svd')
        agreement = max(agreement, float(np.max(np.abs(spectrum.positive_half() - svd))))
    report.summary.update({'instances': LINEARIZATION_INSTANCES, 'sizes': list(LINEARIZATION_SIZES)})
    report.add_check('pairing', pairing <= PAIRING_TOLERANCE, pairing, PAIRING_TOLERANCE, LINEARIZATION_INSTANCES)
    report.add_check(
        'svd_agreement', agreement <= SVD_AGREEMENT_TOLERANCE, agreement, SVD_AGREEMENT_TOLERANCE,
        LINEARIZATION_INSTANCES,
    )
    return report


def stieltjes_checks(config: ExperimentConfig):
    """Solver residuals and branch on an alpha grid, recovered mass and Fuss-Catalan moments."""
    report = _new_report('stieltjes', config)
    form = SystemForm.STATEMENT
    worst_residual, min_im_s, min_im_t, failures = 0.0, math.inf, math.inf, 0
    points = 0
    for m in STIELTJES_M:
        for z in STIELTJES_Z:
            for v in STIELTJES_V:
                profile = density_from_inversion(z, m, form, STIELTJES_U, v)
                points += profile.x.size
                failures += len(profile.failures)
                worst_residual = max(worst_residual, float(np.nanmax(profile.residuals)))
                min_im_s = min(min_im_s, float(np.min(profile.s.imag)))
                if z != 0:
                    min_im_t = min(min_im_t, float(np.min((profile.w - (profile.x + 1j * v)).imag)))

    report.add_check('solver_failures', failures == 0, failures, 0, points)
    report.add_check('residual', worst_residual <= RESIDUAL_TOLERANCE, worst_residual, RESIDUAL_TOLERANCE, points)
    report.add_check('nevanlinna', min_im_s > 0.0, min_im_s, 0.0, points)
    report.add_check('branch', min_im_t > 0.0, min_im_t, 0.0, points)

    masses = {}
    for m in STIELTJES_M:
        for z in STIELTJES_Z:
            masses[f'm={m},z={z}'] = density_from_inversion(z, m, form, config.x_grid(), config.eps).total_mass()
    worst_mass = max(abs(mass - 1.0) for mass in masses.values())
    report.add_check('mass', worst_mass <= MASS_TOLERANCE, worst_mass, MASS_TOLERANCE, len(masses), masses=masses)

    moments = {}
    for p in (1, 2, 3):
        expected = float(fuss_catalan_moment(2, p))
        moments[2 * p] = extrapolated_moment(0.0, 2, form, MOMENT_GRID, MOMENT_EPS, 2 * p) / expected - 1.0
    worst_moment = max(abs(error) for error in moments.values())
    report.add_check(
        'fuss_catalan_moments', worst_moment <= MOMENT_TOLERANCE, worst_moment, MOMENT_TOLERANCE, len(moments),
        relative_errors=moments,
    )
    return report


def discrimination_check(config: ExperimentConfig, executor=None):
    """Δ_n(z) under each system form at discrimination_n; the winner must fall below the threshold."""
    executor = executor or TrialExecutor()
    spec = config.ensemble.with_changes(n=config.discrimination_n)
    z = config.z_list[0]
    batch = executor.run(
        lambda trial: symmetrized_spectrum(build_linearization(sample_factors(spec, trial), z)),
        range(config.trials),
    )
    result = form_discrimination(z, spec.m, batch.values, config.x_grid(), config.eps)
    report = _new_report('form_discrimination', config)
    report.excluded['trials'] = batch.failures
    report.summary.update(result.as_dict())
    best = result.distances.get(result.winner, math.inf) if result.winner else math.inf
    report.add_check(
        'winner_distance', best <= DISCRIMINATION_THRESHOLD and not result.insufficient_resolution,
        best, DISCRIMINATION_THRESHOLD, len(batch.values), winner=result.winner,
    )
    return report


def potential_checks(config: ExperimentConfig, executor=None):
    """Analytic and Monte Carlo round trips through laplacian_density."""
    report = _new_report('potential', config)
    analytic = {}
    for m, (inner, outer) in ((1, (0.0, 0.9)), (2, (0.2, 0.9))):
        law = LimitLaw(m)
        grid_spec = PotentialGridSpec(x_min=-1.0, x_max=1.0, y_min=-1.0, y_max=1.0, step=ANALYTIC_STEP)
        field = laplacian_density(potential_grid_from_function(lambda points: limit_potential(law, points), grid_spec))
        points = field.points()
        region = (np.abs(points) >= inner) & (np.abs(points) <= outer)
        expected = density(law, points.real, points.imag)
        analytic[m] = float(np.max(np.abs(field.density[region] / expected[region] - 1.0)))
    worst = max(analytic.values())
    report.add_check('analytic_round_trip', worst <= ANALYTIC_TOLERANCE, worst, ANALYTIC_TOLERANCE, len(analytic),
                     per_m=analytic)

    spec = config.ensemble
    grid = mean_potential_grid(spec, config.potential_grid, config.potential_trials, executor=executor)
    field = laplacian_density(grid)
    radii = np.abs(field.points())
    inner, outer = ANNULUS
    law = LimitLaw(spec.m)
    expected_mass = radial_cdf(law, outer) - radial_cdf(law, inner)
    mass = field.mass((radii >= inner) & (radii <= outer))
    error = abs(mass / expected_mass - 1.0)
    report.excluded['trials'] = grid.excluded_trials
    report.summary.update({'annulus': list(ANNULUS), 'mass': mass, 'expected_mass': expected_mass})
    report.add_check('monte_carlo_annulus', error <= ANNULUS_TOLERANCE, error, ANNULUS_TOLERANCE, grid.trials)
    report.add_check('masked_fraction', grid.masked_fraction() <= MASKED_CAP, grid.masked_fraction(), MASKED_CAP,
                     grid.trials)
    report.tables['potential_grid'] = (['z_re', 'z_im', 'U', 'variance', 'masked'], list(grid.rows()))
    report.tables['density_field'] = (['z_re', 'z_im', 'density'], list(field.rows()))
    return report


def safeguard_checks(config: ExperimentConfig, executor=None):
    """Smallest singular value tails, singular value profile, quantile floor, log tails and prod1."""
    executor = executor or TrialExecutor()
    spec = config.ensemble
    diag = config.diagnostics
    report = _new_report('safeguards', config)

    tail = smallest_sv_tail(spec, diag, config.tail_trials, z=TAIL_Z, n_ladder=config.n_ladder, executor=executor)
    report.summary['tail'] = tail.as_dict()
    report.add_check(
        'tail_non_increasing', tail.non_increasing, tail.frequencies[-1], tail.frequencies[0],
        config.tail_trials * len(config.n_ladder), frequencies=tail.frequencies,
    )
    min_profile = tail.levels[-1].min_profile_c
    report.add_check('profile_floor', min_profile >= PROFILE_FLOOR, min_profile, PROFILE_FLOOR, tail.levels[-1].trials)

    trials = min(config.tail_trials, SAFEGUARD_TRIALS)

    def trial(index):
        spectrum = symmetrized_spectrum(build_linearization(sample_factors(spec, index), TAIL_Z))
        try:
            floor = quantile_floor_check(spectrum, diag.delta, spec.m, diag.C)
        except CheckSkipped as exc:
            floor = str(exc.detail)
        return floor, log_integrability_tail(spectrum, LOG_TAIL_T)[1]

    batch = executor.run(trial, range(trials))
    results = batch.values
    floors = [floor for floor, _ in results if isinstance(floor, bool)]
    skipped = [floor for floor, _ in results if not isinstance(floor, bool)]
    if skipped:
        report.skipped['quantile_floor'] = {'count': len(skipped), 'reason': skipped[0]}
    if floors:
        failure_rate = floors.count(False) / len(floors)
        bound = diag.C * diag.delta ** (1.0 / (spec.m + 1))
        report.add_check('quantile_floor', failure_rate <= bound, failure_rate, bound, len(floors))
    exceedance = sum(exceeds for _, exceeds in results) / max(len(results), 1)
    report.add_check('log_integrability', exceedance <= LOG_TAIL_CAP, exceedance, LOG_TAIL_CAP, len(results))

    worst_slack = math.inf
    for index in range(INEQUALITY_INSTANCES):
        rng = trial_rng(spec.master_seed, index, 0)
        a = rng.standard_normal((INEQUALITY_SIZE, INEQUALITY_SIZE))
        b = rng.standard_normal((INEQUALITY_SIZE, INEQUALITY_SIZE))
        worst_slack = min(worst_slack, product_sv_inequality(a, b)[0])
    report.add_check(
        'product_inequality', worst_slack >= INEQUALITY_SLACK, worst_slack, INEQUALITY_SLACK, INEQUALITY_INSTANCES,
    )
    report.tables['tail'] = (
        ['n', 'count', 'frequency', 'ci_low', 'ci_high'],
        [(level.n, level.count, level.frequency, *level.interval) for level in tail.levels],
    )
    return report


VERIFY_BLOCKS = (
    (CheckName.LIMIT_LAW, limit_law_experiment),
    (CheckName.ELLIPTIC_LAW, elliptic_law_experiment),
    (CheckName.RHO_INDEPENDENCE, rho_independence),
    (CheckName.ENTRY_UNIVERSALITY, entry_universality),
    (CheckName.LINEARIZATION, lambda config, executor: linearization_exactness(config)),
    (CheckName.STIELTJES, lambda config, executor: stieltjes_checks(config)),
    (CheckName.FORM_DISCRIMINATION, discrimination_check),
    (CheckName.POTENTIAL, potential_checks),
    (CheckName.SAFEGUARDS, safeguard_checks),
    (CheckName.APPENDIX, appendix_diagnostics),
    (CheckName.UNIVERSALITY, lambda config, executor: universality_sweep(config, executor=executor)),
    (CheckName.TRUNCATION, truncation_stability),
)


@contextmanager
def _timed(timings, name):
    start = time.perf_counter()
    try:
        yield
    finally:
        if timings is not None:
            timings[name] = time.perf_counter() - start


def verify(config: ExperimentConfig, executor=None, timings=None) -> ExperimentReport:
    """
    Run every enabled block and fold the results into one report. A block
    that raises a lab exception is recorded as a failed check.
    """
    executor = executor or TrialExecutor()
    report = _new_report('verify', config)
    for name, block in VERIFY_BLOCKS:
        if not config.enabled(name):
            continue
        logger.info("verify: running %s", name)
        with _timed(timings, name):
            try:
                result = block(config, executor)
            except LabException as exc:
                logger.warning("verify: %s raised %s", name, exc.detail)
                report.add_check(f'{name}.error', False, math.nan, math.nan, 0, error=str(exc.detail))
                continue
        report.merge(result, name)
    failed = [check.name for check in report.checks if not check.passed]
    if failed:
        logger.warning("verify: %d checks failed: %s", len(failed), ', '.join(failed))
    return report
