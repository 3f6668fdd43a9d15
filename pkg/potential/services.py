"""
Empirical logarithmic potentials, density reconstruction and the singular
value safeguards of the product.

U_n(z) = -(1/n)·ln|det(W - zI)| is computed from the singular values of
W - zI for a single point. Grid sweeps use the eigenvalues of W instead,
since ∏|λ_i - z| = ∏ s_i(W - zI) and one decomposition per trial then
covers every grid point.
"""
import logging
import math
from functools import reduce

import numpy as np
from scipy import linalg

from core.exception import CheckSkipped, ContractError, ConvergenceFailure, DomainError
from core.utils import write_csv, write_json
from ensemble.models import RealMatrix
from ensemble.services import COMPANION_STREAM, PRIMARY_STREAM, sample_factors
from harness.executor import TrialExecutor
from harness.statistics import non_increasing_frequencies
from potential.models import (
    GAMMA_LOWER, DensityField, PotentialGrid, PotentialGridSpec, PotentialValue, ProfileCheck, TailDiagnostics,
    TailLevel, TailReport, TailTrial,
)
from spectra.models import SymmetrizedSpectrum
from spectra.services import eigenvalues, product, shifted_singular_values

logger = logging.getLogger(__name__)

GRID_METHODS = ('eigen', 'svd')
GRID_CHUNK = 4096
DEFAULT_LADDER = (64, 128, 256)
MAX_RESAMPLES = 5
# Resampled prefixes draw from streams above the companion stream.
RESAMPLE_STREAM = COMPANION_STREAM + 1

POTENTIAL_HEADER = ['z_re', 'z_im', 'U', 'variance', 'masked']
DENSITY_HEADER = ['z_re', 'z_im', 'density']


def _as_array(matrix):
    if isinstance(matrix, RealMatrix):
        return matrix.entries
    return np.asarray(matrix)


def _zero_floor(singular_values):
    n = singular_values.size
    return n * np.finfo(float).eps * max(float(singular_values[0]), 1.0)


def empirical_potential(W, z, method='svd') -> PotentialValue:
    """
    -(1/n)·Σ ln s_i(W - zI). A smallest singular value inside the zero
    floor means z is numerically an eigenvalue of W; the result is then
    flagged and carries +inf.
    """
    values = shifted_singular_values(W, z, method=method)
    if values[-1] <= _zero_floor(values):
        logger.warning("z=%s is numerically an eigenvalue; potential is infinite", complex(z))
        return PotentialValue(math.inf, eigenvalue_hit=True)
    return PotentialValue(-float(np.mean(np.log(values))))


def potentials_from_eigenvalues(spectrum_values, points):
    """
    U_n at every point from the eigenvalues, chunked over points. A point
    within n·eps·max(max_i |λ_i - z|, 1) of an eigenvalue gets +inf, the
    marker mean_potential_grid masks.
    """
    spectrum_values = np.asarray(spectrum_values, dtype=complex)
    tolerance = spectrum_values.size * np.finfo(float).eps
    flat = points.ravel()
    result = np.empty(flat.size)
    with np.errstate(divide='ignore'):
        for start in range(0, flat.size, GRID_CHUNK):
            block = flat[start:start + GRID_CHUNK]
            distances = np.abs(block[:, None] - spectrum_values[None, :])
            floor = tolerance * np.maximum(distances.max(axis=1), 1.0)
            hit = (distances <= floor[:, None]).any(axis=1)
            result[start:start + GRID_CHUNK] = np.where(hit, math.inf, -np.mean(np.log(distances), axis=1))
    return result.reshape(points.shape)


def _svd_potentials(matrix, points):
    values = [empirical_potential(matrix, z, method='svd').value for z in points.ravel()]
    return np.array(values).reshape(points.shape)


def trial_potential(spec, grid_spec: PotentialGridSpec, trial_index, method='eigen'):
    """U_n over the grid for one trial of the ensemble."""
    if method not in GRID_METHODS:
        raise DomainError(f"Unknown potential method '{method}'.")
    matrix = product(sample_factors(spec, trial_index))
    points = grid_spec.points()
    if method == 'eigen':
        return potentials_from_eigenvalues(eigenvalues(matrix).values, points)
    return _svd_potentials(matrix, points)


def mean_potential_grid(spec, grid_spec: PotentialGridSpec, trials, method='eigen', executor=None) -> PotentialGrid:
    """
    Average of U_n over `trials` independent products. Points where a trial
    hits an eigenvalue are masked for that trial and counted.
    """
    if trials < 1:
        raise DomainError("mean_potential_grid needs at least one trial.")
    executor = executor or TrialExecutor()
    batch = executor.run(lambda trial: trial_potential(spec, grid_spec, trial, method), range(trials))
    if not batch.values:
        raise ConvergenceFailure("Every potential trial failed.", residuals=batch.failures)

    stack = np.stack(batch.values)
    finite = np.isfinite(stack)
    counts = finite.sum(axis=0)
    masked = (stack.shape[0] - counts).astype(int)
    with np.errstate(invalid='ignore', divide='ignore'):
        total = np.where(finite, stack, 0.0).sum(axis=0)
        mean = np.where(counts > 0, total / np.maximum(counts, 1), np.nan)
        deviations = np.where(finite, stack - mean, 0.0)
        variance = np.where(counts > 1, (deviations ** 2).sum(axis=0) / np.maximum(counts - 1, 1), 0.0)

    grid = PotentialGrid(
        spec=grid_spec,
        values=mean,
        variance=variance,
        masked=masked,
        trials=stack.shape[0],
        excluded_trials=batch.failures,
        method=method,
    )
    if masked.any():
        logger.warning("%d masked (point, trial) pairs on the potential grid", int(masked.sum()))
    logger.info("potential grid %s from %d trials (n=%d, m=%d)", grid.shape, grid.trials, spec.n, spec.m)
    return grid


def potential_grid_from_function(fn, grid_spec: PotentialGridSpec) -> PotentialGrid:
    """Grid of an analytic potential, e.g. limitlaw.limit_potential."""
    points = grid_spec.points()
    values = np.asarray(fn(points), dtype=float).reshape(points.shape)
    return PotentialGrid(
        spec=grid_spec,
        values=values,
        variance=np.zeros_like(values),
        masked=np.zeros(values.shape, dtype=int),
    )


def laplacian_density(grid: PotentialGrid) -> DensityField:
    """-(1/2π)·(5-point Laplacian of U) on interior points."""
    values = grid.values
    if values.shape[0] < 3 or values.shape[1] < 3:
        raise DomainError("Laplacian needs a grid of at least 3×3 points.")
    h = grid.step
    laplacian = (
        values[2:, 1:-1] + values[:-2, 1:-1] + values[1:-1, 2:] + values[1:-1, :-2] - 4.0 * values[1:-1, 1:-1]
    ) / h ** 2
    return DensityField(
        xs=grid.xs[1:-1],
        ys=grid.ys[1:-1],
        density=-laplacian / (2 * math.pi),
        step=h,
    )


def smallest_singular_value(matrix):
    array = _as_array(matrix)
    try:
        return float(linalg.svdvals(array, check_finite=False)[-1])
    except linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"SVD failed: {exc}")


def tail_indicator(matrix, B):
    """Whether s_n(matrix) <= n^(-B)."""
    array = _as_array(matrix)
    return smallest_singular_value(array) <= float(array.shape[0]) ** (-B)


def _descending_singular_values(source):
    if isinstance(source, SymmetrizedSpectrum):
        return source.positive_half()
    return np.sort(np.abs(np.asarray(source, dtype=float)))[::-1]


def _check_gamma(gamma):
    if not GAMMA_LOWER < gamma < 1.0:
        raise DomainError("gamma must lie in (8/15, 1).")


def _profile_from_values(values, gamma):
    n = values.size
    j_max = int(math.floor(n - n ** gamma))
    if j_max < 1:
        return ProfileCheck(c=math.inf, argmin=None, j_max=j_max, n=n, gamma=gamma)
    j = np.arange(1, j_max + 1)
    ratios = values[:j_max] * n / (n - j)
    index = int(np.argmin(ratios))
    return ProfileCheck(c=float(ratios[index]), argmin=index + 1, j_max=j_max, n=n, gamma=gamma)


def sv_profile_check(matrix, gamma) -> ProfileCheck:
    """
    Largest c such that s_j >= c·(n-j)/n for every j <= n - n^gamma, with
    the index where it is attained.
    """
    _check_gamma(gamma)
    array = _as_array(matrix)
    try:
        values = linalg.svdvals(array, check_finite=False)
    except linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"SVD failed: {exc}")
    return _profile_from_values(values, gamma)


def quantile_floor_check(sym_spectrum, delta, m, C=1.0):
    """s_k > delta with k = floor(n(1 - C·delta^(1/(m+1))))."""
    if delta <= 0:
        raise DomainError("delta must be positive.")
    values = _descending_singular_values(sym_spectrum)
    n = values.size
    k = int(math.floor(n * (1.0 - C * delta ** (1.0 / (m + 1)))))
    if not 1 <= k <= n:
        raise CheckSkipped(f"Quantile index k={k} outside 1..{n} for delta={delta}, C={C}.")
    return bool(values[k - 1] > delta)


def log_integrability_tail(sym_spectrum, t):
    """
    (1/n)·Σ |ln s_i²| and whether it exceeds t. A zero singular value gives
    an infinite integral.
    """
    if t <= 0:
        raise DomainError("t must be positive.")
    squares = _descending_singular_values(sym_spectrum) ** 2
    if squares.size == 0:
        raise DomainError("Log-integrability needs a nonempty spectrum.")
    if np.any(squares == 0):
        return math.inf, True
    value = float(np.mean(np.abs(np.log(squares))))
    return value, value > t


def log_tail_split(singular_values, delta):
    """
    (1/n)·Σ |ln x| over the squared singular values split into
    x < delta, delta <= x <= 1/delta and x > 1/delta.
    """
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1).")
    squares = _descending_singular_values(singular_values) ** 2
    n = squares.size
    with np.errstate(divide='ignore'):
        logs = np.abs(np.log(squares))
    low = squares < delta
    high = squares > 1.0 / delta
    middle = ~(low | high)
    return tuple(float(np.sum(logs[mask])) / n for mask in (low, middle, high))


def _perturbed_last_factor(factors, z):
    """
    A_m + M_n with M_n = -z·(A_1···A_{m-1})^(-1) on the normalized factors,
    and ‖M_n‖. None when the prefix product is singular.
    """
    blocks = [factor.scaled() for factor in factors]
    prefix = reduce(np.matmul, blocks[:-1])
    prefix_values = linalg.svdvals(prefix, check_finite=False)
    if prefix_values[-1] <= _zero_floor(prefix_values):
        return None, math.inf
    try:
        inverse = linalg.inv(prefix, check_finite=False)
    except linalg.LinAlgError:
        return None, math.inf
    return blocks[-1] - complex(z) * inverse, abs(complex(z)) / float(prefix_values[-1])


def tail_trial(spec, diag: TailDiagnostics, trial_index, z):
    """One trial of the smallest singular value study; singular prefixes are resampled."""
    for attempt in range(MAX_RESAMPLES + 1):
        stream = PRIMARY_STREAM if attempt == 0 else RESAMPLE_STREAM + attempt - 1
        matrix, norm = _perturbed_last_factor(sample_factors(spec, trial_index, stream=stream), z)
        if matrix is not None:
            break
        logger.debug("trial %d: singular prefix product, resampling", trial_index)
    else:
        raise ContractError(f"Prefix product stayed singular after {MAX_RESAMPLES} resamples.")

    try:
        values = linalg.svdvals(matrix, check_finite=False)
    except linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"SVD failed: {exc}")
    smallest = float(values[-1])
    return TailTrial(
        smallest=smallest,
        indicator=smallest <= diag.threshold(spec.n),
        perturbation_norm=norm,
        profile_c=_profile_from_values(values, diag.gamma).c,
        resampled=attempt,
    )


def smallest_sv_tail(spec, diag: TailDiagnostics, trials, z=0.5, n_ladder=DEFAULT_LADDER, executor=None) -> TailReport:
    """
    Frequency of s_n(A_m + M_n) <= n^(-B) for each n of the ladder, with
    Clopper-Pearson intervals and a check that the frequency does not
    increase significantly with n.
    """
    if trials < 1:
        raise DomainError("smallest_sv_tail needs at least one trial.")
    if trials < 100:
        logger.info("only %d trials per size; tail frequencies are indicative", trials)
    executor = executor or TrialExecutor()
    levels = []
    for n in n_ladder:
        level_spec = spec.with_changes(n=int(n))
        batch = executor.run(lambda trial: tail_trial(level_spec, diag, trial, z), range(trials))
        results = batch.values
        if not results:
            raise ConvergenceFailure(f"Every tail trial failed at n={n}.", residuals=batch.failures)
        count = sum(trial.indicator for trial in results)
        levels.append(TailLevel(
            n=int(n),
            threshold=diag.threshold(n),
            trials=len(results),
            count=int(count),
            frequency=count / len(results),
            interval=(),
            resampled=sum(trial.resampled for trial in results),
            norm_bound=diag.norm_bound(n),
            norm_exceedances=sum(trial.perturbation_norm > diag.norm_bound(n) for trial in results),
            median_smallest=float(np.median([trial.smallest for trial in results])),
            min_profile_c=min(trial.profile_c for trial in results),
            excluded=batch.failures,
        ))
        logger.info("n=%d: %d of %d trials below n^-%g", n, count, len(results), diag.B)

    non_increasing, intervals = _ladder_intervals(levels)
    for level, interval in zip(levels, intervals):
        level.interval = interval
    return TailReport(z=complex(z), diagnostics=diag, levels=levels, non_increasing=non_increasing)


def _ladder_intervals(levels):
    if len({level.trials for level in levels}) == 1:
        return non_increasing_frequencies([level.count for level in levels], levels[0].trials)
    # Sizes lost different numbers of trials; compare interval by interval.
    intervals = [non_increasing_frequencies([level.count], level.trials)[1][0] for level in levels]
    return all(low <= high for (_, high), (low, _) in zip(intervals, intervals[1:])), intervals


def export_potential_csv(path, grid: PotentialGrid):
    return write_csv(path, POTENTIAL_HEADER, grid.rows())


def export_density_csv(path, field: DensityField):
    return write_csv(path, DENSITY_HEADER, field.rows())


def export_tail_report(path, report: TailReport):
    return write_json(path, report.as_dict())
