"""
Generation, truncation and interpolation of elliptic random matrices.

Every sampler takes an explicit generator; `trial_rng` derives one
counter-based stream per (master_seed, trial, factor) so trials can run in
any order and on any number of workers.
"""
import logging
import math

import numpy as np

from core.exception import ContractError, DimensionMismatch, DomainError
from core.utils import write_csv
from ensemble.DistributionStrategy.GaussianStrategy import GaussianStrategy
from ensemble.DistributionStrategy.HeavyTailStrategy import HeavyTailStrategy
from ensemble.DistributionStrategy.RademacherStrategy import RademacherStrategy
from ensemble.Interface.EntryDistributionInterface import EntryDistributionInterface
from ensemble.models import EntryDist, EntryDistKind, RealMatrix

logger = logging.getLogger(__name__)

# Stream tags separating the ensemble's own entries from the Gaussian
# companion used by the interpolation sweep.
PRIMARY_STREAM = 0
COMPANION_STREAM = 1


def get_distribution_strategy(dist: EntryDist) -> EntryDistributionInterface:
    if dist.kind == EntryDistKind.GAUSSIAN:
        return GaussianStrategy()
    if dist.kind == EntryDistKind.RADEMACHER:
        return RademacherStrategy()
    return HeavyTailStrategy(dist.exponent)


def trial_rng(master_seed, trial_index, factor_index, stream=PRIMARY_STREAM):
    """Philox stream keyed by (master_seed, trial, factor, stream)."""
    seed_sequence = np.random.SeedSequence(
        entropy=int(master_seed),
        spawn_key=(int(trial_index), int(factor_index), int(stream)),
    )
    return np.random.Generator(np.random.Philox(seed_sequence))


def _check_rho(rho):
    if not -1.0 <= rho <= 1.0:
        raise DomainError(f"Correlation rho={rho} violates |rho| <= 1.")


def sample_correlated_pairs(rho, dist: EntryDist, rng, size):
    """Vectorized pair sampler: `size` independent pairs with E xy = rho."""
    _check_rho(rho)
    return get_distribution_strategy(dist).sample_pairs(rho, rng, size)


def sample_correlated_pair(rho, dist: EntryDist, rng):
    """One pair (x, y) with zero means, unit variances and correlation rho."""
    x, y = sample_correlated_pairs(rho, dist, rng, 1)
    return float(x[0]), float(y[0])


def sample_elliptic_matrix(spec, factor_index, rng) -> RealMatrix:
    """
    Raw (unscaled) elliptic factor: (X_jk, X_kj) pairs for j < k drawn with
    correlation spec.rho, diagonal entries independent.
    """
    if not 1 <= factor_index <= spec.m:
        raise DomainError(f"factor_index must lie in 1..{spec.m}, got {factor_index}.")
    strategy = get_distribution_strategy(spec.entry_dist)
    n = spec.n
    upper_rows, upper_cols = np.triu_indices(n, 1)
    x, y = strategy.sample_pairs(spec.rho, rng, upper_rows.size)
    entries = np.empty((n, n), dtype=float)
    entries[upper_rows, upper_cols] = x
    entries[upper_cols, upper_rows] = y
    entries[np.diag_indices(n)] = strategy.sample_diagonal(rng, n)
    return RealMatrix(entries)


def sample_factors(spec, trial_index, stream=PRIMARY_STREAM):
    """All m raw factors of one trial, each on its own stream."""
    return [
        sample_elliptic_matrix(spec, q, trial_rng(spec.master_seed, trial_index, q, stream))
        for q in range(1, spec.m + 1)
    ]


def sample_gaussian_companion(spec, trial_index):
    """Gaussian factors with the same n, m and rho on an independent stream."""
    gaussian_spec = spec.with_changes(entry_dist=EntryDist(EntryDistKind.GAUSSIAN), truncation=None)
    return sample_factors(gaussian_spec, trial_index, stream=COMPANION_STREAM)


def truncate_and_center(matrix: RealMatrix, c, tau_n, mean=None) -> RealMatrix:
    """
    Zero every entry with |X_jk| > c·tau_n·sqrt(n), then subtract the mean of
    the truncated variable: the empirical mean of the truncated matrix by
    default, or the given analytic `mean`. Output entries are bounded by
    2·c·tau_n·sqrt(n).
    """
    if not matrix.is_raw:
        raise ContractError("truncate_and_center expects raw entries (scale = 1).")
    if c <= 0 or tau_n <= 0:
        raise DomainError("Truncation needs c > 0 and tau_n > 0.")
    threshold = c * tau_n * math.sqrt(matrix.rows)
    truncated = np.where(np.abs(matrix.entries) <= threshold, matrix.entries, 0.0)
    removed = int(truncated.size - np.count_nonzero(np.abs(matrix.entries) <= threshold))
    if removed:
        logger.debug("truncation removed %d entries above %.4g", removed, threshold)
    shift = truncated.mean() if mean is None else float(mean)
    return RealMatrix(truncated - shift)


def _check_raw_family(matrices):
    if not matrices:
        raise DomainError("At least one matrix is required.")
    n = matrices[0].rows
    for matrix in matrices:
        if matrix.rows != n or matrix.cols != n:
            raise DimensionMismatch("All matrices must be n×n with the same n.")
        if not matrix.is_raw:
            raise ContractError("Tail functionals are defined on raw entries (scale = 1).")
    return n


def lindeberg_ratio(matrices, tau):
    """max over matrices of (1/n²)·Σ X_ij²·1(|X_ij| >= tau·sqrt(n))."""
    n = _check_raw_family(matrices)
    level = tau * math.sqrt(n)
    return max(
        float(np.sum(np.where(np.abs(m.entries) >= level, m.entries ** 2, 0.0))) / n ** 2
        for m in matrices
    )


def expected_lindeberg_ratio(dist: EntryDist, n, tau):
    """E X²·1(|X| >= tau·sqrt(n)) for the entry law: the population value of lindeberg_ratio."""
    if tau <= 0:
        raise DomainError("tau must be positive.")
    return get_distribution_strategy(dist).tail_second_moment(tau * math.sqrt(n))


def ui_ratio(matrices, level):
    """max over matrices of (1/n²)·Σ X_ij²·1(|X_ij| > level): the uniform-integrability functional."""
    n = _check_raw_family(matrices)
    return max(
        float(np.sum(np.where(np.abs(m.entries) > level, m.entries ** 2, 0.0))) / n ** 2
        for m in matrices
    )


def interpolate(x_matrix: RealMatrix, y_matrix: RealMatrix, phi) -> RealMatrix:
    """Entrywise Z = X·cos(phi) + Y·sin(phi), phi in [0, pi/2]."""
    if x_matrix.entries.shape != y_matrix.entries.shape:
        raise DimensionMismatch("Interpolated matrices must have the same shape.")
    if x_matrix.scale != y_matrix.scale:
        raise ContractError("Interpolated matrices must share the same scale.")
    if not 0.0 <= phi <= math.pi / 2:
        raise DomainError("phi must lie in [0, pi/2].")
    # Exact endpoints: cos(pi/2) is not exactly zero in floating point.
    if phi == 0.0:
        return RealMatrix(x_matrix.entries.copy(), x_matrix.scale)
    if phi == math.pi / 2:
        return RealMatrix(y_matrix.entries.copy(), y_matrix.scale)
    return RealMatrix(
        x_matrix.entries * math.cos(phi) + y_matrix.entries * math.sin(phi),
        x_matrix.scale,
    )


def export_matrix_csv(path, matrix: RealMatrix):
    """Row-major CSV with header "i,j,value" (1-based indices)."""
    n_rows, n_cols = matrix.entries.shape
    rows = (
        (i + 1, j + 1, matrix.entries[i, j])
        for i in range(n_rows)
        for j in range(n_cols)
    )
    return write_csv(path, ['i', 'j', 'value'], rows)
