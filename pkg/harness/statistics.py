"""
Goodness-of-fit statistics and small regression helpers used by the
experiments.
"""
import math

import numpy as np
from scipy import stats

from core.exception import DomainError


def _nonempty(sample):
    sample = np.asarray(sample, dtype=float)
    if sample.size == 0:
        raise DomainError("Statistic needs a nonempty sample.")
    return sample


def ks_distance(sample, cdf):
    """sup_x |F_N(x) - F(x)| for a continuous target CDF."""
    return float(stats.kstest(_nonempty(sample), cdf).statistic)


def kuiper_statistic(angles):
    """
    Kuiper's V = D+ + D- of angles in [0, 2π) against the uniform law on
    the circle. Invariant under rotation of the sample, in [0, 2].
    """
    u = np.sort(np.mod(_nonempty(angles), 2 * math.pi) / (2 * math.pi))
    size = u.size
    d_plus = np.max(np.arange(1, size + 1) / size - u)
    d_minus = np.max(u - np.arange(size) / size)
    return float(d_plus + d_minus)


def two_sample_ks(first, second):
    return float(stats.ks_2samp(_nonempty(first), _nonempty(second)).statistic)


def binomial_interval(successes, trials, level=0.95):
    """Clopper-Pearson interval for a tail frequency."""
    if trials < 1:
        raise DomainError("Binomial interval needs at least one trial.")
    interval = stats.binomtest(int(successes), int(trials)).proportion_ci(confidence_level=level, method='exact')
    return float(interval.low), float(interval.high)


def mean_interval(values, level=0.95):
    """Mean with a Student-t half width; zero width for a single value."""
    values = _nonempty(values)
    mean = float(np.mean(values))
    if values.size < 2:
        return mean, 0.0
    half_width = stats.t.ppf(0.5 + level / 2, values.size - 1) * stats.sem(values)
    return mean, float(half_width)


def loglog_slope(xs, ys):
    """Least-squares slope of log y against log x, with its standard error."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if xs.size < 2 or np.any(xs <= 0) or np.any(ys <= 0):
        raise DomainError("Log-log fit needs at least two positive points.")
    fit = stats.linregress(np.log(xs), np.log(ys))
    return float(fit.slope), float(fit.stderr)


def non_increasing_frequencies(counts, trials, level=0.95):
    """
    No statistically significant increase between consecutive frequencies:
    each lower bound stays below the previous upper bound.
    """
    intervals = [binomial_interval(k, trials, level) for k in counts]
    return all(low <= previous_high for (_, previous_high), (low, _) in zip(intervals, intervals[1:])), intervals
