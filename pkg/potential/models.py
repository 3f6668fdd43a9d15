"""
Domain models for logarithmic potentials and the singular value
diagnostics of the product.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from core.exception import DomainError

GAMMA_LOWER = 8.0 / 15.0


@dataclass(frozen=True)
class PotentialValue:
    """
    U_n at a single point. `eigenvalue_hit` is set when the smallest shifted
    singular value lies within n·eps·max(s_1, 1) of zero; `value` is then +inf.
    """
    value: float
    eigenvalue_hit: bool = False

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class PotentialGridSpec:
    """Rectangular grid [x_min, x_max] × [y_min, y_max] with a common step."""
    x_min: float = -1.5
    x_max: float = 1.5
    y_min: float = -1.5
    y_max: float = 1.5
    step: float = 0.05

    def __post_init__(self):
        if self.step <= 0:
            raise DomainError("Grid step must be positive.")
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise DomainError("Grid extents must satisfy min < max.")

    def _axis(self, lower, upper):
        count = int(math.floor((upper - lower) / self.step + 1e-9)) + 1
        return lower + self.step * np.arange(count)

    @property
    def xs(self):
        return self._axis(self.x_min, self.x_max)

    @property
    def ys(self):
        return self._axis(self.y_min, self.y_max)

    def points(self):
        """Complex grid points, shape (len(ys), len(xs))."""
        gx, gy = np.meshgrid(self.xs, self.ys)
        return gx + 1j * gy

    def as_dict(self):
        return {
            'x_min': self.x_min, 'x_max': self.x_max,
            'y_min': self.y_min, 'y_max': self.y_max,
            'step': self.step,
        }


@dataclass(eq=False)
class PotentialGrid:
    """
    Trial-averaged U_n on a grid. `masked` counts, per point, the trials in
    which the point hit an eigenvalue; those trials are left out of the mean
    and variance at that point. Analytic grids carry trials = 0.
    """
    spec: PotentialGridSpec
    values: np.ndarray
    variance: np.ndarray
    masked: np.ndarray
    trials: int = 0
    excluded_trials: dict = field(default_factory=dict)
    method: str = 'analytic'

    @property
    def xs(self):
        return self.spec.xs

    @property
    def ys(self):
        return self.spec.ys

    @property
    def step(self):
        return self.spec.step

    @property
    def shape(self):
        return self.values.shape

    def masked_fraction(self):
        if self.trials == 0:
            return 0.0
        return float(self.masked.sum()) / (self.masked.size * self.trials)

    def rows(self):
        gx, gy = np.meshgrid(self.xs, self.ys)
        return zip(gx.ravel(), gy.ravel(), self.values.ravel(), self.variance.ravel(), self.masked.ravel())


@dataclass(eq=False)
class DensityField:
    """−(1/2π)·ΔU on the interior points of a potential grid."""
    xs: np.ndarray
    ys: np.ndarray
    density: np.ndarray
    step: float

    def points(self):
        gx, gy = np.meshgrid(self.xs, self.ys)
        return gx + 1j * gy

    def mass(self, region=None):
        """Riemann sum of the field, optionally over a boolean mask of points."""
        values = self.density if region is None else np.where(region, self.density, 0.0)
        return float(np.nansum(values)) * self.step ** 2

    def rows(self):
        gx, gy = np.meshgrid(self.xs, self.ys)
        return zip(gx.ravel(), gy.ravel(), self.density.ravel())


@dataclass(frozen=True)
class TailDiagnostics:
    """
    Thresholds of the singular value safeguards.

    B: exponent of the smallest singular value threshold n^(-B).
    gamma: profile range j <= n - n^gamma.
    delta: floor Δ_n used by the quantile and log-tail checks.
    K, Q: bound K·n^Q on the norm of the perturbation M_n.
    C: constant in the quantile index k = floor(n(1 - C·delta^(1/(m+1)))).
    """
    B: float = 2.0
    gamma: float = 0.7
    delta: float = 0.05
    K: float = 10.0
    Q: float = 1.0
    C: float = 1.0

    def __post_init__(self):
        if self.B <= 0:
            raise DomainError("B must be positive.")
        if not GAMMA_LOWER < self.gamma < 1.0:
            raise DomainError("gamma must lie in (8/15, 1).")
        if self.delta <= 0:
            raise DomainError("delta must be positive.")
        if self.K <= 0 or self.C <= 0:
            raise DomainError("K and C must be positive.")

    def threshold(self, n):
        return float(n) ** (-self.B)

    def norm_bound(self, n):
        return self.K * float(n) ** self.Q

    def as_dict(self):
        return {'B': self.B, 'gamma': self.gamma, 'delta': self.delta, 'K': self.K, 'Q': self.Q, 'C': self.C}


@dataclass(frozen=True)
class ProfileCheck:
    """Largest c with s_j >= c(n-j)/n for j <= j_max; c is inf when the range is empty."""
    c: float
    argmin: Optional[int]
    j_max: int
    n: int
    gamma: float

    @property
    def vacuous(self):
        return self.j_max < 1

    def as_dict(self):
        return {'c': self.c, 'argmin': self.argmin, 'j_max': self.j_max, 'n': self.n, 'gamma': self.gamma}


@dataclass(frozen=True)
class TailTrial:
    smallest: float
    indicator: bool
    perturbation_norm: float
    profile_c: float
    resampled: int = 0


@dataclass
class TailLevel:
    """Aggregates of one matrix size."""
    n: int
    threshold: float
    trials: int
    count: int
    frequency: float
    interval: tuple
    resampled: int
    norm_bound: float
    norm_exceedances: int
    median_smallest: float
    min_profile_c: float
    excluded: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            'n': self.n,
            'threshold': self.threshold,
            'trials': self.trials,
            'count': self.count,
            'frequency': self.frequency,
            'interval': list(self.interval),
            'resampled': self.resampled,
            'norm_bound': self.norm_bound,
            'norm_exceedances': self.norm_exceedances,
            'median_smallest': self.median_smallest,
            'min_profile_c': self.min_profile_c,
            'excluded': self.excluded,
        }


@dataclass
class TailReport:
    z: complex
    diagnostics: TailDiagnostics
    levels: list
    non_increasing: bool

    @property
    def frequencies(self):
        return [level.frequency for level in self.levels]

    def as_dict(self):
        return {
            'z': self.z,
            'diagnostics': self.diagnostics.as_dict(),
            'levels': [level.as_dict() for level in self.levels],
            'non_increasing': self.non_increasing,
        }
