"""
Domain models for the Stieltjes transform solver.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid

from core.exception import DomainError


class SystemForm:
    THEOREM = 'theorem'
    STATEMENT = 'statement'

    CHOICES = (THEOREM, STATEMENT)


@dataclass(frozen=True)
class StieltjesQuery:
    """A spectral parameter α = u + iv (v > 0), a shift z and a system form."""
    alpha: complex
    z: complex
    m: int = 2
    form: str = SystemForm.STATEMENT

    def __post_init__(self):
        object.__setattr__(self, 'alpha', complex(self.alpha))
        object.__setattr__(self, 'z', complex(self.z))
        if self.alpha.imag <= 0:
            raise DomainError("Stieltjes queries need Im(alpha) > 0.")
        if self.m < 2:
            raise DomainError("Number of factors m must be at least 2.")
        if self.form not in SystemForm.CHOICES:
            raise DomainError(f"Unknown system form '{self.form}'.")

    @property
    def v(self):
        return self.alpha.imag

    def as_dict(self):
        return {'alpha': self.alpha, 'z': self.z, 'm': self.m, 'form': self.form}


@dataclass(frozen=True)
class StieltjesSolution:
    s: complex
    w: complex
    residuals: tuple
    iterations: int
    branch_ok: bool
    query: Optional[StieltjesQuery] = None

    @property
    def residual(self):
        return max(self.residuals)

    def as_dict(self):
        return {
            's': self.s,
            'w': self.w,
            'residuals': list(self.residuals),
            'iterations': self.iterations,
            'branch_ok': self.branch_ok,
        }


@dataclass(eq=False)
class DensityProfile:
    """
    Density (1/π)·Im s(x + iε, z) on a grid, with the solver state per point.
    Points where the solver failed carry NaN and are listed in `failures`.
    """
    x: np.ndarray
    eps: float
    z: complex
    m: int
    form: str
    density: np.ndarray
    s: np.ndarray
    w: np.ndarray
    iterations: np.ndarray
    residuals: np.ndarray
    failures: list = field(default_factory=list)

    @property
    def finite_density(self):
        return np.nan_to_num(self.density, nan=0.0)

    def total_mass(self):
        return float(trapezoid(self.finite_density, self.x))

    def rows(self):
        for i, x in enumerate(self.x):
            yield (
                x, self.eps, self.density[i], self.s[i].real, self.s[i].imag,
                self.w[i].real, self.w[i].imag, int(self.iterations[i]), self.residuals[i],
            )


@dataclass
class FormDiscriminationReport:
    z: complex
    m: int
    distances: dict
    per_trial: dict
    winner: Optional[str]
    margin: float
    insufficient_resolution: bool
    failures: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            'z': self.z,
            'm': self.m,
            'distances': self.distances,
            'per_trial': self.per_trial,
            'winner': self.winner,
            'margin': self.margin,
            'insufficient_resolution': self.insufficient_resolution,
            'failures': self.failures,
        }
