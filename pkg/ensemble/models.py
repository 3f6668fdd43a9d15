"""
Domain models for elliptic ensembles.

Nothing here is persisted; the models are plain dataclasses carrying the
invariants of an ensemble description and of a sampled matrix.
"""
import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from core.exception import ContractError, DomainError


class EntryDistKind:
    GAUSSIAN = 'gaussian'
    RADEMACHER = 'rademacher'
    HEAVY_TAIL = 'heavy_tail'

    CHOICES = (GAUSSIAN, RADEMACHER, HEAVY_TAIL)


@dataclass(frozen=True)
class EntryDist:
    """
    Law of a single entry. `exponent` is the Pareto tail index of the
    symmetrized heavy-tailed law and must exceed 2 so that the variance exists.
    """
    kind: str = EntryDistKind.GAUSSIAN
    exponent: Optional[float] = None

    def __post_init__(self):
        if self.kind not in EntryDistKind.CHOICES:
            raise DomainError(f"Unknown entry distribution '{self.kind}'.")
        if self.kind == EntryDistKind.HEAVY_TAIL:
            if self.exponent is None or self.exponent <= 2:
                raise DomainError("Heavy-tail exponent must be greater than 2.")
        elif self.exponent is not None:
            raise DomainError(f"Entry distribution '{self.kind}' takes no exponent.")

    def as_dict(self):
        data = {'kind': self.kind}
        if self.exponent is not None:
            data['exponent'] = self.exponent
        return data


@dataclass(frozen=True)
class Truncation:
    """Truncation level c·τ_n·√n with τ_n = n^(-tau_exponent)."""
    c: float = 1.0
    tau_exponent: float = 0.125

    def __post_init__(self):
        if self.c <= 0:
            raise DomainError("Truncation constant c must be positive.")
        if not 0 < self.tau_exponent < 0.5:
            raise DomainError("tau_exponent must lie in (0, 1/2) so that tau_n -> 0 and tau_n*sqrt(n) -> inf.")

    def tau_n(self, n):
        return float(n) ** (-self.tau_exponent)

    def threshold(self, n):
        return self.c * self.tau_n(n) * math.sqrt(n)


@dataclass(frozen=True)
class EnsembleSpec:
    """
    Description of m independent n×n elliptic factors.

    `|rho| = 1` is accepted for generator checks; comparisons against the
    limit law call `require_limit_regime()` which needs `|rho| < 1`.
    """
    n: int
    m: int = 2
    rho: float = 0.0
    entry_dist: EntryDist = field(default_factory=EntryDist)
    truncation: Optional[Truncation] = None
    master_seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("Matrix dimension n must be at least 2.")
        if self.m < 2:
            raise DomainError("Number of factors m must be at least 2.")
        if not -1.0 <= self.rho <= 1.0:
            raise DomainError(f"Correlation rho={self.rho} violates |rho| <= 1.")
        if not 0 <= self.master_seed < 2 ** 64:
            raise DomainError("master_seed must be a 64-bit unsigned integer.")

    def require_limit_regime(self):
        if abs(self.rho) >= 1.0:
            raise DomainError("Limit-law comparisons need |rho| < 1.")
        return self

    def with_changes(self, **changes):
        data = {
            'n': self.n, 'm': self.m, 'rho': self.rho, 'entry_dist': self.entry_dist,
            'truncation': self.truncation, 'master_seed': self.master_seed,
        }
        data.update(changes)
        return EnsembleSpec(**data)

    def as_dict(self):
        return {
            'n': self.n,
            'm': self.m,
            'rho': self.rho,
            'entry_dist': self.entry_dist.as_dict(),
            'truncation': asdict(self.truncation) if self.truncation else None,
            'master_seed': self.master_seed,
        }


RAW_SCALE = 1.0


@dataclass(frozen=True, eq=False)
class RealMatrix:
    """
    Dense real matrix with an explicit scale tag: 1 for raw entries X_jk,
    n^(-1/2) for the normalized factor n^(-1/2)·X.
    """
    entries: np.ndarray
    scale: float = RAW_SCALE

    def __post_init__(self):
        entries = np.ascontiguousarray(self.entries, dtype=float)
        if entries.ndim != 2:
            raise ContractError("RealMatrix entries must be two-dimensional.")
        object.__setattr__(self, 'entries', entries)
        if self.scale != RAW_SCALE and not math.isclose(self.scale, entries.shape[0] ** -0.5):
            raise ContractError("RealMatrix scale must be 1 or n^(-1/2).")

    @property
    def rows(self):
        return self.entries.shape[0]

    @property
    def cols(self):
        return self.entries.shape[1]

    @property
    def is_raw(self):
        return self.scale == RAW_SCALE

    def scaled(self):
        """Entries multiplied by n^(-1/2) when still raw."""
        if self.is_raw:
            return self.entries / math.sqrt(self.rows)
        return self.entries
