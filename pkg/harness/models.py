"""
Experiment configuration and report models.

A report depends only on the configuration and its master seed; wall-clock
timings are kept out of it.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from core.exception import DomainError
from ensemble.models import EnsembleSpec, EntryDist
from potential.models import PotentialGridSpec, TailDiagnostics


class CheckName:
    LIMIT_LAW = 'limit_law'
    ELLIPTIC_LAW = 'elliptic_law'
    RHO_INDEPENDENCE = 'rho_independence'
    ENTRY_UNIVERSALITY = 'entry_universality'
    LINEARIZATION = 'linearization'
    STIELTJES = 'stieltjes'
    FORM_DISCRIMINATION = 'form_discrimination'
    POTENTIAL = 'potential'
    SAFEGUARDS = 'safeguards'
    APPENDIX = 'appendix'
    UNIVERSALITY = 'universality'
    TRUNCATION = 'truncation'

    CHOICES = (
        LIMIT_LAW, ELLIPTIC_LAW, RHO_INDEPENDENCE, ENTRY_UNIVERSALITY, LINEARIZATION, STIELTJES,
        FORM_DISCRIMINATION, POTENTIAL, SAFEGUARDS, APPENDIX, UNIVERSALITY, TRUNCATION,
    )


DEFAULT_ALPHA_GRID = (1j, 0.5 + 1j, -0.5 + 1j, 1.0 + 2j)
DEFAULT_PHI_LIST = (0.0, math.pi / 4, math.pi / 2)


@dataclass(frozen=True)
class ExperimentConfig:
    ensemble: EnsembleSpec
    trials: int = 20
    z_list: tuple = (0.5 + 0.2j,)
    alpha_grid: tuple = DEFAULT_ALPHA_GRID
    phi_list: tuple = DEFAULT_PHI_LIST
    n_ladder: tuple = (64, 128, 256)
    checks: tuple = CheckName.CHOICES
    eps: float = 0.01
    x_points: int = 801
    x_range: float = 4.0
    discrimination_n: int = 512
    potential_grid: PotentialGridSpec = field(default_factory=PotentialGridSpec)
    potential_trials: int = 40
    diagnostics: TailDiagnostics = field(default_factory=TailDiagnostics)
    tail_trials: int = 500
    appendix_ladder: tuple = (32, 64, 128, 256)
    appendix_trials: int = 200
    appendix_v: float = 2.0
    partial_range: tuple = (1, 2)
    truncation_dist: Optional[EntryDist] = None

    def __post_init__(self):
        if self.trials < 1:
            raise DomainError("trials must be at least 1.")
        if any(complex(alpha).imag <= 0 for alpha in self.alpha_grid):
            raise DomainError("Every alpha must have a positive imaginary part.")
        if any(not 0.0 <= phi <= math.pi / 2 for phi in self.phi_list):
            raise DomainError("phi values must lie in [0, pi/2].")
        unknown = set(self.checks) - set(CheckName.CHOICES)
        if unknown:
            raise DomainError(f"Unknown checks: {sorted(unknown)}.")
        a, b = self.partial_range
        if not 1 <= a <= b <= self.ensemble.m:
            raise DomainError(f"partial_range must satisfy 1 <= a <= b <= {self.ensemble.m}.")
        if self.eps <= 0 or self.appendix_v <= 0:
            raise DomainError("eps and appendix_v must be positive.")

    def enabled(self, name):
        return name in self.checks

    def x_grid(self):
        return np.linspace(-self.x_range, self.x_range, self.x_points)

    def with_changes(self, **changes):
        data = {name: getattr(self, name) for name in self.__dataclass_fields__}
        data.update(changes)
        return ExperimentConfig(**data)

    def as_dict(self):
        return {
            'ensemble': self.ensemble.as_dict(),
            'trials': self.trials,
            'z_list': list(self.z_list),
            'alpha_grid': list(self.alpha_grid),
            'phi_list': list(self.phi_list),
            'n_ladder': list(self.n_ladder),
            'checks': list(self.checks),
            'eps': self.eps,
            'x_points': self.x_points,
            'x_range': self.x_range,
            'discrimination_n': self.discrimination_n,
            'potential_grid': self.potential_grid.as_dict(),
            'potential_trials': self.potential_trials,
            'diagnostics': self.diagnostics.as_dict(),
            'tail_trials': self.tail_trials,
            'appendix_ladder': list(self.appendix_ladder),
            'appendix_trials': self.appendix_trials,
            'appendix_v': self.appendix_v,
            'partial_range': list(self.partial_range),
            'truncation_dist': self.truncation_dist.as_dict() if self.truncation_dist else None,
        }


@dataclass
class CheckResult:
    """One acceptance assertion: statistic against threshold at a sample size."""
    name: str
    passed: bool
    statistic: float
    threshold: float
    sample_size: int
    detail: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            'passed': self.passed,
            'statistic': self.statistic,
            'threshold': self.threshold,
            'sample_size': self.sample_size,
            'detail': self.detail,
        }


@dataclass
class ExperimentReport:
    kind: str
    config_hash: str
    master_seed: int
    summary: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    excluded: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(check.passed for check in self.checks)

    def add_check(self, name, passed, statistic, threshold, sample_size, **detail):
        check = CheckResult(
            name=name,
            passed=bool(passed),
            statistic=statistic,
            threshold=threshold,
            sample_size=int(sample_size),
            detail=detail,
        )
        self.checks.append(check)
        return check

    def check(self, name) -> Optional[CheckResult]:
        return next((check for check in self.checks if check.name == name), None)

    def merge(self, other, prefix):
        """Fold another report in, namespacing its summary and checks."""
        self.summary[prefix] = other.summary
        for check in other.checks:
            check.name = f"{prefix}.{check.name}"
            self.checks.append(check)
        for key, value in other.excluded.items():
            self.excluded[f"{prefix}.{key}"] = value
        for key, value in other.skipped.items():
            self.skipped[f"{prefix}.{key}"] = value
        for key, value in other.tables.items():
            self.tables[f"{prefix}.{key}"] = value

    def as_dict(self):
        return {
            'kind': self.kind,
            'config_hash': self.config_hash,
            'master_seed': self.master_seed,
            'passed': self.passed,
            'summary': self.summary,
            'checks': {check.name: check.as_dict() for check in self.checks},
            'excluded': self.excluded,
            'skipped': self.skipped,
        }
