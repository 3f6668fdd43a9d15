"""
Limit laws of the eigenvalue distributions.

LimitLaw(m) is the law of u^m with u uniform on the unit disc; for m = 1
and a single elliptic factor the eigenvalues instead fill the ellipse of
EllipticLaw(rho).
"""
from dataclasses import dataclass

from core.exception import DomainError


@dataclass(frozen=True)
class LimitLaw:
    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"Power index m must be an integer >= 1, got {self.m}.")

    def as_dict(self):
        return {'m': self.m}


@dataclass(frozen=True)
class EllipticLaw:
    """Uniform law on x²/(1+rho)² + y²/(1-rho)² <= 1."""
    rho: float

    def __post_init__(self):
        if not -1.0 < self.rho < 1.0:
            raise DomainError("The elliptic law needs |rho| < 1.")

    @property
    def semi_axes(self):
        return 1.0 + self.rho, 1.0 - self.rho

    def as_dict(self):
        return {'rho': self.rho}
