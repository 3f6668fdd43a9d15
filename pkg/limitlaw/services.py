"""
Closed-form density, radial CDF and logarithmic potential of the limit law,
with the quadrature oracles the closed forms are checked against.

All evaluators broadcast over numpy arrays and return a plain float for
scalar input.
"""
import logging
import math
from fractions import Fraction

import numpy as np
from scipy import integrate

from core.exception import DomainError
from core.utils import write_csv
from limitlaw.models import EllipticLaw, LimitLaw

logger = logging.getLogger(__name__)


def _unwrap(value):
    value = np.asarray(value)
    return float(value) if value.ndim == 0 else value


def density(law: LimitLaw, x, y):
    """
    g(x, y) = 1/(π·m·(x²+y²)^((m-1)/m)) on the unit disc, 0 outside.
    The origin gives +inf for m >= 2.
    """
    r2 = np.asarray(x, dtype=float) ** 2 + np.asarray(y, dtype=float) ** 2
    exponent = (law.m - 1) / law.m
    with np.errstate(divide='ignore'):
        inside = 1.0 / (math.pi * law.m * np.power(r2, exponent))
    return _unwrap(np.where(r2 <= 1.0, inside, 0.0))


def radial_cdf(law: LimitLaw, r):
    """μ(|w| <= r) = min(r^(2/m), 1)."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("Radius must be non-negative.")
    return _unwrap(np.minimum(np.power(r, 2.0 / law.m), 1.0))


def sample(law: LimitLaw, rng, size=None):
    """
    u^m with u uniform on the unit disc: modulus U^(m/2), angle uniform.
    Returns a complex scalar when `size` is None.
    """
    count = 1 if size is None else size
    modulus = np.power(rng.random(count), law.m / 2.0)
    angle = 2 * math.pi * rng.random(count)
    values = modulus * np.exp(1j * angle)
    return complex(values[0]) if size is None else values


def limit_potential(law: LimitLaw, z):
    """U(z) = (m/2)(1 - |z|^(2/m)) inside the unit disc, -ln|z| outside."""
    modulus = np.abs(np.asarray(z, dtype=complex))
    with np.errstate(divide='ignore'):
        outside = -np.log(np.where(modulus > 1.0, modulus, 1.0))
    inside = 0.5 * law.m * (1.0 - np.power(modulus, 2.0 / law.m))
    return _unwrap(np.where(modulus <= 1.0, inside, outside))


def fuss_catalan_moment(m, p):
    """binomial((m+1)p, p)/(mp+1) as an exact rational."""
    if p < 0:
        raise DomainError("Moment order p must be non-negative.")
    if m < 1:
        raise DomainError("Fuss-Catalan moments need m >= 1.")
    return Fraction(math.comb((m + 1) * p, p), m * p + 1)


def support_edge(m):
    """Right end of the symmetrized singular value support at z = 0."""
    return (m + 1) ** ((m + 1) / 2) / m ** (m / 2)


def quadrature_disc_mass(law: LimitLaw, r):
    """∬ g over the disc of radius r by adaptive 2-D quadrature in polar coordinates."""
    r = min(float(r), 1.0)
    if r <= 0:
        return 0.0
    mass, _ = integrate.dblquad(
        lambda s, theta: s * density(law, s, 0.0),
        0.0, 2 * math.pi,
        0.0, r,
        epsabs=1e-11, epsrel=1e-11,
    )
    return mass


def quadrature_potential(law: LimitLaw, z):
    """
    U(z) = -∫_0^1 ln max(|z|, t) dF(t) with F the radial CDF, by adaptive
    quadrature split at |z|.
    """
    modulus = abs(complex(z))

    def radial_density(t):
        return (2.0 / law.m) * t ** (2.0 / law.m - 1.0)

    if modulus >= 1.0:
        return -math.log(modulus)
    outer, _ = integrate.quad(lambda t: math.log(t) * radial_density(t), modulus, 1.0, epsabs=1e-12)
    if modulus == 0.0:
        return -outer
    inner, _ = integrate.quad(radial_density, 0.0, modulus, epsabs=1e-12)
    return -(inner * math.log(modulus) + outer)


def elliptic_density(law: EllipticLaw, x, y):
    a, b = law.semi_axes
    inside = (np.asarray(x, dtype=float) / a) ** 2 + (np.asarray(y, dtype=float) / b) ** 2 <= 1.0
    return _unwrap(np.where(inside, 1.0 / (math.pi * a * b), 0.0))


def elliptic_sample(law: EllipticLaw, rng, size):
    a, b = law.semi_axes
    disc = sample(LimitLaw(1), rng, size)
    return a * disc.real + 1j * b * disc.imag


def to_unit_disc(law: EllipticLaw, values):
    """(x, y) -> (x/(1+rho), y/(1-rho)); maps the elliptic law onto the uniform disc."""
    a, b = law.semi_axes
    values = np.asarray(values, dtype=complex)
    return values.real / a + 1j * values.imag / b


GRID_QUANTITIES = ('density', 'radial_cdf', 'potential')


def evaluate_grid(law: LimitLaw, quantity, xs, ys):
    """Rows (x, y, value) over the Cartesian grid xs × ys, x varying fastest."""
    if quantity not in GRID_QUANTITIES:
        raise DomainError(f"Unknown grid quantity '{quantity}'.")
    gx, gy = np.meshgrid(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
    if quantity == 'density':
        values = density(law, gx, gy)
    elif quantity == 'radial_cdf':
        values = radial_cdf(law, np.hypot(gx, gy))
    else:
        values = limit_potential(law, gx + 1j * gy)
    return list(zip(gx.ravel(), gy.ravel(), np.asarray(values).ravel()))


def export_grid_csv(path, rows):
    return write_csv(path, ['x', 'y', 'value'], rows)
