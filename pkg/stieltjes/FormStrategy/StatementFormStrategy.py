import numpy as np

from stieltjes.Interface.SystemFormInterface import SystemFormInterface


class StatementFormStrategy(SystemFormInterface):
    """
    1 + w·s + (-1)^(m+1)·w^(m-1)·s^(m+1) = 0,
    s·t² + t - s·|z|² = 0.
    """

    name = 'statement'

    def w_power(self, m):
        return m - 1

    def roots(self, s, z2):
        root = np.sqrt(1.0 + 4.0 * s * s * z2)
        small = 2.0 * s * z2 / (1.0 + root)
        large = -(1.0 + root) / (2.0 * s)
        return small, large

    def quadratic_terms(self, s, t, z2):
        return s * t * t, t, -s * z2

    def s_fraction(self, z2):
        # s = u / (1 - |z|²u²)
        return np.array([0.0, 1.0]), np.array([1.0, 0.0, -z2])

    def u_of(self, s, t):
        return s / (1.0 + s * t)
