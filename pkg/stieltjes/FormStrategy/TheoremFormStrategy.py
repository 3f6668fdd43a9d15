import numpy as np

from stieltjes.Interface.SystemFormInterface import SystemFormInterface


class TheoremFormStrategy(SystemFormInterface):
    """
    1 + w·s + (-1)^(m+1)·w^m·s^(m+1) = 0,
    t² + t - 4·|z|²·s = 0.
    """

    name = 'theorem'

    def w_power(self, m):
        return m

    def roots(self, s, z2):
        root = np.sqrt(1.0 + 16.0 * z2 * s)
        small = 8.0 * z2 * s / (1.0 + root)
        large = -1.0 - small
        return small, large

    def quadratic_terms(self, s, t, z2):
        return t * t, t, -4.0 * z2 * s

    def s_fraction(self, z2):
        # s = u·(1 + |z|²u) / 4
        return np.array([0.0, 0.25, 0.25 * z2]), np.array([1.0])

    def u_of(self, s, t):
        return 4.0 * s / (1.0 + t)
