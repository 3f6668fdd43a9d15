import numpy as np

from ensemble.Interface.EntryDistributionInterface import EntryDistributionInterface


class RademacherStrategy(EntryDistributionInterface):
    """
    Sign-flip mixture: x is uniform on {-1, +1}; y = x with probability
    (1+rho)/2 and y = -x otherwise, so E xy = rho.
    """

    name = 'rademacher'

    def sample_pairs(self, rho, rng, size):
        x = self.sample_diagonal(rng, size)
        agree = rng.random(size) < (1.0 + rho) / 2.0
        y = np.where(agree, x, -x)
        return x, y

    def sample_diagonal(self, rng, size):
        return np.where(rng.random(size) < 0.5, -1.0, 1.0)

    def tail_second_moment(self, level):
        return 1.0 if abs(level) <= 1.0 else 0.0
