import math

import numpy as np

from ensemble.Interface.EntryDistributionInterface import EntryDistributionInterface


class HeavyTailStrategy(EntryDistributionInterface):
    """
    Symmetrized Pareto law with tail index `exponent` > 2, standardized to
    variance 1: |X| = U^(-1/exponent) / sqrt(exponent / (exponent - 2)) with a
    fair random sign.

    Pairs use a mixture coupling: with probability |rho| the partner is
    sign(rho)·x, otherwise an independent draw. Marginals stay exact and
    E xy = rho.
    """

    name = 'heavy_tail'

    def __init__(self, exponent):
        self.exponent = float(exponent)
        self._std = math.sqrt(self.exponent / (self.exponent - 2.0))

    def sample_diagonal(self, rng, size):
        # 1 - U lies in (0, 1], so the power never divides by zero.
        magnitude = (1.0 - rng.random(size)) ** (-1.0 / self.exponent)
        sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
        return sign * magnitude / self._std

    def sample_pairs(self, rho, rng, size):
        x = self.sample_diagonal(rng, size)
        fresh = self.sample_diagonal(rng, size)
        coupled = rng.random(size) < abs(rho)
        y = np.where(coupled, math.copysign(1.0, rho) * x, fresh)
        return x, y

    def tail_second_moment(self, level):
        # |X|·std is Pareto on [1, inf): the tail beyond y carries y^(2 - exponent).
        scaled = abs(float(level)) * self._std
        if scaled <= 1.0:
            return 1.0
        return scaled ** (2.0 - self.exponent)
