import math

from scipy.special import erfc

from ensemble.Interface.EntryDistributionInterface import EntryDistributionInterface


class GaussianStrategy(EntryDistributionInterface):
    """
    Gaussian pairs x = a·ξ + b·η, y = a·ξ - b·η with a = sqrt((1+rho)/2),
    b = sqrt((1-rho)/2) and ξ, η independent standard normals.

    For rho = 1 we get b = 0 and x == y exactly.
    """

    name = 'gaussian'

    def sample_pairs(self, rho, rng, size):
        a = math.sqrt((1.0 + rho) / 2.0)
        b = math.sqrt((1.0 - rho) / 2.0)
        xi = rng.standard_normal(size)
        eta = rng.standard_normal(size)
        return a * xi + b * eta, a * xi - b * eta

    def sample_diagonal(self, rng, size):
        return rng.standard_normal(size)

    def tail_second_moment(self, level):
        level = abs(float(level))
        return float(erfc(level / math.sqrt(2.0))) + level * math.sqrt(2.0 / math.pi) * math.exp(-level * level / 2.0)
