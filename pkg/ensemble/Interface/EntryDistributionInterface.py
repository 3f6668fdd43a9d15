from abc import ABC, abstractmethod


class EntryDistributionInterface(ABC):
    """
    EntryDistributionInterface - Abstract base class for entry laws of an
    elliptic ensemble.

    Purpose:
    --------
    - Defines how a law draws correlated off-diagonal pairs (X_jk, X_kj) and
      independent diagonal entries, each with mean 0 and variance 1.
    - Lets the matrix generator stay identical for Gaussian, Rademacher and
      heavy-tailed entries (Strategy Pattern).

    Notes for Developers:
    ---------------------
    - Implementations must only use the generator they are given; all
      randomness flows from the per-trial stream so that runs are reproducible.
    - The pair coupling is free as long as E x = E y = 0, E x^2 = E y^2 = 1
      and E xy = rho.
    """

    name = None

    @abstractmethod
    def sample_pairs(self, rho, rng, size):
        """
        Draw `size` independent pairs with correlation `rho`.

        Args:
            rho (float): correlation in [-1, 1].
            rng (numpy.random.Generator): the stream to draw from.
            size (int): number of pairs.

        Returns:
            tuple[numpy.ndarray, numpy.ndarray]: the x and y coordinates.
        """
        raise NotImplementedError("This method should be overridden by subclasses.")

    @abstractmethod
    def sample_diagonal(self, rng, size):
        """Draw `size` independent entries with mean 0 and variance 1."""
        raise NotImplementedError("This method should be overridden by subclasses.")

    @abstractmethod
    def tail_second_moment(self, level):
        """
        E X²·1(|X| >= level) for one standardized entry.

        Args:
            level (float): a non-negative cut-off.

        Returns:
            float: the second moment carried by the tail beyond `level`.
        """
        raise NotImplementedError("This method should be overridden by subclasses.")

    def truncated_mean(self, level):
        """E X·1(|X| <= level). Every law shipped here is symmetric, so this is 0."""
        return 0.0
