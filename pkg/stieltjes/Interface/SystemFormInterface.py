from abc import ABC, abstractmethod


class SystemFormInterface(ABC):
    """
    SystemFormInterface - Abstract base class for the two printed versions of
    the self-consistent system for s(α, z).

    Purpose:
    --------
    - Both versions share the first equation
          1 + w·s + (-1)^(m+1)·w^k·s^(m+1) = 0
      and differ in the power k of w and in the quadratic that ties
      t = w - α to s and |z|².
    - The solver only talks to this interface, so either form can be run
      and compared on the same data (Strategy Pattern).

    Methods:
    --------
    - w_power(m): the exponent k in the first equation.
    - roots(s, z2): both roots of the quadratic in t, small root first.
    - quadratic_terms(s, t, z2): the terms of the quadratic, for residuals.
    - s_fraction(z2): s as a ratio N(u)/D(u) of polynomials in u = t/|z|².
    - u_of(s, t): the inverse map, back from a pair (s, t) to u.

    Notes for Developers:
    ---------------------
    - Every method must accept numpy arrays for s, t and u; the solver runs
      a whole grid of spectral parameters at once.
    - The small root must be computed in a cancellation-free way: it is the
      root the fixed-point stage starts from.
    - s_fraction must stay regular at z = 0, where u reduces to a multiple
      of s and the quadratic pins t = 0.
    """

    name = None

    @abstractmethod
    def w_power(self, m):
        raise NotImplementedError("This method should be overridden by subclasses.")

    @abstractmethod
    def roots(self, s, z2):
        """
        Roots of the quadratic in t = w - α.

        Args:
            s (numpy.ndarray): current values of s(α, z).
            z2 (float): |z|².

        Returns:
            tuple[numpy.ndarray, numpy.ndarray]: the small and the large root.
        """
        raise NotImplementedError("This method should be overridden by subclasses.")

    @abstractmethod
    def quadratic_terms(self, s, t, z2):
        """Tuple of the quadratic's terms; their sum vanishes on a root."""
        raise NotImplementedError("This method should be overridden by subclasses.")

    @abstractmethod
    def s_fraction(self, z2):
        """
        Ascending coefficient arrays (N, D) with s = N(u)/D(u) on every
        solution of the quadratic, where t = |z|²·u.
        """
        raise NotImplementedError("This method should be overridden by subclasses.")

    @abstractmethod
    def u_of(self, s, t):
        raise NotImplementedError("This method should be overridden by subclasses.")
