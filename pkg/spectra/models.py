"""
Domain models for spectra of products and of their Hermitian linearizations.
"""
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(eq=False)
class ComplexSpectrum:
    """Eigenvalues λ_1..λ_n of W, ordered by real part then imaginary part."""
    values: np.ndarray
    n: int
    trace_residual: float = 0.0
    log_det_residual: float = 0.0

    @property
    def radii(self):
        return np.abs(self.values)

    @property
    def angles(self):
        return np.mod(np.angle(self.values), 2 * math.pi)

    def conjugate_pair_defect(self):
        """
        Largest |Im(λ + conj partner)| after matching the spectrum with its
        conjugate; zero for a real input matrix up to rounding.
        """
        order = np.lexsort((self.values.imag, self.values.real))
        conj = np.conj(self.values)
        conj_order = np.lexsort((conj.imag, conj.real))
        return float(np.max(np.abs(self.values[order] - conj[conj_order]), initial=0.0))


@dataclass(eq=False)
class SymmetrizedSpectrum:
    """
    The 2n real eigenvalues of V(z) in ascending order,
    -s_1 <= ... <= -s_n <= s_n <= ... <= s_1.
    """
    values: np.ndarray
    z: complex
    n: int

    @property
    def spectral_radius(self):
        return float(np.max(np.abs(self.values), initial=0.0))

    def pairing_defect(self):
        """max_i |values[i] + values[2n-1-i]|."""
        return float(np.max(np.abs(self.values + self.values[::-1]), initial=0.0))

    def positive_half(self):
        """s_1 >= ... >= s_n (the singular values of W - zI)."""
        return np.clip(self.values[self.n:][::-1], 0.0, None)

    def squared_view(self):
        """s_i², the support of ν_n."""
        return self.positive_half() ** 2


@dataclass(eq=False)
class HermitianLinearization:
    """
    V(z) = V·J - J(z) of size 2n, with V = ∏ H^(ν) and
    H^(ν) = blockdiag(X^(ν), (X^(m-ν+1))ᵀ).
    """
    matrix: np.ndarray
    z: complex
    n: int
    j_block: np.ndarray = field(repr=False, default=None)
    jz_block: np.ndarray = field(repr=False, default=None)

    @property
    def dimension(self):
        return 2 * self.n

    def hermitian_defect(self):
        scale = max(float(np.max(np.abs(self.matrix), initial=0.0)), 1.0)
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0)) / scale
