"""
Products, Hermitian linearizations and their spectra.

Dense LAPACK drivers from scipy.linalg do the decompositions: `eigvals`
(balancing, Hessenberg reduction, shifted QR) for the product and `eigvalsh`
for the 2n×2n Hermitian linearization. Driver failures surface as
ConvergenceFailure.
"""
import logging
import math

import numpy as np
from django.conf import settings
from scipy import linalg

from core.exception import ContractError, ConvergenceFailure, DimensionMismatch, DomainError
from core.utils import write_csv, write_json
from ensemble.models import RealMatrix
from spectra.models import ComplexSpectrum, HermitianLinearization, SymmetrizedSpectrum

logger = logging.getLogger(__name__)

TRACE_TOLERANCE = 1e-8
DET_TOLERANCE = 1e-6


def _as_array(matrix):
    if isinstance(matrix, RealMatrix):
        return matrix.entries
    return np.asarray(matrix)


def _square_factor_blocks(factors):
    if not factors:
        raise DimensionMismatch("At least one factor is required.")
    n = factors[0].rows
    for factor in factors:
        if factor.rows != n or factor.cols != n:
            raise DimensionMismatch("Factors must be square with a common dimension.")
    return n, [factor.scaled() for factor in factors]


def product(factors) -> RealMatrix:
    """W = ∏ n^(-1/2)·X^(q) in the given order."""
    n, blocks = _square_factor_blocks(factors)
    result = blocks[0]
    for block in blocks[1:]:
        result = result @ block
    return RealMatrix(result, scale=n ** -0.5)


def _check_square(array):
    if array.ndim != 2 or array.shape[0] != array.shape[1]:
        raise DimensionMismatch("Expected a square matrix.")
    if array.shape[0] > settings.LAB_EIG_MAX_N:
        raise ContractError(f"Dimension {array.shape[0]} exceeds LAB_EIG_MAX_N={settings.LAB_EIG_MAX_N}.")
    if not np.all(np.isfinite(array)):
        raise ContractError("Matrix has non-finite entries.")


def eigenvalues(matrix) -> ComplexSpectrum:
    """
    All n eigenvalues with multiplicity. The trace identity and, for a
    numerically nonsingular matrix, the determinant identity
    ∏|λ_i| = |det W| (relative DET_TOLERANCE against LU) are enforced.
    """
    array = _as_array(matrix)
    _check_square(array)
    n = array.shape[0]
    try:
        values = linalg.eigvals(array, check_finite=False)
    except linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"Nonsymmetric eigen-solver failed at n={n}: {exc}")

    order = np.lexsort((values.imag, values.real))
    values = values[order].astype(complex)

    norm = max(float(linalg.norm(array, 2)), 1.0)
    trace_residual = abs(complex(np.sum(values)) - complex(np.trace(array)))
    if trace_residual > TRACE_TOLERANCE * n * norm:
        raise ConvergenceFailure(
            f"Eigenvalue sum misses the trace by {trace_residual:.3e}.",
            residuals={'trace': trace_residual},
        )
    log_det_residual = _log_det_residual(array, values)
    singular = float(np.min(np.abs(values), initial=math.inf)) <= n * np.finfo(float).eps * norm
    if not singular and log_det_residual > math.log1p(DET_TOLERANCE):
        raise ConvergenceFailure(
            f"Eigenvalue product misses the determinant by a log-modulus {log_det_residual:.3e}.",
            residuals={'trace': trace_residual, 'log_det': log_det_residual},
        )
    return ComplexSpectrum(
        values=values,
        n=n,
        trace_residual=trace_residual,
        log_det_residual=log_det_residual,
    )


def log_abs_det(array):
    """log|det A| from an LU factorization; -inf for singular A."""
    lu, _ = linalg.lu_factor(array, check_finite=False)
    diagonal = np.abs(np.diag(lu))
    if np.any(diagonal == 0):
        return -math.inf
    return float(np.sum(np.log(diagonal)))


def _log_det_residual(array, values):
    moduli = np.abs(values)
    if np.any(moduli == 0):
        return 0.0 if log_abs_det(array) == -math.inf else math.inf
    return abs(float(np.sum(np.log(moduli))) - log_abs_det(array))


def partial_product(factors, a, b):
    """
    V_[a,b] = ∏_{k=a}^{b} H^(k) with H^(k) = blockdiag(X^(k), (X^(m-k+1))ᵀ),
    1-based and inclusive; the 2n identity when a > b.
    """
    n, blocks = _square_factor_blocks(factors)
    m = len(blocks)
    if a > b:
        return np.eye(2 * n)
    if not (1 <= a and b <= m):
        raise DomainError(f"Partial product bounds must satisfy 1 <= a <= b <= {m}.")
    top = np.eye(n)
    bottom = np.eye(n)
    for k in range(a, b + 1):
        top = top @ blocks[k - 1]
        bottom = bottom @ blocks[m - k].T
    return linalg.block_diag(top, bottom)


def build_linearization(factors, z) -> HermitianLinearization:
    """V(z) = V·J - J(z) = [[0, W - zI], [Wᵀ - z̄I, 0]]."""
    n, _ = _square_factor_blocks(factors)
    z = complex(z)
    v = partial_product(factors, 1, len(factors))
    identity = np.eye(n)
    zeros = np.zeros((n, n))
    j_block = np.block([[zeros, identity], [identity, zeros]])
    jz_block = np.block([[zeros, z * identity], [np.conj(z) * identity, zeros]])
    matrix = v @ j_block - jz_block
    return HermitianLinearization(matrix=matrix, z=z, n=n, j_block=j_block, jz_block=jz_block)


def hermitize(matrix, z):
    """The linearization [[0, W - zI], [(W - zI)*, 0]] of a given matrix W."""
    array = _as_array(matrix)
    _check_square(array)
    n = array.shape[0]
    shifted = array - complex(z) * np.eye(n)
    zeros = np.zeros((n, n))
    return HermitianLinearization(
        matrix=np.block([[zeros, shifted], [shifted.conj().T, zeros]]),
        z=complex(z),
        n=n,
    )


def symmetrized_spectrum(lin: HermitianLinearization) -> SymmetrizedSpectrum:
    """Ascending real eigenvalues of V(z): ±s_i(W - zI)."""
    try:
        values = linalg.eigvalsh(lin.matrix, check_finite=False)
    except linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"Hermitian eigen-solver failed at 2n={lin.dimension}: {exc}")
    return SymmetrizedSpectrum(values=np.sort(values), z=lin.z, n=lin.n)


def shifted_singular_values(W, z, method='hermitian'):
    """
    s_1 >= ... >= s_n >= 0 of W - zI.

    `method='hermitian'` reads them off the 2n×2n linearization;
    `method='svd'` calls the LAPACK SVD directly and is the cheaper choice
    for large sweeps.
    """
    if method == 'hermitian':
        return symmetrized_spectrum(hermitize(W, z)).positive_half()
    if method != 'svd':
        raise DomainError(f"Unknown singular value method '{method}'.")
    array = _as_array(W)
    _check_square(array)
    try:
        values = linalg.svdvals(array - complex(z) * np.eye(array.shape[0]), check_finite=False)
    except linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"SVD failed: {exc}")
    return np.sort(values)[::-1]


def resolvent_trace(spectrum: SymmetrizedSpectrum, alpha):
    """(1/2n)·Tr(V(z) - αI)^(-1) = (1/2n)·Σ 1/(λ_i - α)."""
    alpha = complex(alpha)
    if alpha.imag <= 0:
        raise DomainError("Resolvent needs Im(alpha) > 0.")
    return complex(np.mean(1.0 / (spectrum.values - alpha)))


class EmpiricalCDF:
    """Right-continuous empirical distribution function of a sample."""

    def __init__(self, values):
        values = np.sort(np.asarray(values, dtype=float))
        if values.size == 0:
            raise DomainError("Empirical CDF needs at least one value.")
        self.values = values

    def __call__(self, x):
        return np.searchsorted(self.values, x, side='right') / self.values.size

    def sup_distance(self, cdf):
        """sup_x |F_n(x) - F(x)| for a continuous target `cdf`."""
        size = self.values.size
        target = np.asarray(cdf(self.values), dtype=float)
        upper = np.arange(1, size + 1) / size - target
        lower = target - np.arange(size) / size
        return float(max(np.max(upper), np.max(lower)))


def empirical_cdf(values):
    return EmpiricalCDF(values)


def radial_angular_split(spectrum: ComplexSpectrum):
    """Moduli and angles in [0, 2π) of the eigenvalues."""
    if spectrum.values.size == 0:
        raise DomainError("Spectrum is empty.")
    return spectrum.radii, spectrum.angles


def symmetrize_cdf(cdf):
    """F̃(x) = (1 + sgn(x)·F(x²))/2 for a distribution F on [0, ∞)."""
    def symmetrized(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * (1.0 + np.sign(x) * cdf(x ** 2))
    return symmetrized


def symmetrized_distance(cdf_f, cdf_g, grid):
    """sup over a grid of |F̃ - G̃|; equals half of sup_{x>=0}|F - G| on matching grids."""
    sym_f, sym_g = symmetrize_cdf(cdf_f), symmetrize_cdf(cdf_g)
    return float(np.max(np.abs(sym_f(grid) - sym_g(grid))))


def product_sv_inequality(a, b):
    """
    Slack of ∏_{j>=k} s_j(AB) >= ∏_{j>=k} s_j(A)·s_j(B) over all k, in logs,
    and the gap of the full-product equality.

    Returns (min_slack, equality_gap); zero singular values make both
    sides -inf and are reported as zero slack.
    """
    a, b = _as_array(a), _as_array(b)
    if a.shape != b.shape:
        raise DimensionMismatch("Factors must have the same shape.")
    with np.errstate(divide='ignore'):
        log_ab = np.log(linalg.svdvals(a @ b))
        log_a = np.log(linalg.svdvals(a))
        log_b = np.log(linalg.svdvals(b))
    # Tail sums from k to n of the descending sequences.
    left = np.cumsum(log_ab[::-1])[::-1]
    right = np.cumsum((log_a + log_b)[::-1])[::-1]
    with np.errstate(invalid='ignore'):
        slack = np.where(np.isneginf(right), 0.0, left - right)
    scale = np.maximum(1.0, np.abs(right))
    min_slack = float(np.min(slack / np.where(np.isfinite(scale), scale, 1.0)))
    equality_gap = float(abs(left[0] - right[0]) / max(1.0, abs(right[0]))) if np.isfinite(right[0]) else 0.0
    return min_slack, equality_gap


def export_complex_spectrum(path, spectrum: ComplexSpectrum):
    return write_csv(path, ['re', 'im'], ((v.real, v.imag) for v in spectrum.values))


def export_symmetrized_spectrum(path, spectrum: SymmetrizedSpectrum):
    return write_csv(path, ['value'], ((v,) for v in spectrum.values))


def export_metadata(path, n, m, rho, z, seed):
    z = complex(z)
    return write_json(path, {'n': n, 'm': m, 'rho': rho, 'z_re': z.real, 'z_im': z.imag, 'seed': seed})
