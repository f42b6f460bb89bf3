"""
Linear Algebra - Dense eigen/solve/norm kernels on top of LAPACK.

Every other module goes through these four entry points so that ordering,
normalization and error mapping are the same everywhere.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .errors import ConvergenceError, SingularError

logger = logging.getLogger(__name__)

MAX_MATRIX_SIZE = 2000
SYMMETRY_TOLERANCE = 1e-12
PIVOT_TOLERANCE = 1e-14
SOLVE_RESIDUAL_TOLERANCE = 1e-10
# Eigenvalue condition 1/|y^H x| above which a pair is reported near-defective
DEFECTIVE_CONDITION = 1e8


@dataclass
class SpectralDecomposition:
    """
    Eigenvalues sorted by real part, then imaginary part, with unit-norm
    eigenvector columns and per-pair residuals ||A v - lambda v||.
    """
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    matrix_norm: float
    near_defective: np.ndarray = field(default=None)

    def __post_init__(self):
        n = len(self.eigenvalues)
        if self.eigenvectors.shape[1] != n or len(self.residuals) != n:
            raise ValueError(f"Decomposition with {n} eigenvalues has mismatched vectors/residuals")
        if self.near_defective is None:
            self.near_defective = np.zeros(n, dtype=bool)

    @property
    def size(self) -> int:
        return len(self.eigenvalues)

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if self.size else 0.0

    def real_eigenvalues(self) -> np.ndarray:
        return np.real(self.eigenvalues)


def _check_size(A: np.ndarray) -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {A.shape}")
    if A.shape[0] > MAX_MATRIX_SIZE:
        raise ValueError(f"Matrix size {A.shape[0]} exceeds the dense limit {MAX_MATRIX_SIZE}")


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of each column real positive."""
    if vectors.size == 0:
        return vectors
    pivots = vectors[np.argmax(np.abs(vectors), axis=0), np.arange(vectors.shape[1])]
    if np.iscomplexobj(vectors):
        return vectors * (pivots / np.abs(pivots)).conj()[None, :]
    return vectors * np.sign(pivots)[None, :]


def _residuals(A: np.ndarray, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    return np.linalg.norm(A @ vectors - vectors * values[None, :], axis=0)


def spectral_order(values: np.ndarray, decimals: int = 10) -> np.ndarray:
    """
    Indices sorting by real part, then imaginary part.

    Real parts are compared after rounding to `decimals` digits relative to
    max(1, max|z|), so a conjugate pair always lists the negative imaginary
    part first.
    """
    values = np.asarray(values, dtype=complex)
    if values.size == 0:
        return np.arange(0)
    scale = max(1.0, float(np.max(np.abs(values))))
    return np.lexsort((values.imag, np.round(values.real / scale, decimals)))


def eig_symmetric(A: np.ndarray) -> SpectralDecomposition:
    """
    Eigen-decomposition of a real symmetric matrix (LAPACK syevr).

    Returns ascending real eigenvalues and orthonormal eigenvectors whose
    largest entry is positive, so repeated calls are bit-identical.

    Raises:
        ValueError: if A is not symmetric to 1e-12 relative
        ConvergenceError: if LAPACK does not converge
    """
    A = np.asarray(A, dtype=float)
    _check_size(A)
    norm = float(np.linalg.norm(A, 2)) if A.size else 0.0
    asymmetry = float(np.max(np.abs(A - A.T))) if A.size else 0.0
    if asymmetry > SYMMETRY_TOLERANCE * max(norm, 1.0):
        raise ValueError(f"Matrix is not symmetric (max |A - A^T| = {asymmetry:.3e})")

    try:
        values, vectors = sla.eigh(A)
    except sla.LinAlgError as e:
        raise ConvergenceError(f"Symmetric eigensolve failed: {e}")

    vectors = _fix_signs(vectors)
    residuals = _residuals(A, values, vectors)
    logger.debug(f"eig_symmetric n={A.shape[0]} max residual {residuals.max() if residuals.size else 0:.2e}")
    return SpectralDecomposition(values.astype(complex), vectors, residuals, norm)


def eig_complex(A: np.ndarray) -> SpectralDecomposition:
    """
    Full spectrum of a general complex matrix (LAPACK zgeev: Hessenberg
    reduction, shifted QR, eigenvectors by back-substitution).

    Pairs whose left/right eigenvectors are nearly orthogonal are flagged as
    near-defective; their residual is reported as computed, never raised.
    """
    A = np.asarray(A, dtype=complex)
    _check_size(A)
    if not np.all(np.isfinite(A)):
        raise ValueError("Matrix has non-finite entries")
    norm = float(np.linalg.norm(A, 2)) if A.size else 0.0

    try:
        values, left, right = sla.eig(A, left=True, right=True)
    except sla.LinAlgError as e:
        raise ConvergenceError(f"Complex eigensolve failed: {e}")

    order = spectral_order(values)
    values = values[order]
    right = right[:, order]
    left = left[:, order]
    right = right / np.linalg.norm(right, axis=0)[None, :]
    left = left / np.linalg.norm(left, axis=0)[None, :]
    right = _fix_signs(right)

    overlaps = np.abs(np.sum(left.conj() * right, axis=0))
    with np.errstate(divide='ignore'):
        condition = np.where(overlaps > 0, 1.0 / overlaps, np.inf)
    near_defective = condition > DEFECTIVE_CONDITION
    residuals = _residuals(A, values, right)

    if np.any(near_defective):
        logger.info(f"eig_complex: {int(near_defective.sum())} near-defective pair(s), "
                    f"max residual {residuals[near_defective].max():.2e}")
    return SpectralDecomposition(values, right, residuals, norm, near_defective)


def eigenvalues_only(A: np.ndarray) -> np.ndarray:
    """Sorted spectrum without eigenvectors (for sweeps)."""
    A = np.asarray(A)
    _check_size(A)
    try:
        values = sla.eigvals(A)
    except sla.LinAlgError as e:
        raise ConvergenceError(f"Eigenvalue computation failed: {e}")
    return values[spectral_order(values)]


def solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """
    Solve A X = B by LU with partial pivoting.

    Raises:
        SingularError: when a pivot falls below 1e-14*||A||_1, or when the
            residual ||AX - B|| exceeds 1e-10*||A||*||X||
    """
    A = np.asarray(A)
    B = np.asarray(B)
    _check_size(A)
    scale = float(np.linalg.norm(A, 1))

    with warnings.catch_warnings():
        warnings.simplefilter('ignore', sla.LinAlgWarning)
        lu, pivots = sla.lu_factor(A, check_finite=True)
        smallest = float(np.min(np.abs(np.diag(lu)))) if A.size else 0.0
        if smallest <= PIVOT_TOLERANCE * scale:
            raise SingularError(smallest)
        X = sla.lu_solve((lu, pivots), B)

    residual = float(np.linalg.norm(A @ X - B))
    bound = SOLVE_RESIDUAL_TOLERANCE * scale * max(float(np.linalg.norm(X)), 1e-300)
    if residual > bound and residual > SOLVE_RESIDUAL_TOLERANCE * float(np.linalg.norm(B)):
        logger.warning(f"solve residual {residual:.2e} above bound {bound:.2e}")
        raise SingularError(smallest)
    return X


def op_norm(A: np.ndarray) -> float:
    """Spectral norm (largest singular value)."""
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    try:
        return float(np.linalg.norm(A, 2))
    except np.linalg.LinAlgError as e:
        raise ConvergenceError(f"Singular value computation failed: {e}")
