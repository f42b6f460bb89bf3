"""
Operator Assembly - H(eps) = H0 + eps*H1 with a unitary involution J.

Builds the three matrices from a ProblemSpec, checks the intertwining
relations J H0 = H0* J and J H1 = H1* J, and flags families that fail them.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy import optimize

from .basis import (HermiteBasis, gauss_hermite, kinetic_matrix, physical_nodes,
                    potential_matrix)
from .errors import AssemblyError, EvalError, SymmetryViolation
from .expr_parser import Expression, Parity, detect_parity
from .linalg import SpectralDecomposition, eig_symmetric, op_norm

logger = logging.getLogger(__name__)

DEFAULT_SYMMETRY_TOLERANCE = 1e-10


class PerturbationForm(Enum):
    """How H1 is obtained."""
    PT = "pt"  # H1 = i * W(x)
    MATRIX = "matrix"  # user-supplied H1 and J


@dataclass
class ProblemSpec:
    """
    Everything needed to assemble one operator family.

    reflection holds the j-flags per coordinate: P u(x) = u(.., (-1)^j_i x_i, ..)
    about the basis centers.
    """
    basis: HermiteBasis
    V: Expression
    W: Optional[Expression] = None
    reflection: Tuple[int, ...] = (1,)
    perturbation: PerturbationForm = PerturbationForm.PT
    h1_matrix: Optional[np.ndarray] = None
    j_matrix: Optional[np.ndarray] = None
    quadrature_order: Optional[int] = None
    symmetry_tolerance: float = DEFAULT_SYMMETRY_TOLERANCE
    epsilon_range: Tuple[float, float] = (0.0, 0.0)
    label: str = ""

    def __post_init__(self):
        if len(self.reflection) != self.basis.dimension:
            raise ValueError(f"Reflection pattern {self.reflection} does not match dimension {self.basis.dimension}")
        if any(flag not in (0, 1) for flag in self.reflection):
            raise ValueError(f"Reflection flags must be 0 or 1, got {self.reflection}")
        if not any(self.reflection):
            raise ValueError("At least one coordinate must be reflected")
        if self.V.dimension != self.basis.dimension:
            raise ValueError(f"V is declared in {self.V.dimension}D but the basis is {self.basis.dimension}D")
        if self.perturbation == PerturbationForm.PT:
            if self.W is None:
                raise ValueError("PT form needs a perturbation W")
        else:
            if self.h1_matrix is None or self.j_matrix is None:
                raise ValueError("Matrix form needs both h1_matrix and j_matrix")
            size = self.basis.size
            for name, matrix in (("h1_matrix", self.h1_matrix), ("j_matrix", self.j_matrix)):
                if matrix.shape != (size, size):
                    raise ValueError(f"{name} has shape {matrix.shape}, basis size is {size}")


@dataclass
class OperatorFamily:
    """
    Matrices of H0 (real symmetric), H1 (complex) and J (signed diagonal or
    permutation), plus the relative intertwining residuals.
    """
    H0: np.ndarray
    H1: np.ndarray
    J: np.ndarray
    h0_residual: float
    h1_residual: float
    valid: bool
    spec: Optional[ProblemSpec] = None
    _h0_spectrum: Optional[SpectralDecomposition] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.H0.shape[0]

    def h0_spectrum(self, cache=None) -> SpectralDecomposition:
        """
        Eigen-decomposition of H0, computed once per family.

        Args:
            cache: Optional EigenCache consulted before solving
        """
        if self._h0_spectrum is None:
            decomposition = cache.get(self.H0) if cache is not None else None
            if decomposition is None:
                decomposition = eig_symmetric(self.H0)
                if cache is not None:
                    cache.put(self.H0, decomposition)
            self._h0_spectrum = decomposition
        return self._h0_spectrum

    def require_valid(self) -> None:
        if not self.valid:
            raise SymmetryViolation(max(self.h0_residual, self.h1_residual), "J H = H* J")


@dataclass
class H1Norm:
    """Matrix norm of the truncated H1 and, for PT form, the sup of |W|."""
    matrix_norm: float
    sup_bound: Optional[float]
    argmax: Optional[Tuple[float, ...]] = None

    @property
    def conservative(self) -> float:
        """The norm used for reality radii: sup bound when known."""
        if self.sup_bound is None:
            return self.matrix_norm
        return max(self.sup_bound, self.matrix_norm)


def intertwining_residual(J: np.ndarray, A: np.ndarray) -> float:
    """||J A - A* J|| / ||A|| (0 for A = 0), A* the adjoint."""
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(J @ A - A.conj().T @ J) / scale)


def assemble_h0(spec: ProblemSpec) -> np.ndarray:
    """Kinetic plus potential part only (used for truncation checks)."""
    try:
        potential = potential_matrix(spec.basis, spec.V, spec.quadrature_order)
    except EvalError as e:
        raise AssemblyError(f"Cannot assemble V = {spec.V.source}", e)
    return kinetic_matrix(spec.basis) + potential


def assemble(spec: ProblemSpec) -> OperatorFamily:
    """
    Build (H0, H1, J) for the problem.

    Returns:
        OperatorFamily, flagged invalid when either intertwining residual is
        above spec.symmetry_tolerance

    Raises:
        AssemblyError: wrapping evaluation failures at quadrature nodes
    """
    H0 = assemble_h0(spec)

    if spec.perturbation == PerturbationForm.PT:
        _check_parities(spec)
        try:
            H1 = 1j * potential_matrix(spec.basis, spec.W, spec.quadrature_order)
        except EvalError as e:
            raise AssemblyError(f"Cannot assemble W = {spec.W.source}", e)
        J = np.diag(spec.basis.parity_signs(spec.reflection))
    else:
        H1 = np.asarray(spec.h1_matrix, dtype=complex)
        J = np.asarray(spec.j_matrix, dtype=complex)
        _check_involution(J)

    h0_residual = intertwining_residual(J, H0)
    h1_residual = intertwining_residual(J, H1)
    valid = max(h0_residual, h1_residual) <= spec.symmetry_tolerance
    if not valid:
        logger.warning(f"Family {spec.label or ''} violates J H = H* J: "
                       f"H0 residual {h0_residual:.2e}, H1 residual {h1_residual:.2e}")
    else:
        logger.debug(f"Assembled family of size {H0.shape[0]}, residuals {h0_residual:.1e}/{h1_residual:.1e}")

    return OperatorFamily(H0=H0, H1=H1, J=J, h0_residual=h0_residual,
                          h1_residual=h1_residual, valid=valid, spec=spec)


def _check_parities(spec: ProblemSpec) -> None:
    """Warn when V is not even or W is not odd under the reflection."""
    centers = spec.basis.centers
    v_parity = detect_parity(spec.V.ast, spec.reflection, center=centers)
    w_parity = detect_parity(spec.W.ast, spec.reflection, center=centers)
    if v_parity != Parity.EVEN:
        logger.warning(f"V = {spec.V.source} is {v_parity.value} under reflection {spec.reflection}")
    if w_parity != Parity.ODD:
        logger.warning(f"W = {spec.W.source} is {w_parity.value} under reflection {spec.reflection}; "
                       f"PT form expects an odd W")


def _check_involution(J: np.ndarray) -> None:
    identity = np.eye(J.shape[0])
    if not np.allclose(J @ J, identity, atol=1e-12, rtol=0.0):
        raise AssemblyError("User J is not an involution (J^2 != I)")
    if not np.allclose(J.conj().T, J, atol=1e-12, rtol=0.0):
        raise AssemblyError("User J is not self-adjoint")


def evaluate_at(family: OperatorFamily, epsilon: float) -> np.ndarray:
    """H0 + eps*H1 (exactly H0, as complex, when eps = 0)."""
    if epsilon == 0:
        return family.H0.astype(complex)
    return family.H0 + epsilon * family.H1


def h1_operator_norm(family: OperatorFamily) -> H1Norm:
    """
    ||H1|| two ways: the spectral norm of the truncated matrix and, in PT form,
    sup |W| over the quadrature nodes polished by a local maximization.
    """
    matrix_norm = op_norm(family.H1)
    spec = family.spec
    if spec is None or spec.perturbation != PerturbationForm.PT:
        return H1Norm(matrix_norm=matrix_norm, sup_bound=None)

    sup, argmax = sup_abs_on_nodes(spec.W, spec.basis, spec.quadrature_order)
    logger.debug(f"||H1|| matrix {matrix_norm:.6f}, sup|W| {sup:.6f} at {argmax}")
    return H1Norm(matrix_norm=matrix_norm, sup_bound=sup, argmax=argmax)


def sup_abs_on_nodes(W: Expression, basis: HermiteBasis,
                     order: Optional[int] = None) -> Tuple[float, Tuple[float, ...]]:
    """
    Max of |W| over the tensor quadrature grid, refined by Nelder-Mead from
    the best node. The refined point is kept only inside the node box.
    """
    rule = gauss_hermite(order or basis.default_quadrature_order())
    axes = physical_nodes(basis, rule)
    if basis.dimension == 1:
        grid = [axes[0]]
    else:
        grid = list(np.meshgrid(axes[0], axes[1], indexing='ij'))
    values = np.abs(W.on_grid(grid))
    best_index = np.unravel_index(np.argmax(values), values.shape)
    start = np.array([g[best_index] for g in grid])
    best = float(values[best_index])

    lower = np.array([a[0] for a in axes])
    upper = np.array([a[-1] for a in axes])

    def negative_abs(point):
        if np.any(point < lower) or np.any(point > upper):
            return 0.0
        try:
            return -abs(W(point))
        except EvalError:
            return 0.0

    result = optimize.minimize(negative_abs, start, method='Nelder-Mead',
                               options={'xatol': 1e-10, 'fatol': 1e-15, 'maxiter': 2000})
    refined = -float(result.fun)
    if refined > best:
        return refined, tuple(float(x) for x in result.x)
    return best, tuple(float(x) for x in start)
