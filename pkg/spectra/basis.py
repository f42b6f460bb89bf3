"""
Basis & Quadrature - Discretizing -c*Laplacian + f(x) on R or R^2.

Two discretizations live here:
- Scaled Hermite functions h_n((x - c)/l)/sqrt(l), tensorized in 2D, with
  matrix elements of multiplication operators from Gauss-Hermite quadrature
- A uniform finite-difference grid, used only as an independent oracle
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from .errors import ConvergenceError, EvalError
from .expr_parser import Expression

logger = logging.getLogger(__name__)

MAX_QUADRATURE_ORDER = 512
QUADRATURE_MARGIN = 16


@dataclass(frozen=True)
class QuadratureRule:
    """
    Gauss-Hermite rule for the weight exp(-x^2).

    scaled_weights are w_k * exp(x_k^2): the weights to use when the
    integrand is written with Hermite *functions* (Gaussian already inside).
    """
    nodes: np.ndarray
    weights: np.ndarray
    scaled_weights: np.ndarray
    order: int

    def __post_init__(self):
        if len(self.nodes) != self.order or len(self.weights) != self.order:
            raise ValueError(f"Rule of order {self.order} needs {self.order} nodes and weights")
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("Quadrature nodes must be strictly increasing")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise ValueError("Quadrature weights must be finite and non-negative")


@dataclass(frozen=True)
class HermiteBasis:
    """
    Tensor-product basis of scaled Hermite functions.

    Basis functions are h_n((x - center)/l)/sqrt(l) per dimension; the flat
    index in 2D is n1*modes + n2 (numpy.kron ordering).
    """
    dimension: int
    modes: int  # per dimension
    length_scales: Tuple[float, ...] = (1.0,)
    kinetic: float = 1.0  # coefficient c of -c*Laplacian (hbar^2, or 1/2)
    centers: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError(f"Dimension must be 1 or 2, got {self.dimension}")
        if self.modes < 4:
            raise ValueError(f"Need at least 4 modes per dimension, got {self.modes}")
        if len(self.length_scales) != self.dimension:
            raise ValueError(f"Need {self.dimension} length scales, got {len(self.length_scales)}")
        if any(l <= 0 for l in self.length_scales):
            raise ValueError(f"Length scales must be positive, got {self.length_scales}")
        if self.kinetic <= 0:
            raise ValueError(f"Kinetic coefficient must be positive, got {self.kinetic}")
        if self.centers is None:
            object.__setattr__(self, 'centers', (0.0,) * self.dimension)
        elif len(self.centers) != self.dimension:
            raise ValueError(f"Need {self.dimension} centers, got {len(self.centers)}")

    @property
    def size(self) -> int:
        return self.modes ** self.dimension

    def default_quadrature_order(self) -> int:
        return 2 * self.modes + QUADRATURE_MARGIN

    def grown(self, factor: float = 1.25) -> "HermiteBasis":
        """Same basis with modes multiplied by factor (rounded up)."""
        return HermiteBasis(self.dimension, int(np.ceil(self.modes * factor)),
                            self.length_scales, self.kinetic, self.centers)

    def parity_signs(self, reflection: Tuple[int, ...]) -> np.ndarray:
        """
        Diagonal of the reflection operator in this basis.

        P h_n = (-1)^n h_n per reflected dimension, so the matrix is exactly
        diag((-1)^(n1*j1 + n2*j2)).
        """
        n = np.arange(self.modes)
        signs = np.ones(1)
        for flag in reflection:
            factor = np.where((n * flag) % 2 == 0, 1.0, -1.0)
            signs = np.kron(signs, factor)
        return signs


@dataclass(frozen=True)
class FDGrid:
    """Uniform grid on [center - L, center + L] with Dirichlet truncation."""
    half_width: float
    points: int
    center: float = 0.0

    def __post_init__(self):
        if self.points < 16:
            raise ValueError(f"FD grid needs at least 16 points, got {self.points}")
        if self.half_width <= 0:
            raise ValueError(f"Half width must be positive, got {self.half_width}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.points - 1)

    @property
    def coordinates(self) -> np.ndarray:
        offsets = np.linspace(-self.half_width, self.half_width, self.points)
        # Force exact mirror symmetry of the offsets
        offsets = 0.5 * (offsets - offsets[::-1])
        return self.center + offsets

    def reflection_matrix(self) -> np.ndarray:
        """Index reversal: x -> 2*center - x maps the grid onto itself."""
        return np.eye(self.points)[::-1].copy()


def hermite_functions(count: int, x: np.ndarray) -> np.ndarray:
    """
    Normalized Hermite functions h_0..h_{count-1} at points x.

    Uses the three-term recurrence on the functions themselves (Gaussian
    included), which stays finite far out where polynomials would overflow.

    Returns:
        Array of shape (len(x), count)
    """
    x = np.asarray(x, dtype=float)
    table = np.zeros((x.size, count))
    table[:, 0] = np.pi ** -0.25 * np.exp(-0.5 * x ** 2)
    if count > 1:
        table[:, 1] = np.sqrt(2.0) * x * table[:, 0]
    for n in range(1, count - 1):
        table[:, n + 1] = (np.sqrt(2.0 / (n + 1)) * x * table[:, n]
                           - np.sqrt(n / (n + 1)) * table[:, n - 1])
    return table


def gauss_hermite(order: int) -> QuadratureRule:
    """
    Golub-Welsch construction of the Gauss-Hermite rule.

    Nodes are eigenvalues of the symmetric tridiagonal Jacobi matrix with
    off-diagonals sqrt(k/2). Weights are Christoffel numbers
    exp(-x_k^2) / sum_n h_n(x_k)^2 from the Hermite-function recurrence;
    the outermost ones underflow to zero near the maximum order. Exact for
    polynomials of degree <= 2*order - 1 against exp(-x^2).

    Args:
        order: Number of nodes M, 2 <= M <= 512

    Raises:
        ConvergenceError: if the tridiagonal eigensolve fails
    """
    if not 2 <= order <= MAX_QUADRATURE_ORDER:
        raise ValueError(f"Quadrature order must be in [2, {MAX_QUADRATURE_ORDER}], got {order}")

    off_diagonal = np.sqrt(np.arange(1, order) / 2.0)
    try:
        nodes = eigh_tridiagonal(np.zeros(order), off_diagonal, eigvals_only=True)
    except LinAlgError as e:
        raise ConvergenceError(f"Jacobi eigensolve failed for order {order}: {e}")

    # The rule is exactly symmetric about 0 in exact arithmetic
    nodes = 0.5 * (nodes - nodes[::-1])

    # Christoffel numbers in function form: w_k * exp(x_k^2) = 1 / sum_n h_n(x_k)^2
    table = hermite_functions(order, nodes)
    scaled_weights = 1.0 / np.sum(table ** 2, axis=1)
    scaled_weights = 0.5 * (scaled_weights + scaled_weights[::-1])
    weights = scaled_weights * np.exp(-nodes ** 2)

    return QuadratureRule(nodes=nodes, weights=weights, scaled_weights=scaled_weights, order=order)


def second_derivative_matrix(modes: int) -> np.ndarray:
    """
    <m| -d^2/dx^2 |n> in the unscaled Hermite basis, from ladder operators.

    p^2 = -(a^dag - a)^2 / 2: diagonal (2n+1)/2, (n, n+2) = -sqrt((n+1)(n+2))/2.
    """
    n = np.arange(modes)
    matrix = np.diag((2 * n + 1) / 2.0)
    off = -np.sqrt((n[:-2] + 1.0) * (n[:-2] + 2.0)) / 2.0
    matrix += np.diag(off, 2) + np.diag(off, -2)
    return matrix


def kinetic_matrix(basis: HermiteBasis) -> np.ndarray:
    """
    Matrix of -c*Laplacian in the scaled Hermite basis.

    Each 1D factor is c/l^2 times the ladder-operator p^2 matrix; 2D is the
    Kronecker sum K1 (x) I + I (x) K2.
    """
    factors = [basis.kinetic / l ** 2 * second_derivative_matrix(basis.modes)
               for l in basis.length_scales]
    if basis.dimension == 1:
        return factors[0]
    identity = np.eye(basis.modes)
    return np.kron(factors[0], identity) + np.kron(identity, factors[1])


def _weighted_functions(basis: HermiteBasis, rule: QuadratureRule) -> np.ndarray:
    """B[k, n] = sqrt(w_k e^{x_k^2}) h_n(x_k): then <i|f|j> = sum_k B_ki f_k B_kj."""
    return np.sqrt(rule.scaled_weights)[:, None] * hermite_functions(basis.modes, rule.nodes)


def physical_nodes(basis: HermiteBasis, rule: QuadratureRule) -> Tuple[np.ndarray, ...]:
    """Quadrature nodes mapped to x = center + l*xi, one array per dimension."""
    return tuple(c + l * rule.nodes for c, l in zip(basis.centers, basis.length_scales))


def potential_matrix(basis: HermiteBasis, f: Expression, order: Optional[int] = None) -> np.ndarray:
    """
    Matrix elements <h_i| f |h_j> by tensorized Gauss-Hermite quadrature.

    Args:
        basis: Hermite basis
        f: Multiplication operator as a parsed expression
        order: Quadrature order M, at least 2*modes (default 2*modes + 16,
            the margin covering the degree of polynomial parts of f)

    Returns:
        Real symmetric matrix of size basis.size

    Raises:
        EvalError: propagated from evaluating f at the nodes
    """
    order = order or basis.default_quadrature_order()
    if order < 2 * basis.modes:
        raise ValueError(f"Quadrature order {order} is below 2*modes = {2 * basis.modes}")

    rule = gauss_hermite(order)
    weighted = _weighted_functions(basis, rule)
    axes = physical_nodes(basis, rule)

    if basis.dimension == 1:
        values = f.on_grid([axes[0]])
        _check_finite(values, f)
        matrix = weighted.T @ (values[:, None] * weighted)
    else:
        grid_1, grid_2 = np.meshgrid(axes[0], axes[1], indexing='ij')
        values = f.on_grid([grid_1, grid_2])
        _check_finite(values, f)
        n = basis.modes
        # C[a, (i,k)] = B[a,i] B[a,k]; result[(i,k),(j,l)] = C^T F D
        pair_products = np.einsum('ai,ak->aik', weighted, weighted).reshape(order, n * n)
        folded = pair_products.T @ values @ pair_products
        matrix = folded.reshape(n, n, n, n).transpose(0, 2, 1, 3).reshape(n * n, n * n)

    return 0.5 * (matrix + matrix.T)


def _check_finite(values: np.ndarray, f: Expression) -> None:
    if not np.all(np.isfinite(values)):
        raise EvalError(f"{f.source} is not finite at every quadrature node")


def fd_operator(grid: FDGrid, V: Expression, kinetic: float = 1.0) -> np.ndarray:
    """
    Three-point finite-difference matrix of -c*d^2/dx^2 + V on the grid.

    Values beyond the end points are taken as zero (Dirichlet truncation).
    """
    x = grid.coordinates
    h = grid.spacing
    potential = V.on_grid([x])
    _check_finite(potential, V)
    main = 2.0 * kinetic / h ** 2 + potential
    off = -kinetic / h ** 2 * np.ones(grid.points - 1)
    return np.diag(main) + np.diag(off, 1) + np.diag(off, -1)
