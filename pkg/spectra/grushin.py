"""
Grushin Reduction - Effective 2x2 problems for a pair of eigenvalues of H0.

For a rank-2 spectral subspace of H0 (a double eigenvalue, or two simple
neighbours) the perturbed operator H0 + eps*H1 - z is bordered by

    R+ u = (u | e_j*)_j      R- u- = u-(1) e1 + u-(2) e2

and the 2x2 corner E-+(z) of the inverse of the bordered operator vanishes
in determinant exactly at eigenvalues of H(eps) near the pair. This module
builds the canonical tau-basis, the corner block (as a Neumann series and as
an exact bordered solve), and finds its roots.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import (DegenerateFormError, DivergenceError, MultiplicityError,
                     NewtonDivergence, SymmetryViolation)
from .linalg import SpectralDecomposition, op_norm, solve
from .operators import OperatorFamily, evaluate_at

logger = logging.getLogger(__name__)

GRAM_DETERMINANT_TOLERANCE = 1e-10
CONSTRAINT_TOLERANCE = 1e-10
NEWTON_MAX_ITERATIONS = 50
NEWTON_RESIDUAL = 1e-12
DEFECTIVE_SEPARATION = 1e-7
REALITY_TOLERANCE = 1e-10
WINDING_POINTS = 32


def default_cluster_tolerance(lambda0: float) -> float:
    return 1e-8 * (1.0 + abs(lambda0))


@dataclass
class SpectralProjection:
    """Eigenvalues of H0 near lambda0, their eigenvectors and the projector."""
    lambda0: float
    levels: np.ndarray
    vectors: np.ndarray  # (n, k)
    indices: Tuple[int, ...]
    projector: np.ndarray

    @property
    def multiplicity(self) -> int:
        return len(self.indices)


@dataclass
class TauBasis:
    """Canonical basis of a 2D subspace: (J e_j | e_k) = tau_j delta_jk."""
    vectors: np.ndarray  # (n, 2)
    duals: np.ndarray  # (n, 2), (e_j* | e_k) = delta_jk
    tau: np.ndarray  # (+-1, +-1)
    gram: np.ndarray  # 2x2 Gram matrix of the form before diagonalization

    @property
    def tau_product(self) -> int:
        return int(self.tau[0] * self.tau[1])


@dataclass
class DegenerateBlock:
    """
    A rank-2 block of H0 in canonical tau-form with its effective matrix.

    levels are (lambda0, lambda0) for a genuine double eigenvalue and
    (E1, E2) for a near-degenerate pair, in which case lambda0 is the midpoint.
    """
    lambda0: float
    levels: np.ndarray
    vectors: np.ndarray
    duals: np.ndarray
    tau: np.ndarray
    indices: Tuple[int, ...]
    gap_norm: float  # R = ||E0(lambda0)||
    h1: Optional[np.ndarray] = None
    h1_matrix_norm: float = 0.0
    constraint_residual: float = 0.0
    near_degenerate: bool = False

    def __post_init__(self):
        if self.vectors.shape[1] != 2 or self.duals.shape[1] != 2:
            raise ValueError("A degenerate block needs exactly two vectors and two duals")
        if not set(np.abs(self.tau).tolist()) <= {1.0}:
            raise ValueError(f"tau must be +-1, got {self.tau}")
        if self.gap_norm <= 0:
            raise ValueError(f"Gap norm R must be positive, got {self.gap_norm}")

    @property
    def tau_product(self) -> int:
        return int(self.tau[0] * self.tau[1])

    @property
    def splitting(self) -> float:
        return float(self.levels[1] - self.levels[0])

    @property
    def disk_radius(self) -> float:
        """Radius 1/(4R) of the disk where exactly two roots are expected."""
        return 0.25 / self.gap_norm

    def corner_matrix(self) -> np.ndarray:
        """Lambda with E-+^0(z) = z I - Lambda."""
        return np.diag(self.levels).astype(complex)


class RootClass(Enum):
    REAL_PAIR = "real-pair"
    COMPLEX_PAIR = "complex-conjugate-pair"
    DEFECTIVE = "defective-tolerance"


@dataclass
class PairRoots:
    """The two zeros of det E-+(z) near lambda0 and how they were found."""
    roots: np.ndarray
    classification: RootClass
    seeds: np.ndarray
    iterations: List[int] = field(default_factory=list)
    residuals: List[float] = field(default_factory=list)
    winding_number: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            'roots': [[float(z.real), float(z.imag)] for z in self.roots],
            'classification': self.classification.value,
            'first_order': [[float(z.real), float(z.imag)] for z in self.seeds],
            'newton_iterations': list(self.iterations),
            'det_residuals': [float(r) for r in self.residuals],
            'winding_number': self.winding_number,
        }


@dataclass
class SeriesResult:
    matrix: np.ndarray
    tail_bound: float
    contraction: float
    order: int


# ----------------------------------------------------------------------------
# Projector and canonical basis
# ----------------------------------------------------------------------------

def spectral_projector(family: OperatorFamily, lambda0: float,
                       cluster_tolerance: Optional[float] = None,
                       decomposition: Optional[SpectralDecomposition] = None) -> SpectralProjection:
    """
    Orthogonal projector onto the eigenvectors of H0 within tolerance of lambda0.

    Raises:
        MultiplicityError: when the cluster has neither 1 nor 2 members
    """
    decomposition = decomposition or family.h0_spectrum()
    tolerance = cluster_tolerance if cluster_tolerance is not None else default_cluster_tolerance(lambda0)
    levels = decomposition.real_eigenvalues()
    indices = tuple(int(i) for i in np.flatnonzero(np.abs(levels - lambda0) <= tolerance))
    if len(indices) not in (1, 2):
        raise MultiplicityError(len(indices), lambda0)

    vectors = decomposition.eigenvectors[:, list(indices)]
    projector = vectors @ vectors.conj().T
    logger.debug(f"Cluster at {lambda0}: indices {indices}, levels {levels[list(indices)]}")
    return SpectralProjection(lambda0=lambda0, levels=levels[list(indices)], vectors=vectors,
                              indices=indices, projector=projector)


def canonical_tau_basis(eigenvectors: np.ndarray, J: np.ndarray,
                        keep_order: bool = False) -> TauBasis:
    """
    Diagonalize the form Q(u, u) = (J u | u) on span(v1, v2).

    With keep_order the input vectors are only rescaled, never mixed; that is
    what near-degenerate pairs need, since mixing two different levels would
    break the structure of E-+^0.

    Raises:
        DegenerateFormError: when |det G| < 1e-10
    """
    V = np.asarray(eigenvectors, dtype=complex)
    gram = V.conj().T @ J @ V
    gram = 0.5 * (gram + gram.conj().T)
    determinant = float(abs(np.linalg.det(gram)))
    if determinant < GRAM_DETERMINANT_TOLERANCE:
        raise DegenerateFormError(determinant)

    if keep_order:
        mu = np.real(np.diag(gram))
        if np.max(np.abs(gram[0, 1])) > 1e-8:
            logger.warning(f"Near-degenerate pair is not J-diagonal (|G12| = {abs(gram[0, 1]):.2e})")
        rotation = np.eye(2, dtype=complex)
    else:
        mu, rotation = np.linalg.eigh(gram)
        # +1 first
        mu = mu[::-1]
        rotation = rotation[:, ::-1]

    if np.any(np.abs(mu) < np.sqrt(GRAM_DETERMINANT_TOLERANCE)):
        raise DegenerateFormError(determinant)

    vectors = (V @ rotation) / np.sqrt(np.abs(mu))[None, :]
    # dual basis inside the span: e*^H e = I
    overlap = vectors.conj().T @ vectors
    duals = vectors @ np.linalg.inv(overlap).conj().T
    tau = np.sign(mu)
    return TauBasis(vectors=vectors, duals=duals, tau=tau, gram=gram)


def _gap_norm(levels: np.ndarray, block_indices: Sequence[int], lambda0: float) -> float:
    mask = np.ones(len(levels), dtype=bool)
    mask[list(block_indices)] = False
    distances = np.abs(levels[mask] - lambda0)
    if distances.size == 0 or np.min(distances) == 0:
        raise MultiplicityError(len(levels) - int(mask.sum()), lambda0)
    return float(1.0 / np.min(distances))


def effective_matrix(block: DegenerateBlock, family: OperatorFamily) -> np.ndarray:
    """
    H1_jk = (H1 e_k | e_j*) and the check tau_j H1_jk = tau_k conj(H1_kj).

    Raises:
        SymmetryViolation: when the constraint fails by more than 1e-10
    """
    h1 = block.duals.conj().T @ family.H1 @ block.vectors
    tau = block.tau
    lhs = tau[:, None] * h1
    rhs = tau[None, :] * h1.conj().T
    residual = float(np.max(np.abs(lhs - rhs)))
    scale = max(1.0, float(np.max(np.abs(h1))))
    if residual > CONSTRAINT_TOLERANCE * scale:
        raise SymmetryViolation(residual, "tau_j H1_jk = tau_k conj(H1_kj)")
    block.h1 = h1
    block.constraint_residual = residual
    return h1


def degenerate_block(family: OperatorFamily, lambda0: float,
                     cluster_tolerance: Optional[float] = None,
                     decomposition: Optional[SpectralDecomposition] = None) -> DegenerateBlock:
    """Projector + canonical basis + effective matrix for a double eigenvalue."""
    decomposition = decomposition or family.h0_spectrum()
    projection = spectral_projector(family, lambda0, cluster_tolerance, decomposition)
    if projection.multiplicity != 2:
        raise MultiplicityError(projection.multiplicity, lambda0)

    basis = canonical_tau_basis(projection.vectors, family.J)
    center = float(np.mean(projection.levels))
    block = DegenerateBlock(
        lambda0=center,
        levels=np.array([center, center]),
        vectors=basis.vectors,
        duals=basis.duals,
        tau=basis.tau,
        indices=projection.indices,
        gap_norm=_gap_norm(decomposition.real_eigenvalues(), projection.indices, center),
        h1_matrix_norm=op_norm(family.H1),
    )
    effective_matrix(block, family)
    logger.info(f"Degenerate block at {center:.10g}: tau = {block.tau.astype(int).tolist()}, R = {block.gap_norm:.4g}")
    return block


def near_degenerate_block(family: OperatorFamily, pair: Tuple[int, int],
                          decomposition: Optional[SpectralDecomposition] = None) -> DegenerateBlock:
    """Block for two simple neighbouring eigenvalues, given by their indices."""
    decomposition = decomposition or family.h0_spectrum()
    levels = decomposition.real_eigenvalues()
    indices = tuple(sorted(int(i) for i in pair))
    if len(set(indices)) != 2:
        raise ValueError(f"Pair needs two distinct level indices, got {pair}")

    basis = canonical_tau_basis(decomposition.eigenvectors[:, list(indices)], family.J, keep_order=True)
    center = float(np.mean(levels[list(indices)]))
    block = DegenerateBlock(
        lambda0=center,
        levels=levels[list(indices)].copy(),
        vectors=basis.vectors,
        duals=basis.duals,
        tau=basis.tau,
        indices=indices,
        gap_norm=_gap_norm(levels, indices, center),
        h1_matrix_norm=op_norm(family.H1),
        near_degenerate=True,
    )
    effective_matrix(block, family)
    return block


def first_order_eigenvalues(block: DegenerateBlock, epsilon: float) -> np.ndarray:
    """Eigenvalues of the restricted operator Lambda + eps*H1 (the Newton seeds)."""
    values = np.linalg.eigvals(block.corner_matrix() + epsilon * block.h1)
    return values[np.lexsort((values.imag, values.real))]


# ----------------------------------------------------------------------------
# Grushin operators
# ----------------------------------------------------------------------------

@dataclass
class GrushinOperators:
    """
    R+, R-, the projector and E0(z) = (H0 - z)^-1 (1 - Pi0) for one block.

    E0 is evaluated from the cached eigen-decomposition of H0 restricted to
    the complementary eigenvectors.
    """
    block: DegenerateBlock
    r_plus: np.ndarray  # (2, n)
    r_minus: np.ndarray  # (n, 2)
    projector: np.ndarray
    complement_levels: np.ndarray
    complement_vectors: np.ndarray
    h1_complement: np.ndarray  # H1 @ complement_vectors
    h1_r_minus: np.ndarray
    order: int = 10

    @property
    def gap_norm(self) -> float:
        return self.block.gap_norm

    def e0(self, z: complex) -> np.ndarray:
        Q = self.complement_vectors
        return (Q / (self.complement_levels - z)[None, :]) @ Q.conj().T

    def contraction(self, epsilon: float, z: complex) -> float:
        """K = |eps| * ||H1 E0(z)||."""
        scaled = self.h1_complement / (self.complement_levels - z)[None, :]
        return abs(epsilon) * op_norm(scaled)

    def e0_norm(self, z: complex) -> float:
        return float(np.max(1.0 / np.abs(self.complement_levels - z)))


def grushin_operators(family: OperatorFamily, block: DegenerateBlock,
                      decomposition: Optional[SpectralDecomposition] = None,
                      order: int = 10) -> GrushinOperators:
    decomposition = decomposition or family.h0_spectrum()
    mask = np.ones(decomposition.size, dtype=bool)
    mask[list(block.indices)] = False
    Q = decomposition.eigenvectors[:, mask]
    return GrushinOperators(
        block=block,
        r_plus=block.duals.conj().T,
        r_minus=block.vectors,
        projector=block.vectors @ block.duals.conj().T,
        complement_levels=decomposition.real_eigenvalues()[mask],
        complement_vectors=Q,
        h1_complement=family.H1 @ Q,
        h1_r_minus=family.H1 @ block.vectors,
        order=order,
    )


def e_minus_plus_series(g: GrushinOperators, epsilon: float, z: complex,
                        order: Optional[int] = None) -> SeriesResult:
    """
    E-+(z) = (z I - Lambda) + sum_{n=1}^{order} (-eps)^n R+ (H1 E0)^(n-1) H1 R-

    The tail bound is |eps| ||H1 R-|| K^order / (1 - K), K = |eps| ||H1 E0(z)||.

    Raises:
        DivergenceError: when K >= 1
    """
    order = order or g.order
    lambda0 = g.block.lambda0
    if abs(z - lambda0) >= 0.5 / g.gap_norm:
        logger.warning(f"z = {z} is outside the Grushin disk |z - {lambda0:.6g}| < 1/(2R)")

    K = g.contraction(epsilon, z)
    if K >= 1.0:
        raise DivergenceError(K)

    inverse_gaps = 1.0 / (g.complement_levels - z)
    Q = g.complement_vectors
    result = z * np.eye(2, dtype=complex) - g.block.corner_matrix()
    term = g.h1_r_minus.astype(complex)
    for n in range(1, order + 1):
        result += (-epsilon) ** n * (g.r_plus @ term)
        term = g.h1_complement @ (inverse_gaps[:, None] * (Q.conj().T @ term))

    tail = abs(epsilon) * op_norm(g.h1_r_minus) * K ** order / (1.0 - K)
    return SeriesResult(matrix=result, tail_bound=float(tail), contraction=float(K), order=order)


def e_minus_plus_exact(g: GrushinOperators, family: OperatorFamily,
                       epsilon: float, z: complex) -> np.ndarray:
    """
    Corner block of the inverse of [[H_eps - z, R-], [R+, 0]].

    Solving against [[0], [I2]] gives the last block column of the inverse;
    its bottom 2x2 is E-+(z).

    Raises:
        SingularError: propagated from the bordered solve
    """
    n = family.size
    bordered = np.zeros((n + 2, n + 2), dtype=complex)
    bordered[:n, :n] = evaluate_at(family, epsilon) - z * np.eye(n)
    bordered[:n, n:] = g.r_minus
    bordered[n:, :n] = g.r_plus
    rhs = np.zeros((n + 2, 2), dtype=complex)
    rhs[n:, :] = np.eye(2)
    solution = solve(bordered, rhs)
    return solution[n:, :]


def symmetry_check(g: GrushinOperators, family: OperatorFamily,
                   epsilon: float, z: complex) -> float:
    """|| E-+(conj z)^* tau - tau E-+(z) ||."""
    tau = np.diag(g.block.tau).astype(complex)
    at_z = e_minus_plus_exact(g, family, epsilon, z)
    at_conj = e_minus_plus_exact(g, family, epsilon, np.conj(z))
    return float(np.linalg.norm(at_conj.conj().T @ tau - tau @ at_z))


# ----------------------------------------------------------------------------
# Roots of det E-+(z)
# ----------------------------------------------------------------------------

def _determinant(g: GrushinOperators, family: OperatorFamily, epsilon: float, z: complex) -> complex:
    return complex(np.linalg.det(e_minus_plus_exact(g, family, epsilon, z)))


def winding_number(g: GrushinOperators, family: OperatorFamily, epsilon: float,
                   radius: Optional[float] = None, points: int = WINDING_POINTS) -> int:
    """Zeros of det E-+ inside |z - lambda0| = radius (argument principle)."""
    radius = radius or g.block.disk_radius
    angles = 2.0 * np.pi * np.arange(points + 1) / points
    contour = g.block.lambda0 + radius * np.exp(1j * angles)
    values = np.array([_determinant(g, family, epsilon, z) for z in contour])
    increments = np.angle(values[1:] / values[:-1])
    return int(round(float(np.sum(increments)) / (2.0 * np.pi)))


def _newton(f, seed: complex, scale: float) -> Tuple[complex, int, float]:
    """
    Damped Newton with a central finite-difference derivative.

    Stops when the step is at roundoff level or |f| <= 1e-12 * scale^2,
    scale^2 being the size of det E-+ on the Grushin disk.
    """
    z = complex(seed)
    value = f(z)
    target = NEWTON_RESIDUAL * scale ** 2
    for iteration in range(1, NEWTON_MAX_ITERATIONS + 1):
        if abs(value) <= target:
            return z, iteration - 1, abs(value)
        h = 1e-7 * max(1.0, abs(z))
        derivative = (f(z + h) - f(z - h)) / (2.0 * h)
        if derivative == 0:
            break
        step = value / derivative
        damping = 1.0
        candidate = z - step
        candidate_value = f(candidate)
        while abs(candidate_value) > abs(value) and damping > 1e-3:
            damping *= 0.5
            candidate = z - damping * step
            candidate_value = f(candidate)
        z, value = candidate, candidate_value
        if abs(damping * step) <= 1e-14 * (1.0 + abs(z)):
            return z, iteration, abs(value)
    if abs(value) <= target:
        return z, NEWTON_MAX_ITERATIONS, abs(value)
    raise NewtonDivergence(seed, abs(value))


def eigenvalues_near(block: DegenerateBlock, g: GrushinOperators, family: OperatorFamily,
                     epsilon: float, count_roots: bool = True) -> PairRoots:
    """
    The two eigenvalues of H(eps) near lambda0 as zeros of det E-+(z).

    Seeds are the eigenvalues of Lambda + eps*H1. A second root that lands on
    the first is recomputed on det(z)/(z - z1).

    Raises:
        NewtonDivergence: when a seed fails to converge in 50 iterations
    """
    seeds = first_order_eigenvalues(block, epsilon)
    lambda0 = block.lambda0
    if epsilon == 0:
        roots = np.sort(block.levels.astype(complex).real).astype(complex)
        return PairRoots(roots=roots, classification=RootClass.REAL_PAIR, seeds=seeds,
                         iterations=[0, 0], residuals=[0.0, 0.0],
                         winding_number=2 if count_roots else None)

    def det(z):
        return _determinant(g, family, epsilon, z)

    scale = block.disk_radius
    first, iterations_1, residual_1 = _newton(det, seeds[0], scale)
    second, iterations_2, residual_2 = _newton(det, seeds[1], scale)
    if abs(second - first) < 1e-10 * (1.0 + abs(lambda0)):
        logger.debug("Second Newton root collapsed onto the first; deflating")
        # coinciding seeds: start off the real axis, away from the removed root
        start = seeds[1] if abs(seeds[1] - first) > 1e-8 * scale else first + 1e-3 * scale * (1 + 1j)
        try:
            second, iterations_2, residual_2 = _newton(lambda z: det(z) / (z - first), start, scale)
        except NewtonDivergence:
            logger.debug("Deflated iteration failed; keeping the double root")

    roots = np.array([first, second])
    tolerance = REALITY_TOLERANCE * (1.0 + abs(lambda0))
    if abs(first - second) < DEFECTIVE_SEPARATION:
        classification = RootClass.DEFECTIVE
    elif np.max(np.abs(roots.imag)) > tolerance:
        classification = RootClass.COMPLEX_PAIR
        if abs(first - np.conj(second)) < 1e-6 * (1.0 + abs(lambda0)):
            upper = first if first.imag > 0 else second
            lower = second if first.imag > 0 else first
            average = 0.5 * (upper + np.conj(lower))
            roots = np.array([average, np.conj(average)])
    else:
        classification = RootClass.REAL_PAIR
        roots = np.sort(roots.real).astype(complex)

    winding = winding_number(g, family, epsilon) if count_roots else None
    if winding is not None and winding != 2:
        logger.warning(f"Winding count {winding} != 2 on |z - {lambda0:.6g}| = {block.disk_radius:.3g}")

    return PairRoots(roots=roots, classification=classification, seeds=seeds,
                     iterations=[iterations_1, iterations_2],
                     residuals=[residual_1, residual_2], winding_number=winding)
