"""
Criteria - Deciding whether perturbed eigenvalues stay real.

Three decisions, each returned together with the numbers that justify it:
- classify_degenerate: a double eigenvalue, from the signature (tau1, tau2)
  and the discriminant 4|H12|^2 - (H11 - H22)^2 of the effective matrix
- classify_near_degenerate: two simple neighbours E1 < E2, comparing the
  coupling |eps H12| against the splitting d
- reality_radius / verify_reality: whole trusted spectrum real for
  |eps| < delta/||H1||, delta half the smallest gap
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import EvalError, RealityViolation, SimplicityError, UnsupportedHypothesis
from .grushin import DegenerateBlock, default_cluster_tolerance, near_degenerate_block
from .linalg import SpectralDecomposition, eig_symmetric, eigenvalues_only
from .operators import (OperatorFamily, PerturbationForm, ProblemSpec, assemble_h0,
                        evaluate_at, h1_operator_norm)

logger = logging.getLogger(__name__)

DISCRIMINANT_TOLERANCE = 1e-12
SMALL_RATIO = 0.05
LARGE_RATIO = 0.5
TRUSTED_SHIFT = 1e-6
SQUARE_IMAG_TOLERANCE = 1e-8


class Verdict(Enum):
    COMPLEX_PAIR = "complex-pair-predicted"
    REAL_PAIR = "real-pair-predicted"
    INCONCLUSIVE = "inconclusive"


def _complex_pair(z: complex) -> List[float]:
    return [float(np.real(z)), float(np.imag(z))]


@dataclass
class PairVerdict:
    """Outcome of a pair criterion with its certificate data."""
    lambda0: float
    tau_product: int
    h1: np.ndarray
    discriminant: float
    verdict: Verdict
    validity_radius: float
    epsilon: Optional[float] = None
    # near-degenerate extras
    splitting: Optional[float] = None  # d
    distance: Optional[float] = None  # D
    coupling: Optional[float] = None  # |eps H12|
    threshold: Optional[float] = None  # d/2
    predicted_epsilon_c: Optional[float] = None  # d/(2|H12|)
    notes: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.tau_product not in (-1, 1):
            raise ValueError(f"tau product must be +-1, got {self.tau_product}")
        if self.verdict == Verdict.REAL_PAIR and self.tau_product == -1 and self.splitting is None:
            raise ValueError("A real pair at a double eigenvalue needs tau product +1")

    @property
    def h11(self) -> complex:
        return complex(self.h1[0, 0])

    @property
    def h22(self) -> complex:
        return complex(self.h1[1, 1])

    @property
    def h12(self) -> complex:
        """(H1 e1 | e2), the lower-left entry."""
        return complex(self.h1[1, 0])

    @property
    def margin(self) -> Optional[float]:
        if self.coupling is None or self.threshold is None:
            return None
        return self.coupling - self.threshold

    @property
    def ratio(self) -> Optional[float]:
        if self.splitting is None or not self.distance:
            return None
        return self.splitting / self.distance

    def to_dict(self) -> Dict:
        data = {
            'lambda0': self.lambda0,
            'tau_product': self.tau_product,
            'H11': _complex_pair(self.h11),
            'H22': _complex_pair(self.h22),
            'H12': _complex_pair(self.h12),
            'discriminant': self.discriminant,
            'verdict': self.verdict.value,
            'validity_radius_heuristic': self.validity_radius,
        }
        if self.epsilon is not None:
            data['epsilon'] = self.epsilon
        if self.splitting is not None:
            data.update({
                'd': self.splitting,
                'D': self.distance,
                'd_over_D': self.ratio,
                'coupling': self.coupling,
                'threshold_d_over_2': self.threshold,
                'threshold_d_over_2D': self.splitting / (2.0 * self.distance),
                'margin': self.margin,
                'predicted_epsilon_c': self.predicted_epsilon_c,
            })
        if self.notes:
            data['notes'] = list(self.notes)
        return data


def _discriminant(h1: np.ndarray) -> float:
    return float(4.0 * abs(h1[1, 0]) ** 2 - abs(h1[0, 0] - h1[1, 1]) ** 2)


def classify_degenerate(block: DegenerateBlock) -> PairVerdict:
    """
    Verdict for a double eigenvalue.

    complex pair: tau1*tau2 = -1 and 4|H12|^2 > (H11 - H22)^2
    real pair:    tau1*tau2 = +1
    inconclusive: tau1*tau2 = -1 with non-positive discriminant
    """
    h1 = block.h1
    discriminant = _discriminant(h1)
    scale = max(1.0, float(np.max(np.abs(h1))) ** 2)
    if block.tau_product == 1:
        verdict = Verdict.REAL_PAIR
    elif discriminant > DISCRIMINANT_TOLERANCE * scale:
        verdict = Verdict.COMPLEX_PAIR
    else:
        verdict = Verdict.INCONCLUSIVE

    # heuristic radius: series convergence at lambda0 and first-order dominance
    R = block.gap_norm
    limits = []
    if block.h1_matrix_norm > 0:
        limits.append(1.0 / (block.h1_matrix_norm * R))
    effective_norm = float(np.linalg.norm(h1, 2))
    if effective_norm > 0:
        limits.append(1.0 / (2.0 * R * effective_norm))
    radius = min(limits) if limits else float('inf')

    logger.info(f"lambda0 = {block.lambda0:.10g}: tau product {block.tau_product:+d}, "
                f"discriminant {discriminant:.6g} -> {verdict.value}")
    return PairVerdict(lambda0=block.lambda0, tau_product=block.tau_product, h1=h1,
                       discriminant=discriminant, verdict=verdict, validity_radius=radius)


def classify_near_degenerate(family: OperatorFamily, pair: Tuple[int, int], epsilon: float,
                             decomposition: Optional[SpectralDecomposition] = None) -> PairVerdict:
    """
    Verdict for two simple eigenvalues E1 < E2 (level indices in `pair`).

    The 2x2 problem E-levels + eps*H1 has complex eigenvalues exactly when
    4 eps^2 |H12|^2 > (d + eps(H22 - H11))^2, i.e. |eps H12| > d/2 in PT form.
    The comparison is a verdict only while d/D <= 0.05; for 0.05 < d/D < 0.5
    the margin is reported without a verdict, and d/D >= 0.5 is outside the
    hypothesis altogether.

    Raises:
        SimplicityError: if E1 or E2 is clustered with another eigenvalue
    """
    decomposition = decomposition or family.h0_spectrum()
    levels = decomposition.real_eigenvalues()
    indices = tuple(sorted(pair))
    clustered = []
    for i in indices:
        tolerance = default_cluster_tolerance(levels[i])
        neighbours = np.flatnonzero(np.abs(levels - levels[i]) <= tolerance)
        clustered.extend((int(i), int(j)) for j in neighbours if j != i)
    if clustered:
        raise SimplicityError(clustered)

    block = near_degenerate_block(family, indices, decomposition)
    E1, E2 = block.levels
    d = float(E2 - E1)
    rest = np.delete(levels, list(indices))
    D = float(np.min(np.minimum(np.abs(rest - E1), np.abs(rest - E2))))
    h1 = block.h1
    h12 = abs(h1[1, 0])
    coupling = abs(epsilon) * h12
    threshold = d / 2.0
    ratio = d / D
    shifted = d + epsilon * float(np.real(h1[1, 1] - h1[0, 0]))
    discriminant = float(4.0 * (epsilon * h12) ** 2 - shifted ** 2)
    predicted = d / (2.0 * h12) if h12 > 0 else float('inf')

    notes = []
    if epsilon == 0:
        verdict = Verdict.REAL_PAIR
        notes.append("no perturbation")
    elif block.tau_product == 1:
        verdict = Verdict.REAL_PAIR
    elif ratio >= LARGE_RATIO:
        verdict = Verdict.INCONCLUSIVE
        notes.append(f"d/D = {ratio:.3g} is not small")
    elif ratio > SMALL_RATIO:
        verdict = Verdict.INCONCLUSIVE
        notes.append(f"d/D = {ratio:.3g}: margin reported, no verdict")
    else:
        verdict = Verdict.COMPLEX_PAIR if discriminant > 0 else Verdict.REAL_PAIR

    logger.info(f"Pair {indices}: d = {d:.6g}, D = {D:.6g}, |eps H12| = {coupling:.6g} "
                f"vs d/2 = {threshold:.6g} -> {verdict.value}")
    return PairVerdict(lambda0=block.lambda0, tau_product=block.tau_product, h1=h1,
                       discriminant=discriminant, verdict=verdict,
                       validity_radius=1.0 / (block.h1_matrix_norm * block.gap_norm) if block.h1_matrix_norm else float('inf'),
                       epsilon=epsilon, splitting=d, distance=D, coupling=coupling,
                       threshold=threshold, predicted_epsilon_c=predicted, notes=notes)


# ----------------------------------------------------------------------------
# Reality of the whole (trusted) spectrum
# ----------------------------------------------------------------------------

@dataclass
class RealityCertificate:
    """delta, ||H1|| and the radius r0 = delta/||H1|| on the trusted prefix."""
    delta: float
    h1_norm: float
    radius: float
    trusted_count: int
    eigenvalues: np.ndarray
    norm_source: str  # 'sup' or 'matrix'

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius}")

    def to_dict(self) -> Dict:
        return {
            'delta': self.delta,
            'h1_norm': self.h1_norm,
            'norm_source': self.norm_source,
            'radius': self.radius,
            'trusted_count': self.trusted_count,
            'eigenvalues': [float(x) for x in self.eigenvalues],
        }


@dataclass
class SquareVerdict:
    """What was found in the square |Re z - lambda_l| < delta, |Im z| < delta."""
    center: float
    found: List[complex]

    @property
    def count(self) -> int:
        return len(self.found)

    @property
    def max_imag(self) -> float:
        return max((abs(z.imag) for z in self.found), default=0.0)


@dataclass
class RealityReport:
    epsilon: float
    squares: List[SquareVerdict]
    neumann_bound: float  # |eps| ||H1|| / delta, < 1 inside the radius

    def to_dict(self) -> Dict:
        return {
            'epsilon': self.epsilon,
            'neumann_bound': self.neumann_bound,
            'squares': [{'center': s.center,
                         'eigenvalue': _complex_pair(s.found[0]) if s.found else None,
                         'count': s.count} for s in self.squares],
        }


def appears_bounded(family: OperatorFamily, radii=(1e1, 1e2, 1e3), samples: int = 16) -> bool:
    """Growth test for W far from the basis center (PT form only)."""
    spec = family.spec
    if spec is None or spec.perturbation != PerturbationForm.PT:
        return True
    dimension = spec.basis.dimension
    rng = np.random.default_rng(7)
    directions = rng.normal(size=(samples, dimension))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    if dimension == 1:
        directions = np.array([[1.0], [-1.0]])
    center = np.asarray(spec.basis.centers)
    maxima = []
    for r in radii:
        points = center + r * directions
        try:
            values = spec.W.on_grid([points[:, i] for i in range(dimension)])
        except EvalError:
            return False
        maxima.append(float(np.max(np.abs(values))))
    return maxima[-1] <= 2.0 * maxima[0] + 1e-12


def reality_radius(family: OperatorFamily, trusted_count: int,
                   decomposition: Optional[SpectralDecomposition] = None) -> RealityCertificate:
    """
    r0 = delta/||H1|| over the first trusted_count eigenvalues of H0.

    Raises:
        SimplicityError: listing every clustered pair in the trusted prefix
        UnsupportedHypothesis: for an unbounded W in PT form
    """
    if trusted_count < 2:
        raise ValueError(f"Need at least two trusted eigenvalues, got {trusted_count}")
    decomposition = decomposition or family.h0_spectrum()
    levels = decomposition.real_eigenvalues()[:trusted_count]
    gaps = np.diff(levels)
    clustered = [(int(i), int(i + 1), float(levels[i]))
                 for i in np.flatnonzero(gaps <= default_cluster_tolerance(levels[:-1]))]
    if clustered:
        raise SimplicityError(clustered)

    if not appears_bounded(family):
        raise UnsupportedHypothesis(f"W = {family.spec.W.source} is unbounded; the reality radius needs a bounded H1")

    norm = h1_operator_norm(family)
    source = 'matrix' if norm.sup_bound is None else 'sup'
    h1_norm = norm.conservative
    delta = float(np.min(gaps)) / 2.0
    radius = delta / h1_norm if h1_norm > 0 else float('inf')
    logger.info(f"Reality radius: delta = {delta:.8g}, ||H1|| = {h1_norm:.8g} ({source}), r0 = {radius:.8g}")
    return RealityCertificate(delta=delta, h1_norm=h1_norm, radius=radius,
                              trusted_count=trusted_count, eigenvalues=levels.copy(),
                              norm_source=source)


def verify_reality(family: OperatorFamily, epsilon: float,
                   certificate: RealityCertificate) -> RealityReport:
    """
    Diagonalize H(eps) and check one real eigenvalue per square Q_l(delta).

    Raises:
        ValueError: if |eps| is not below the certificate radius
        RealityViolation: for the first square that is empty, crowded or
            holds an eigenvalue with |Im| > 1e-8 (1 + |lambda_l|)
    """
    if abs(epsilon) >= certificate.radius:
        raise ValueError(f"|eps| = {abs(epsilon)} is not below the reality radius {certificate.radius}")
    spectrum = eigenvalues_only(evaluate_at(family, epsilon))
    delta = certificate.delta

    squares = []
    for center in certificate.eigenvalues:
        inside = spectrum[(np.abs(spectrum.real - center) < delta) & (np.abs(spectrum.imag) < delta)]
        square = SquareVerdict(center=float(center), found=[complex(z) for z in inside])
        if square.count != 1 or square.max_imag > SQUARE_IMAG_TOLERANCE * (1.0 + abs(center)):
            raise RealityViolation(float(center), square.found)
        squares.append(square)

    neumann = abs(epsilon) * certificate.h1_norm / delta
    logger.debug(f"eps = {epsilon}: {len(squares)} squares verified, Neumann bound {neumann:.3g}")
    return RealityReport(epsilon=epsilon, squares=squares, neumann_bound=neumann)


def trusted_prefix(spec: ProblemSpec, growth: float = 1.25,
                   tolerance: float = TRUSTED_SHIFT) -> int:
    """
    Number of leading eigenvalues of H0 that move by less than `tolerance`
    when the basis grows by `growth`.
    """
    if spec.perturbation == PerturbationForm.MATRIX:
        logger.info("Matrix-form family: every eigenvalue is taken as exact")
        return spec.basis.size

    order = spec.quadrature_order
    grown = dataclasses.replace(
        spec, basis=spec.basis.grown(growth),
        quadrature_order=None if order is None else int(np.ceil(order * growth)))
    coarse = eig_symmetric(assemble_h0(spec)).real_eigenvalues()
    fine = eig_symmetric(assemble_h0(grown)).real_eigenvalues()[:len(coarse)]
    moved = np.abs(fine - coarse) >= tolerance
    count = int(np.argmax(moved)) if np.any(moved) else len(coarse)
    logger.info(f"Trusted prefix: {count} of {len(coarse)} eigenvalues stable under growth {growth}")
    return count


@dataclass
class GrowthFit:
    """lambda_n ~ C (n + 1/2)^exponent over a range of level indices."""
    exponent: float
    prefactor: float
    r_squared: float
    first_index: int
    last_index: int

    def to_dict(self) -> Dict:
        return dataclasses.asdict(self)


def expected_growth_exponent(m: int) -> float:
    """2m/(m+1) for V = k x^(2m)."""
    return 2.0 * m / (m + 1.0)


def growth_fit(eigenvalues: np.ndarray, first_index: Optional[int] = None) -> GrowthFit:
    """Least-squares fit of log lambda_n against log(n + 1/2), default over the upper half."""
    values = np.real(np.asarray(eigenvalues))
    count = len(values)
    first = count // 2 if first_index is None else first_index
    if count - first < 3:
        raise ValueError(f"Need at least 3 levels to fit growth, got {count - first}")
    n = np.arange(first, count)
    x = np.log(n + 0.5)
    y = np.log(values[first:])
    slope, intercept = np.polyfit(x, y, 1)
    prediction = slope * x + intercept
    r_squared = 1.0 - float(np.sum((y - prediction) ** 2) / np.sum((y - y.mean()) ** 2))
    return GrowthFit(exponent=float(slope), prefactor=float(np.exp(intercept)),
                     r_squared=r_squared, first_index=first, last_index=count - 1)
