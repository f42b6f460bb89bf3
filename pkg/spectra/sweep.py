"""
Sweep - Eigenvalue trajectories of H(eps) over an eps-grid.

- sweep: diagonalize at each grid point and match eigenvalues between
  consecutive points by minimum total squared distance
- locate_exceptional_point: bisection on the reality of a pair
- fit_splitting_law: tunnelling splitting d of symmetric double wells
  against 1/hbar (or 1/g^2), with the alternative scaling reported too
"""

import dataclasses
import logging
import os
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import linear_sum_assignment

from .basis import HermiteBasis
from .errors import BracketError, ConvergenceError
from .expr_parser import compile_expression
from .grushin import near_degenerate_block
from .linalg import eig_symmetric, eigenvalues_only, spectral_order
from .operators import OperatorFamily, ProblemSpec, assemble, assemble_h0, evaluate_at

logger = logging.getLogger(__name__)

REALITY_TOLERANCE = 1e-10
TIE_TOLERANCE = 1e-12
CONJUGATE_PAIRING = 1e-6
BISECTION_WIDTH = 1e-6
SPLITTING_CONVERGENCE = 1e-8


def is_real(value: complex, scale: Optional[float] = None) -> bool:
    scale = abs(value) if scale is None else scale
    return abs(np.imag(value)) <= REALITY_TOLERANCE * (1.0 + scale)


@dataclass
class MatchingAmbiguity:
    """Two trajectories whose swap costs the same; resolved by index order."""
    epsilon: float
    trajectories: Tuple[int, int]
    values: Tuple[complex, complex]


@dataclass
class ExceptionalPoint:
    """A real pair at eps_low that is a conjugate pair at eps_high."""
    epsilon_low: float
    epsilon_high: float
    trajectories: Tuple[int, int]
    value: float

    def to_dict(self) -> Dict:
        return dataclasses.asdict(self)


@dataclass
class ExceptionalPointEstimate:
    epsilon_c: float
    width: float
    reference: complex
    evaluations: int

    def to_dict(self) -> Dict:
        return {'epsilon_c': self.epsilon_c, 'width': self.width,
                'reference': [self.reference.real, self.reference.imag],
                'evaluations': self.evaluations}


@dataclass
class SweepTrace:
    """Matched trajectories: values[s, k] is trajectory k at epsilons[s]."""
    epsilons: np.ndarray
    values: np.ndarray
    exceptional_points: List[ExceptionalPoint] = field(default_factory=list)
    ambiguities: List[MatchingAmbiguity] = field(default_factory=list)

    def __post_init__(self):
        if self.values.shape[0] != len(self.epsilons):
            raise ValueError("One row of values per grid point is required")
        if len(self.epsilons) > 1 and np.any(np.diff(self.epsilons) <= 0):
            raise ValueError("Sweep grid must be strictly increasing")

    @property
    def trajectory_ids(self) -> np.ndarray:
        return np.arange(self.values.shape[1])

    @property
    def reality_flags(self) -> np.ndarray:
        return np.abs(self.values.imag) <= REALITY_TOLERANCE * (1.0 + np.abs(self.values))

    def to_frame(self) -> pd.DataFrame:
        """Long format: epsilon, trajectory_id, re, im, reality_flag."""
        steps, count = self.values.shape
        return pd.DataFrame({
            'epsilon': np.repeat(self.epsilons, count),
            'trajectory_id': np.tile(self.trajectory_ids, steps),
            're': self.values.real.ravel(),
            'im': self.values.imag.ravel(),
            'reality_flag': self.reality_flags.ravel(),
        })

    def write_csv(self, path: str) -> None:
        self.to_frame().to_csv(path, index=False, float_format='%.17g')

    def write_plot_data(self, directory: str, stem: str = "sweep") -> List[str]:
        """gnuplot tables: one for real parts, one for imaginary parts."""
        os.makedirs(directory, exist_ok=True)
        paths = []
        for part, extract in (('re', np.real), ('im', np.imag)):
            table = pd.DataFrame(extract(self.values), columns=[f"t{k}" for k in self.trajectory_ids])
            table.insert(0, 'epsilon', self.epsilons)
            path = os.path.join(directory, f"{stem}_{part}.dat")
            with open(path, 'w') as handle:
                handle.write('# ' + ' '.join(table.columns) + '\n')
                table.to_csv(handle, sep=' ', header=False, index=False, float_format='%.17g')
            paths.append(path)
        return paths

    def to_dict(self) -> Dict:
        return {
            'steps': len(self.epsilons),
            'trajectories': int(self.values.shape[1]),
            'exceptional_points': [ep.to_dict() for ep in self.exceptional_points],
            'ambiguities': [{'epsilon': a.epsilon, 'trajectories': list(a.trajectories)}
                            for a in self.ambiguities],
        }


def _initial_selection(spectrum: np.ndarray, window: Union[int, Tuple[float, float]]) -> np.ndarray:
    if isinstance(window, (int, np.integer)):
        if window < 1:
            raise ValueError(f"Window count must be positive, got {window}")
        return spectrum[:window]
    low, high = window
    selected = spectrum[(spectrum.real >= low) & (spectrum.real <= high)]
    if selected.size == 0:
        raise ValueError(f"No eigenvalue with real part in [{low}, {high}]")
    return selected


def _match(previous: np.ndarray, candidates: np.ndarray, epsilon: float,
           ambiguities: List[MatchingAmbiguity]) -> np.ndarray:
    cost = np.abs(previous[:, None] - candidates[None, :]) ** 2
    rows, columns = linear_sum_assignment(cost)
    assignment = columns[np.argsort(rows)]

    count = len(previous)
    for a in range(count):
        for b in range(a + 1, count):
            ca, cb = assignment[a], assignment[b]
            kept = cost[a, ca] + cost[b, cb]
            swapped = cost[a, cb] + cost[b, ca]
            if abs(swapped - kept) < TIE_TOLERANCE and ca != cb:
                pair = candidates[[ca, cb]]
                order = spectral_order(pair)
                assignment[a], assignment[b] = (ca, cb) if order[0] == 0 else (cb, ca)
                ambiguities.append(MatchingAmbiguity(epsilon, (a, b), (complex(pair[0]), complex(pair[1]))))
                logger.warning(f"Matching ambiguity at eps = {epsilon:.6g} between trajectories {a} and {b}")
    return candidates[assignment]


def _detect_exceptional_points(epsilons: np.ndarray, values: np.ndarray) -> List[ExceptionalPoint]:
    records = []
    count = values.shape[1]
    for step in range(len(epsilons) - 1):
        before, after = values[step], values[step + 1]
        for i in range(count):
            for j in range(i + 1, count):
                if not (is_real(before[i]) and is_real(before[j])):
                    continue
                if is_real(after[i]) or is_real(after[j]):
                    continue
                if abs(after[i] - np.conj(after[j])) > CONJUGATE_PAIRING * (1.0 + abs(after[i])):
                    continue
                records.append(ExceptionalPoint(float(epsilons[step]), float(epsilons[step + 1]),
                                                (i, j), float(np.mean(after[[i, j]].real))))
    return records


def sweep(family: OperatorFamily, epsilons: Sequence[float],
          window: Union[int, Tuple[float, float]]) -> SweepTrace:
    """
    Trajectories of the eigenvalues in `window` (count of lowest, or a real
    interval at the first grid point) over the grid.
    """
    grid = np.asarray(epsilons, dtype=float)
    if grid.size == 0:
        raise ValueError("Sweep grid is empty")

    ambiguities: List[MatchingAmbiguity] = []
    rows = []
    for index, epsilon in enumerate(grid):
        spectrum = eigenvalues_only(evaluate_at(family, float(epsilon)))
        if index == 0:
            current = _initial_selection(spectrum, window)
        else:
            current = _match(rows[-1], spectrum, float(epsilon), ambiguities)
        rows.append(current)

    values = np.vstack(rows)
    trace = SweepTrace(epsilons=grid, values=values, ambiguities=ambiguities)
    trace.exceptional_points = _detect_exceptional_points(grid, values)
    logger.info(f"Swept {len(grid)} points, {values.shape[1]} trajectories, "
                f"{len(trace.exceptional_points)} exceptional point(s)")
    return trace


def _pair_near(family: OperatorFamily, epsilon: float, reference: complex) -> np.ndarray:
    spectrum = eigenvalues_only(evaluate_at(family, epsilon))
    nearest = np.argsort(np.abs(spectrum - reference), kind='stable')[:2]
    return spectrum[nearest]


def _pair_is_complex(pair: np.ndarray, reference: complex) -> bool:
    return float(np.max(np.abs(pair.imag))) > REALITY_TOLERANCE * (1.0 + abs(reference))


def locate_exceptional_point(family: OperatorFamily, reference: complex,
                             bracket: Tuple[float, float],
                             relative_width: float = BISECTION_WIDTH) -> ExceptionalPointEstimate:
    """
    Bisect on "the two eigenvalues nearest `reference` form a non-real pair".

    Args:
        family: Operator family
        reference: Where the pair sits at the left end (e.g. its midpoint)
        bracket: (eps_low, eps_high), real pair at eps_low and complex at eps_high

    Raises:
        BracketError: if the endpoints do not straddle the transition
    """
    low, high = float(bracket[0]), float(bracket[1])
    if not low < high:
        raise BracketError(f"Empty bracket ({low}, {high})", bracket)

    left_pair = _pair_near(family, low, reference)
    if _pair_is_complex(left_pair, reference):
        raise BracketError(f"Pair near {reference} is already complex at eps = {low}", bracket)
    reference = complex(np.mean(left_pair))
    if not _pair_is_complex(_pair_near(family, high, reference), reference):
        raise BracketError(f"Pair near {reference} is still real at eps = {high}", bracket)

    evaluations = 2
    while high - low > relative_width * high:
        middle = 0.5 * (low + high)
        pair = _pair_near(family, middle, reference)
        evaluations += 1
        if _pair_is_complex(pair, reference):
            high = middle
        else:
            low = middle
            reference = complex(np.mean(pair))

    logger.info(f"Exceptional point at eps = {0.5 * (low + high):.8g} +- {0.5 * (high - low):.1e}")
    return ExceptionalPointEstimate(epsilon_c=0.5 * (low + high), width=high - low,
                                    reference=reference, evaluations=evaluations)


# ----------------------------------------------------------------------------
# Double wells
# ----------------------------------------------------------------------------

def double_well_hbar(hbar: float, modes: int = 60, W: Optional[str] = None) -> ProblemSpec:
    """
    -hbar^2 d^2/dx^2 + x^2 (1+x)^2, wells at 0 and -1, reflection about -1/2.

    The basis is centered at the midpoint with length scale sqrt(hbar).
    """
    if hbar <= 0:
        raise ValueError(f"hbar must be positive, got {hbar}")
    basis = HermiteBasis(dimension=1, modes=modes, length_scales=(float(np.sqrt(hbar)),),
                         kinetic=hbar ** 2, centers=(-0.5,))
    return ProblemSpec(basis=basis,
                       V=compile_expression("x^2*(1+x)^2"),
                       W=compile_expression(W or "(x+0.5)/(1+(x+0.5)^2)"),
                       reflection=(1,), label=f"double well hbar={hbar:g}")


def double_well_g(g: float, modes: int = 60, W: Optional[str] = None) -> ProblemSpec:
    """-d^2/dx^2 + x^2 (1+gx)^2, wells at 0 and -1/g, reflection about -1/(2g)."""
    if g <= 0:
        raise ValueError(f"g must be positive, got {g}")
    shift = 1.0 / (2.0 * g)
    basis = HermiteBasis(dimension=1, modes=modes, length_scales=(1.0,), kinetic=1.0,
                         centers=(-shift,))
    default_w = f"(x+{shift!r})/(1+(x+{shift!r})^2)"
    return ProblemSpec(basis=basis,
                       V=compile_expression(f"x^2*(1+{float(g)!r}*x)^2"),
                       W=compile_expression(W or default_w),
                       reflection=(1,), label=f"double well g={g:g}")


GENERATORS: Dict[str, Callable[..., ProblemSpec]] = {
    'hbar': double_well_hbar,
    'g': double_well_g,
}


@dataclass
class SplittingSample:
    parameter: float
    levels: Tuple[float, float]
    splitting: float
    h12: float
    predicted_epsilon_c: float  # d / (2|H12|)


@dataclass
class SplittingFit:
    """log d = slope * abscissa + intercept, under two candidate scalings."""
    family: str
    samples: List[SplittingSample]
    slope: float
    intercept: float
    r_squared: float
    alternate_slope: float
    alternate_r_squared: float
    abscissa: str
    alternate_abscissa: str

    def to_dict(self) -> Dict:
        data = dataclasses.asdict(self)
        data['samples'] = [dataclasses.asdict(s) for s in self.samples]
        return data


def _linear_fit(x: np.ndarray, y: np.ndarray) -> Tuple[float, float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    r_squared = 1.0 - float(np.sum(residual ** 2) / np.sum((y - y.mean()) ** 2))
    return float(slope), float(intercept), r_squared


def splitting_sample(spec: ProblemSpec, parameter: float, growth: float = 1.25) -> SplittingSample:
    """
    d = E1 - E0 and |H12| for one double well, checked under basis growth.

    Raises:
        ConvergenceError: when E0 or E1 moves by more than 1e-8 (1 + |E|)
    """
    grown = dataclasses.replace(spec, basis=spec.basis.grown(growth))
    coarse = eig_symmetric(assemble_h0(spec)).real_eigenvalues()[:2]
    fine = eig_symmetric(assemble_h0(grown)).real_eigenvalues()[:2]
    drift = np.abs(fine - coarse)
    if np.any(drift > SPLITTING_CONVERGENCE * (1.0 + np.abs(coarse))):
        raise ConvergenceError(f"Lowest levels not converged at parameter {parameter}: drift {drift.max():.2e}")

    family = assemble(spec)
    block = near_degenerate_block(family, (0, 1))
    h12 = float(abs(block.h1[1, 0]))
    d = float(coarse[1] - coarse[0])
    if d <= 0:
        raise ConvergenceError(f"Non-positive splitting {d} at parameter {parameter}")
    return SplittingSample(parameter=float(parameter), levels=(float(coarse[0]), float(coarse[1])),
                           splitting=d, h12=h12,
                           predicted_epsilon_c=d / (2.0 * h12) if h12 > 0 else float('inf'))


def fit_splitting_law(family: str, values: Sequence[float], modes: int = 60,
                      W: Optional[str] = None) -> SplittingFit:
    """
    Fit log d against 1/hbar (hbar family) or 1/g^2 (g family); the other
    power (1/hbar^2, resp. 1/g) is fitted alongside for comparison.

    Raises:
        ValueError: with fewer than 5 parameter values
        ConvergenceError: when a sample's lowest levels are not converged
    """
    if family not in GENERATORS:
        raise ValueError(f"Unknown double-well family {family!r}; use one of {sorted(GENERATORS)}")
    if len(values) < 5:
        raise ValueError(f"Need at least 5 parameter values, got {len(values)}")

    generator = GENERATORS[family]
    samples = [splitting_sample(generator(p, modes, W), p) for p in values]
    p = np.array([s.parameter for s in samples])
    log_d = np.log([s.splitting for s in samples])

    if family == 'hbar':
        primary, alternate = 1.0 / p, 1.0 / p ** 2
        names = ('1/hbar', '1/hbar^2')
    else:
        primary, alternate = 1.0 / p ** 2, 1.0 / p
        names = ('1/g^2', '1/g')

    slope, intercept, r_squared = _linear_fit(primary, log_d)
    alt_slope, _, alt_r_squared = _linear_fit(alternate, log_d)
    logger.info(f"Splitting law ({family}): log d = {slope:.4f} * {names[0]} + {intercept:.4f}, "
                f"R^2 = {r_squared:.5f} (vs {alt_r_squared:.5f} for {names[1]})")
    return SplittingFit(family=family, samples=samples, slope=slope, intercept=intercept,
                        r_squared=r_squared, alternate_slope=alt_slope,
                        alternate_r_squared=alt_r_squared,
                        abscissa=names[0], alternate_abscissa=names[1])
