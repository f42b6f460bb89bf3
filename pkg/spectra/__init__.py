"""
Spectra of J-symmetric perturbed operator families H(eps) = H0 + eps*H1.

This package contains one module per stage of a study:
- Expression Parser: potentials V(x) and perturbations W(x) from text
- Basis & Quadrature: scaled Hermite bases, Gauss-Hermite rules, FD oracle
- Linear Algebra: eigen-decompositions, bordered solves, operator norms
- Operator Assembly: (H0, H1, J) with intertwining residuals
- Grushin Reduction: canonical tau-basis and the 2x2 corner E-+(z)
- Criteria: complex-pair and reality verdicts with their certificates
- Sweep: eigenvalue trajectories, exceptional points, splitting laws
- Config / Matrix files / Cache: the run-time plumbing for the CLI
"""

__version__ = "1.0.0"

from .errors import (
    SpectraError,
    OperationalError,
    HypothesisViolation,
)
from .expr_parser import Expression, Parity, compile_expression, detect_parity
from .basis import HermiteBasis, FDGrid, QuadratureRule, gauss_hermite
from .linalg import SpectralDecomposition, eig_symmetric, eig_complex, solve, op_norm
from .operators import (
    ProblemSpec,
    OperatorFamily,
    PerturbationForm,
    assemble,
    evaluate_at,
    h1_operator_norm
)
from .grushin import (
    DegenerateBlock,
    GrushinOperators,
    RootClass,
    degenerate_block,
    near_degenerate_block,
    grushin_operators,
    eigenvalues_near
)
from .criteria import (
    PairVerdict,
    RealityCertificate,
    Verdict,
    classify_degenerate,
    classify_near_degenerate,
    reality_radius,
    verify_reality,
    trusted_prefix
)
from .sweep import SweepTrace, sweep, locate_exceptional_point, fit_splitting_law
from .config import RunConfig, load_config
from .cache import EigenCache

__all__ = [
    # Errors
    'SpectraError',
    'OperationalError',
    'HypothesisViolation',

    # Inputs and discretization
    'Expression',
    'Parity',
    'compile_expression',
    'detect_parity',
    'HermiteBasis',
    'FDGrid',
    'QuadratureRule',
    'gauss_hermite',

    # Kernels
    'SpectralDecomposition',
    'eig_symmetric',
    'eig_complex',
    'solve',
    'op_norm',

    # Operator families
    'ProblemSpec',
    'OperatorFamily',
    'PerturbationForm',
    'assemble',
    'evaluate_at',
    'h1_operator_norm',

    # Grushin reduction
    'DegenerateBlock',
    'GrushinOperators',
    'RootClass',
    'degenerate_block',
    'near_degenerate_block',
    'grushin_operators',
    'eigenvalues_near',

    # Criteria
    'PairVerdict',
    'RealityCertificate',
    'Verdict',
    'classify_degenerate',
    'classify_near_degenerate',
    'reality_radius',
    'verify_reality',
    'trusted_prefix',

    # Sweeps
    'SweepTrace',
    'sweep',
    'locate_exceptional_point',
    'fit_splitting_law',

    # Run plumbing
    'RunConfig',
    'load_config',
    'EigenCache'
]
