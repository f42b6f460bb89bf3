"""
Exception hierarchy for the spectral toolkit.

Two families are kept apart so the front end can tell "the program failed"
(exit code 1) from "the mathematics said no" (exit code 2):

- OperationalError: lexing/parsing, floating-point breakdowns, bad files
- HypothesisViolation: a hypothesis of the requested criterion does not hold for the input
"""

from typing import Any, List, Optional, Sequence


class SpectraError(Exception):
    """Base class for every error raised by the toolkit."""

    exit_code = 1


class OperationalError(SpectraError):
    """Something went wrong while computing; the inputs may be fine."""

    exit_code = 1


class HypothesisViolation(SpectraError):
    """A hypothesis of the criterion being checked does not hold."""

    exit_code = 2


# Expression parser

class LexError(OperationalError):
    def __init__(self, position: int, character: str):
        self.position = position
        self.character = character
        super().__init__(f"Unexpected character {character!r} at position {position}")


class ParseError(OperationalError):
    def __init__(self, position: int, expected: str):
        self.position = position
        self.expected = expected
        super().__init__(f"Parse error at position {position}: expected {expected}")


class EvalError(OperationalError):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"Evaluation failed: {reason}")


# Numerical kernels

class ConvergenceError(OperationalError):
    def __init__(self, message: str, iterations: Optional[int] = None):
        self.iterations = iterations
        super().__init__(message)


class SingularError(OperationalError):
    def __init__(self, pivot_magnitude: float):
        self.pivot_magnitude = pivot_magnitude
        super().__init__(f"Matrix is numerically singular (pivot magnitude {pivot_magnitude:.3e})")


class AssemblyError(OperationalError):
    def __init__(self, message: str, cause: Optional[BaseException] = None):
        self.cause = cause
        super().__init__(message)


class DivergenceError(OperationalError):
    def __init__(self, contraction: float):
        self.contraction = contraction
        super().__init__(f"Series diverges: contraction K = {contraction:.4g} >= 1")


class NewtonDivergence(OperationalError):
    def __init__(self, seed: complex, residual: float):
        self.seed = seed
        self.residual = residual
        super().__init__(f"Newton iteration from seed {seed:.10g} stalled at |det| = {residual:.3e}")


class BracketError(OperationalError):
    def __init__(self, message: str, bracket: Sequence[float] = ()):
        self.bracket = tuple(bracket)
        super().__init__(message)


# I/O

class ConfigError(OperationalError):
    def __init__(self, line: Optional[int], message: str):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class FormatError(OperationalError):
    def __init__(self, line: int, message: str = "malformed matrix file"):
        self.line = line
        super().__init__(f"line {line}: {message}")


# Hypothesis violations

class MultiplicityError(HypothesisViolation):
    def __init__(self, count: int, lambda0: Optional[float] = None):
        self.count = count
        self.lambda0 = lambda0
        super().__init__(f"Eigenvalue cluster near {lambda0} has size {count}; expected 1 or 2")


class DegenerateFormError(HypothesisViolation):
    def __init__(self, determinant: float):
        self.determinant = determinant
        super().__init__(f"Quadratic form (Ju|u) is degenerate on the eigenspace (|det G| = {determinant:.3e})")


class SymmetryViolation(HypothesisViolation):
    def __init__(self, residual: float, what: str = "J-symmetry"):
        self.residual = residual
        self.what = what
        super().__init__(f"{what} violated: residual {residual:.3e}")


class SimplicityError(HypothesisViolation):
    def __init__(self, pairs: List[Any]):
        self.pairs = list(pairs)
        super().__init__(f"Spectrum is not simple; clustered eigenvalues: {self.pairs}")


class RealityViolation(HypothesisViolation):
    def __init__(self, lambda_l: float, found: Any):
        self.lambda_l = lambda_l
        self.found = found
        super().__init__(f"Square around {lambda_l:.10g} does not hold exactly one real eigenvalue (found {found})")


class UnsupportedHypothesis(HypothesisViolation):
    def __init__(self, message: str):
        super().__init__(message)
