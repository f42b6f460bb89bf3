"""
Expression Parser - Potentials V(x) and perturbations W(x) from plain text.

Users write potentials the way they would by hand, e.g.

    x1^2*x2/(1+x1^2+x2^2)
    x^2*(1+x)^2

This module turns such strings into a small immutable AST that can be
evaluated at single points or, vectorized, on whole quadrature grids.

Grammar (precedence from loosest to tightest):
- '+' '-'            binary, left-associative
- '*' '/'            binary, left-associative
- unary '-'
- '^'                right-associative, exponent must fold to an integer >= 0
- atoms: numbers, variables (x | x1 | x2), calls exp/tanh/sin/cos/sqrt/abs,
  parenthesized expressions
"""

import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import EvalError, LexError, ParseError

logger = logging.getLogger(__name__)


class TokenKind(Enum):
    """Lexical categories of the expression grammar."""
    NUMBER = "number"
    IDENTIFIER = "identifier"
    OPERATOR = "operator"
    LPAREN = "lparen"
    RPAREN = "rparen"
    COMMA = "comma"


@dataclass(frozen=True)
class Token:
    """One lexeme with its [start, end) character span in the source."""
    kind: TokenKind
    text: str
    start: int
    end: int


class Parity(Enum):
    """Behaviour of a function under a reflection of its arguments."""
    EVEN = "even"
    ODD = "odd"
    NEITHER = "neither"


# AST nodes. All frozen, so trees are hashable values and safe to share.

@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Variable:
    index: int  # 1-based coordinate index
    name: str


@dataclass(frozen=True)
class Negate:
    operand: "ExprAst"


@dataclass(frozen=True)
class BinaryOp:
    op: str
    left: "ExprAst"
    right: "ExprAst"


@dataclass(frozen=True)
class Call:
    name: str
    args: Tuple["ExprAst", ...]


ExprAst = Union[Constant, Variable, Negate, BinaryOp, Call]

FUNCTIONS = {
    'exp': np.exp,
    'tanh': np.tanh,
    'sin': np.sin,
    'cos': np.cos,
    'sqrt': np.sqrt,
    'abs': np.abs,
}

_TOKEN_PATTERN = re.compile(
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<identifier>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<operator>[-+*/^])"
    r"|(?P<lparen>\()"
    r"|(?P<rparen>\))"
    r"|(?P<comma>,)"
)


@dataclass(frozen=True)
class Expression:
    """
    A parsed expression together with its source and metadata.

    declared_parity is whatever the user asserted in the config (or None);
    detect_parity() gives the numerically observed one.
    """
    source: str
    ast: ExprAst
    dimension: int
    declared_parity: Optional[Parity] = None

    def __call__(self, point: Sequence[float]) -> float:
        return evaluate(self.ast, point)

    def on_grid(self, coordinates: Sequence[np.ndarray]) -> np.ndarray:
        return evaluate_points(self.ast, coordinates)

    def __str__(self) -> str:
        return self.source


def tokenize(source: str) -> List[Token]:
    """
    Split source text into tokens.

    Args:
        source: Non-empty expression text

    Returns:
        Tokens in source order; whitespace is dropped

    Raises:
        LexError: on any character outside the grammar
    """
    if not source or not source.strip():
        raise LexError(0, "")

    tokens = []
    position = 0
    while position < len(source):
        if source[position].isspace():
            position += 1
            continue
        match = _TOKEN_PATTERN.match(source, position)
        if match is None:
            raise LexError(position, source[position])
        kind = TokenKind(match.lastgroup)
        tokens.append(Token(kind, match.group(), match.start(), match.end()))
        position = match.end()
    return tokens


class _PrattParser:
    """Precedence-climbing parser over a token list."""

    # Left binding powers
    BINARY_POWER = {'+': 10, '-': 10, '*': 20, '/': 20, '^': 40}
    UNARY_POWER = 30

    def __init__(self, tokens: List[Token], dimension: int, source_length: int):
        self.tokens = tokens
        self.dimension = dimension
        self.position = 0
        self.end_position = source_length

    def _peek(self) -> Optional[Token]:
        if self.position < len(self.tokens):
            return self.tokens[self.position]
        return None

    def _advance(self) -> Token:
        token = self._peek()
        if token is None:
            raise ParseError(self.end_position, "operand")
        self.position += 1
        return token

    def _where(self) -> int:
        token = self._peek()
        return token.start if token is not None else self.end_position

    def _left_power(self, token: Optional[Token]) -> int:
        if token is not None and token.kind is TokenKind.OPERATOR:
            return self.BINARY_POWER[token.text]
        return 0

    def parse(self) -> ExprAst:
        tree = self.expression(0)
        if self._peek() is not None:
            raise ParseError(self._where(), "operator or end of input")
        return tree

    def expression(self, right_power: int) -> ExprAst:
        left = self._prefix(self._advance())
        while right_power < self._left_power(self._peek()):
            operator = self._advance()
            left = self._infix(operator, left)
        return left

    def _prefix(self, token: Token) -> ExprAst:
        if token.kind is TokenKind.NUMBER:
            return Constant(float(token.text))
        if token.kind is TokenKind.IDENTIFIER:
            return self._identifier(token)
        if token.kind is TokenKind.LPAREN:
            inner = self.expression(0)
            self._expect(TokenKind.RPAREN, "')'")
            return inner
        if token.kind is TokenKind.OPERATOR and token.text == '-':
            return Negate(self.expression(self.UNARY_POWER))
        raise ParseError(token.start, "number, variable, function call or '('")

    def _infix(self, operator: Token, left: ExprAst) -> ExprAst:
        op = operator.text
        if op == '^':
            exponent_start = self._where()
            right = self.expression(self.BINARY_POWER['^'] - 1)
            return BinaryOp('^', left, _fold_exponent(right, exponent_start))
        right = self.expression(self.BINARY_POWER[op])
        return BinaryOp(op, left, right)

    def _identifier(self, token: Token) -> ExprAst:
        name = token.text
        following = self._peek()
        if following is not None and following.kind is TokenKind.LPAREN:
            if name not in FUNCTIONS:
                raise ParseError(token.start, f"one of {', '.join(sorted(FUNCTIONS))}")
            self._advance()
            args = [self.expression(0)]
            while self._peek() is not None and self._peek().kind is TokenKind.COMMA:
                self._advance()
                args.append(self.expression(0))
            self._expect(TokenKind.RPAREN, "')'")
            if len(args) != 1:
                raise ParseError(token.start, f"exactly one argument to {name}")
            return Call(name, tuple(args))
        return Variable(self._variable_index(token), name)

    def _variable_index(self, token: Token) -> int:
        name = token.text
        if name == 'x' and self.dimension == 1:
            return 1
        match = re.fullmatch(r"x([12])", name)
        if match is None:
            expected = "variable x" if self.dimension == 1 else "variable x1 or x2"
            raise ParseError(token.start, expected)
        index = int(match.group(1))
        if index > self.dimension:
            raise ParseError(token.start, f"variable index <= {self.dimension}")
        return index

    def _expect(self, kind: TokenKind, description: str) -> Token:
        token = self._peek()
        if token is None or token.kind is not kind:
            raise ParseError(self._where(), description)
        return self._advance()


def _fold_exponent(exponent: ExprAst, position: int) -> ExprAst:
    """Exponents must be variable-free and fold to a non-negative integer."""
    if max_variable_index(exponent) > 0:
        raise ParseError(position, "constant integer exponent")
    try:
        value = evaluate(exponent, ())
    except EvalError:
        raise ParseError(position, "constant integer exponent")
    if value < 0 or value != int(value):
        raise ParseError(position, "non-negative integer exponent")
    return Constant(float(int(value)))


def parse(tokens: List[Token], dimension: int = 1, source_length: Optional[int] = None) -> ExprAst:
    """
    Build a precedence-correct AST from a token list.

    Args:
        tokens: Output of tokenize()
        dimension: Number of coordinates the expression may use (1 or 2)
        source_length: Length of the source, for end-of-input error positions

    Raises:
        ParseError: on malformed input
    """
    if dimension not in (1, 2):
        raise ValueError(f"dimension must be 1 or 2, got {dimension}")
    if source_length is None:
        source_length = tokens[-1].end if tokens else 0
    return _PrattParser(tokens, dimension, source_length).parse()


def compile_expression(source: str, dimension: int = 1,
                       declared_parity: Optional[Parity] = None) -> Expression:
    """tokenize + parse, wrapped with the source text."""
    tree = parse(tokenize(source), dimension, len(source))
    return Expression(source=source.strip(), ast=tree, dimension=dimension,
                      declared_parity=declared_parity)


def max_variable_index(tree: ExprAst) -> int:
    """Largest coordinate index referenced (0 for constant expressions)."""
    if isinstance(tree, Variable):
        return tree.index
    if isinstance(tree, Negate):
        return max_variable_index(tree.operand)
    if isinstance(tree, BinaryOp):
        return max(max_variable_index(tree.left), max_variable_index(tree.right))
    if isinstance(tree, Call):
        return max((max_variable_index(a) for a in tree.args), default=0)
    return 0


def evaluate_points(tree: ExprAst, coordinates: Sequence[np.ndarray]) -> np.ndarray:
    """
    Vectorized evaluation.

    Args:
        tree: Expression AST
        coordinates: One equally-shaped array per coordinate

    Returns:
        Array of values with the shape of the coordinate arrays

    Raises:
        EvalError: on division by zero or sqrt of a negative number
    """
    columns = [np.asarray(c, dtype=float) for c in coordinates]
    if max_variable_index(tree) > len(columns):
        raise EvalError(f"expression uses x{max_variable_index(tree)} but point has dimension {len(columns)}")
    shape = columns[0].shape if columns else ()
    with np.errstate(over='ignore', invalid='ignore'):
        return np.broadcast_to(_evaluate(tree, columns, shape), shape).astype(float)


def _evaluate(tree: ExprAst, columns: List[np.ndarray], shape: Tuple[int, ...]) -> np.ndarray:
    if isinstance(tree, Constant):
        return np.full(shape, tree.value)
    if isinstance(tree, Variable):
        return columns[tree.index - 1]
    if isinstance(tree, Negate):
        return -_evaluate(tree.operand, columns, shape)
    if isinstance(tree, BinaryOp):
        left = _evaluate(tree.left, columns, shape)
        right = _evaluate(tree.right, columns, shape)
        if tree.op == '+':
            return left + right
        if tree.op == '-':
            return left - right
        if tree.op == '*':
            return left * right
        if tree.op == '/':
            if np.any(right == 0.0):
                raise EvalError("division by zero")
            return left / right
        # '^' with a folded integer exponent
        return np.power(left, int(tree.right.value))
    if isinstance(tree, Call):
        argument = _evaluate(tree.args[0], columns, shape)
        if tree.name == 'sqrt' and np.any(argument < 0.0):
            raise EvalError("sqrt of a negative number")
        return FUNCTIONS[tree.name](argument)
    raise TypeError(f"Unknown node {tree!r}")


def evaluate(tree: ExprAst, point: Sequence[float]) -> float:
    """
    Evaluate at a single point.

    Examples:
        evaluate(W, (1, 1)) == 1/3 for W = x1^2*x2/(1+x1^2+x2^2)
    """
    coordinates = [np.asarray([float(p)]) for p in point]
    if not coordinates:
        if max_variable_index(tree) > 0:
            raise EvalError("point dimension 0 does not cover the variables used")
        return float(_evaluate(tree, [], (1,))[0])
    return float(evaluate_points(tree, coordinates)[0])


def to_source(tree: ExprAst) -> str:
    """Fully parenthesized text that re-parses to the same tree."""
    if isinstance(tree, Constant):
        return repr(tree.value)
    if isinstance(tree, Variable):
        return tree.name
    if isinstance(tree, Negate):
        return f"(-{to_source(tree.operand)})"
    if isinstance(tree, BinaryOp):
        return f"({to_source(tree.left)} {tree.op} {to_source(tree.right)})"
    if isinstance(tree, Call):
        return f"{tree.name}({', '.join(to_source(a) for a in tree.args)})"
    raise TypeError(f"Unknown node {tree!r}")


def reflect_points(points: np.ndarray, reflection: Sequence[int],
                   center: Optional[Sequence[float]] = None) -> np.ndarray:
    """
    Apply x_i -> 2c_i - x_i on every coordinate whose flag j_i is 1.

    Args:
        points: (k, dim) array
        reflection: j-flags per coordinate (0 = keep, 1 = reflect)
        center: Reflection center per coordinate (default origin)
    """
    points = np.asarray(points, dtype=float)
    reflected = points.copy()
    center = np.zeros(points.shape[1]) if center is None else np.asarray(center, dtype=float)
    for i, flag in enumerate(reflection):
        if flag:
            if center[i] == 0.0:
                reflected[:, i] = -points[:, i]
            else:
                reflected[:, i] = 2.0 * center[i] - points[:, i]
    return reflected


def detect_parity(tree: ExprAst, reflection: Sequence[int], sample_count: int = 64,
                  center: Optional[Sequence[float]] = None, seed: int = 1729,
                  radius: float = 3.0, rtol: float = 1e-12) -> Parity:
    """
    Classify f as even/odd under the reflection by random sampling.

    The relation must hold to relative tolerance rtol at every sample.
    The zero function is both even and odd; it is reported EVEN.

    Args:
        tree: Expression AST
        reflection: j-flags per coordinate
        sample_count: Number of random points (>= 32)
        center: Reflection center (default origin)
        seed: Seed for numpy's default_rng, so results are deterministic
        radius: Samples are drawn uniformly from center +- radius

    Returns:
        Parity.EVEN, Parity.ODD or Parity.NEITHER
    """
    if sample_count < 32:
        raise ValueError(f"sample_count must be >= 32, got {sample_count}")
    dimension = len(reflection)
    rng = np.random.default_rng(seed)
    origin = np.zeros(dimension) if center is None else np.asarray(center, dtype=float)
    # dyadic offsets: c + u and its mirror c - u are both exact
    offsets = np.round(rng.uniform(-radius, radius, size=(sample_count, dimension)) * 2.0 ** 20) / 2.0 ** 20
    points = origin + offsets
    mirrored = reflect_points(points, reflection, origin)

    try:
        values = evaluate_points(tree, [points[:, i] for i in range(dimension)])
        values_mirrored = evaluate_points(tree, [mirrored[:, i] for i in range(dimension)])
    except EvalError as e:
        logger.warning(f"Parity detection could not evaluate the expression: {e}")
        return Parity.NEITHER

    scale = np.maximum(np.abs(values), np.abs(values_mirrored))
    if np.all(np.abs(values - values_mirrored) <= rtol * scale):
        return Parity.EVEN
    if np.all(np.abs(values + values_mirrored) <= rtol * scale):
        return Parity.ODD
    return Parity.NEITHER
