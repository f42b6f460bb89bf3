#!/usr/bin/env python3
"""
Test the expression parser.

Covers tokenizing, precedence, evaluation, error positions, source
round-trips and numerical parity detection.
"""

import sys

import numpy as np
import pytest

from spectra.errors import EvalError, LexError, ParseError
from spectra.expr_parser import (BinaryOp, Constant, Negate, Parity, TokenKind, Variable,
                                 compile_expression, detect_parity, evaluate, parse, to_source,
                                 tokenize)

OSCILLATOR2D_W = "x1^2*x2/(1+x1^2+x2^2)"


def test_tokenize():
    """Tokens come out in source order with their spans."""
    print("=" * 60)
    print("Testing tokenize")
    print("=" * 60)

    tokens = tokenize("x1^2")
    assert [t.kind for t in tokens] == [TokenKind.IDENTIFIER, TokenKind.OPERATOR, TokenKind.NUMBER]
    assert [t.text for t in tokens] == ['x1', '^', '2']
    assert [(t.start, t.end) for t in tokens] == [(0, 2), (2, 3), (3, 4)]

    tokens = tokenize("1+2*3")
    assert len(tokens) == 5
    assert ''.join(t.text for t in tokens) == "1+2*3"

    tokens = tokenize("  1.5e-3 * x ")
    assert tokens[0].text == "1.5e-3"
    print(f"✓ {len(tokens)} tokens, whitespace dropped")

    with pytest.raises(LexError) as error:
        tokenize("x1 @ 2")
    assert error.value.position == 3
    assert error.value.character == '@'
    print(f"✓ LexError: {error.value}")


def test_precedence():
    """'^' binds tighter than unary minus, which binds tighter than '*'."""
    print("\n" + "=" * 60)
    print("Testing precedence and associativity")
    print("=" * 60)

    tree = parse(tokenize("-x1^2"), dimension=2)
    assert tree == Negate(BinaryOp('^', Variable(1, 'x1'), Constant(2.0)))
    assert evaluate(tree, (3.0, 0.0)) == -9.0

    assert evaluate(compile_expression("2^3^2").ast, ()) == 512.0
    assert evaluate(compile_expression("8-4-2").ast, ()) == 2.0
    assert evaluate(compile_expression("8/4/2").ast, ()) == 1.0
    assert evaluate(compile_expression("1+2*3").ast, ()) == 7.0
    assert evaluate(compile_expression("-2*3").ast, ()) == -6.0
    print("✓ 2^3^2 = 512, 8-4-2 = 2, 8/4/2 = 1, -x1^2 = -(x1^2)")


def test_parse_errors():
    print("\n" + "=" * 60)
    print("Testing parse errors")
    print("=" * 60)

    cases = {
        "1+": 2,
        "(x+1": 4,
        "x y": 2,
        "x^x": 2,
        "x^-1": 2,
        "x^0.5": 2,
        "foo(x)": 0,
    }
    for source, position in cases.items():
        with pytest.raises(ParseError) as error:
            compile_expression(source)
        assert error.value.position == position, (source, error.value.position)
        print(f"✓ {source!r}: {error.value}")

    with pytest.raises(ParseError):
        compile_expression("x2", dimension=1)
    with pytest.raises(ParseError):
        compile_expression("x3", dimension=2)
    with pytest.raises(ParseError):
        compile_expression("sin(x, x)")


def test_evaluate():
    print("\n" + "=" * 60)
    print("Testing evaluation")
    print("=" * 60)

    W = compile_expression(OSCILLATOR2D_W, dimension=2)
    assert W((1.0, 1.0)) == pytest.approx(1.0 / 3.0, rel=1e-15)
    assert compile_expression("x^2*(1+x)^2")((-1.0,)) == 0.0
    assert compile_expression("x/(1+x^2)")((1.0,)) == 0.5
    assert compile_expression("exp(-x^2) + tanh(0) + abs(-2) + sqrt(4)")((0.0,)) == 5.0
    print(f"✓ W(1,1) = {W((1.0, 1.0))}")

    with pytest.raises(EvalError):
        compile_expression("1/x")((0.0,))
    with pytest.raises(EvalError):
        compile_expression("sqrt(x)")((-1.0,))
    print("✓ Division by zero and sqrt(-1) raise EvalError")

    grid = np.linspace(-3.0, 3.0, 7)
    values = compile_expression("x/(1+x^2)").on_grid([grid])
    assert np.array_equal(values, grid / (1 + grid ** 2))
    again = compile_expression("x/(1+x^2)").on_grid([grid])
    assert np.array_equal(values, again)
    print("✓ Vectorized evaluation is bit-identical across calls")


def test_round_trip():
    """Printed source re-parses to the same tree."""
    print("\n" + "=" * 60)
    print("Testing source round-trip")
    print("=" * 60)

    sources = [
        (OSCILLATOR2D_W, 2),
        ("-x1^2", 2),
        ("2^3^2", 1),
        ("x^2*(1+x)^2 - 1e-05/(2+cos(x))", 1),
        ("(x1^2 + 4*x2^2)/2", 2),
        ("--x", 1),
    ]
    for source, dimension in sources:
        tree = compile_expression(source, dimension).ast
        printed = to_source(tree)
        assert parse(tokenize(printed), dimension) == tree, source
        print(f"✓ {source} -> {printed}")


def test_detect_parity():
    print("\n" + "=" * 60)
    print("Testing parity detection")
    print("=" * 60)

    W = compile_expression(OSCILLATOR2D_W, dimension=2)
    assert detect_parity(W.ast, (0, 1)) == Parity.ODD
    assert detect_parity(W.ast, (1, 0)) == Parity.EVEN
    assert detect_parity(compile_expression("(x1^2 + 4*x2^2)/2", 2).ast, (0, 1)) == Parity.EVEN

    double_well = compile_expression("x^2*(1+x)^2").ast
    assert detect_parity(double_well, (1,)) == Parity.NEITHER
    assert detect_parity(double_well, (1,), center=(-0.5,)) == Parity.EVEN
    shifted_w = compile_expression("(x+0.5)/(1+(x+0.5)^2)").ast
    assert detect_parity(shifted_w, (1,), center=(-0.5,)) == Parity.ODD
    print("✓ Double well is even about -1/2, not about 0")

    assert detect_parity(compile_expression("0").ast, (1,)) == Parity.EVEN
    assert detect_parity(compile_expression("x - x").ast, (1,)) == Parity.EVEN
    print("✓ Zero function reported even")

    with pytest.raises(ValueError):
        detect_parity(double_well, (1,), sample_count=16)


def test_detect_parity_constructed():
    """f(x) - f(-x) is odd and f(x) + f(-x) is even for random polynomials."""
    print("\n" + "=" * 60)
    print("Testing parity of constructed polynomials")
    print("=" * 60)

    rng = np.random.default_rng(11)
    for trial in range(20):
        degree = int(rng.integers(1, 7))
        coefficients = rng.normal(size=degree + 1)

        def polynomial(variable):
            return " + ".join(f"({float(c)!r})*{variable}^{k}" for k, c in enumerate(coefficients))

        odd = compile_expression(f"{polynomial('x')} - ({polynomial('(-x)')})").ast
        even = compile_expression(f"{polynomial('x')} + ({polynomial('(-x)')})").ast
        assert detect_parity(odd, (1,)) in (Parity.ODD, Parity.EVEN)
        assert detect_parity(even, (1,)) == Parity.EVEN
        if np.any(coefficients[1::2] != 0):
            assert detect_parity(odd, (1,)) == Parity.ODD
    print("✓ 20 random polynomials classified consistently")


def main():
    test_tokenize()
    test_precedence()
    test_parse_errors()
    test_evaluate()
    test_round_trip()
    test_detect_parity()
    test_detect_parity_constructed()
    print("\n✅ All expression parser tests passed!")
    return 0


if __name__ == "__main__":
    sys.exit(main())
