#!/usr/bin/env python3
"""
Test Hermite bases, Gauss-Hermite quadrature and the finite-difference oracle.
"""

import sys
from math import gamma

import numpy as np
import pytest

from spectra.basis import (FDGrid, HermiteBasis, fd_operator, gauss_hermite, kinetic_matrix,
                           potential_matrix)
from spectra.errors import EvalError
from spectra.expr_parser import compile_expression

SQRT_PI = np.sqrt(np.pi)


def hamiltonian(basis: HermiteBasis, V: str) -> np.ndarray:
    return kinetic_matrix(basis) + potential_matrix(basis, compile_expression(V, basis.dimension))


def test_gauss_hermite_closed_forms():
    print("=" * 60)
    print("Testing Gauss-Hermite rules")
    print("=" * 60)

    rule = gauss_hermite(2)
    assert np.allclose(rule.nodes, [-1 / np.sqrt(2), 1 / np.sqrt(2)], rtol=0, atol=1e-15)
    assert np.allclose(rule.weights, [SQRT_PI / 2, SQRT_PI / 2], rtol=1e-14)
    print(f"✓ M=2: nodes {rule.nodes}, weights {rule.weights}")

    rule = gauss_hermite(5)
    assert np.sum(rule.weights * rule.nodes ** 4) == pytest.approx(3 * SQRT_PI / 4, rel=1e-13)
    print("✓ M=5 integrates x^4 exactly")

    rule = gauss_hermite(64)
    assert np.sum(rule.weights) == pytest.approx(SQRT_PI, rel=1e-12)
    assert np.sum(rule.weights * rule.nodes ** 2) == pytest.approx(SQRT_PI / 2, rel=1e-12)
    assert np.all(np.diff(rule.nodes) > 0)
    assert np.array_equal(rule.nodes, -rule.nodes[::-1])
    print("✓ M=64: weights sum to sqrt(pi), nodes symmetric and increasing")

    for order in (1, 513):
        with pytest.raises(ValueError):
            gauss_hermite(order)


def test_quadrature_exactness():
    """Random polynomials of degree <= 2M-1 against the analytic moments."""
    print("\n" + "=" * 60)
    print("Testing quadrature exactness")
    print("=" * 60)

    rng = np.random.default_rng(3)
    for order in (3, 6, 8):
        rule = gauss_hermite(order)
        degree = 2 * order - 1
        coefficients = rng.normal(size=degree + 1)
        moments = np.array([0.0 if k % 2 else gamma((k + 1) / 2) for k in range(degree + 1)])
        exact = float(coefficients @ moments)
        computed = float(np.sum(rule.weights * np.polyval(coefficients[::-1], rule.nodes)))
        scale = float(np.abs(coefficients) @ moments)
        assert abs(computed - exact) <= 1e-11 * scale, (order, computed, exact)
        print(f"✓ M={order}: degree {degree} polynomial, error {abs(computed - exact):.2e}")


def test_quadrature_every_order():
    """Every admissible order integrates 1 and the even moments x^2k exactly."""
    print("\n" + "=" * 60)
    print("Testing Gauss-Hermite rules for M = 2..512")
    print("=" * 60)

    for order in range(2, 513):
        rule = gauss_hermite(order)
        assert np.all(rule.weights >= 0) and np.all(np.isfinite(rule.weights)), order
        assert np.sum(rule.weights) == pytest.approx(SQRT_PI, rel=1e-11), order
        for k in range(1, min(order, 8)):
            moment = float(np.sum(rule.weights * rule.nodes ** (2 * k)))
            assert moment == pytest.approx(gamma(k + 0.5), rel=1e-10), (order, k)
    print("✓ Sum of weights is sqrt(pi) and x^2k moments are exact at every order")

    rule = gauss_hermite(512)
    assert rule.weights[0] == 0.0 and rule.scaled_weights[0] > 0
    print("✓ M=512: outermost weights underflow to zero, scaled weights stay positive")


def test_scaled_weights():
    """Weights agree with numpy's hermgauss and the function-form weights."""
    for order in (10, 60, 150):
        rule = gauss_hermite(order)
        nodes, weights = np.polynomial.hermite.hermgauss(order)
        assert np.allclose(rule.nodes, nodes, rtol=0, atol=1e-12)
        assert np.allclose(rule.weights, weights, rtol=1e-8, atol=1e-300)
        assert np.allclose(rule.scaled_weights, rule.weights * np.exp(rule.nodes ** 2), rtol=1e-10)
    print("✓ M=10, 60, 150 agree with numpy.polynomial.hermite.hermgauss")


def test_kinetic_matrix():
    print("\n" + "=" * 60)
    print("Testing kinetic matrices")
    print("=" * 60)

    K = kinetic_matrix(HermiteBasis(dimension=1, modes=10))
    assert K[0, 0] == pytest.approx(0.5, abs=1e-15)
    assert np.array_equal(K, K.T)
    print("✓ <h0| -d^2 |h0> = 1/2")

    basis = HermiteBasis(dimension=1, modes=20, kinetic=0.5)
    H = hamiltonian(basis, "x^2/2")
    assert np.allclose(H, np.diag(np.arange(20) + 0.5), atol=1e-11)
    print("✓ -1/2 d^2 + x^2/2 is diag(n + 1/2) in its own basis")

    basis_2d = HermiteBasis(dimension=2, modes=6, length_scales=(1.0, 0.5), kinetic=0.5)
    K1 = kinetic_matrix(HermiteBasis(dimension=1, modes=6, length_scales=(1.0,), kinetic=0.5))
    K2 = kinetic_matrix(HermiteBasis(dimension=1, modes=6, length_scales=(0.5,), kinetic=0.5))
    expected = np.kron(K1, np.eye(6)) + np.kron(np.eye(6), K2)
    assert np.allclose(kinetic_matrix(basis_2d), expected, rtol=0, atol=1e-14)
    print("✓ 2D kinetic matrix is K1 (x) I + I (x) K2")


def test_potential_matrix():
    print("\n" + "=" * 60)
    print("Testing potential matrices")
    print("=" * 60)

    basis = HermiteBasis(dimension=1, modes=30)
    assert np.allclose(potential_matrix(basis, compile_expression("1")), np.eye(30), atol=1e-12)
    print("✓ f = 1 gives the identity")

    scale = 0.7
    basis = HermiteBasis(dimension=1, modes=12, length_scales=(scale,))
    X = potential_matrix(basis, compile_expression("x"))
    n = np.arange(11)
    assert np.allclose(np.diag(X, 1), np.sqrt((n + 1) / 2) * scale, atol=1e-13)
    assert np.allclose(np.diag(X), 0.0, atol=1e-13)
    assert np.allclose(np.triu(X, 2), 0.0, atol=1e-13)
    print("✓ f = x is tridiagonal with sqrt((n+1)/2)*l")

    basis_2d = HermiteBasis(dimension=2, modes=8, length_scales=(1.0, 0.8))
    assert np.allclose(potential_matrix(basis_2d, compile_expression("1", 2)), np.eye(64), atol=1e-12)
    X1 = potential_matrix(HermiteBasis(dimension=1, modes=8), compile_expression("x"))
    X2 = potential_matrix(HermiteBasis(dimension=1, modes=8, length_scales=(0.8,)), compile_expression("x"))
    assert np.allclose(potential_matrix(basis_2d, compile_expression("x1", 2)), np.kron(X1, np.eye(8)), atol=1e-12)
    assert np.allclose(potential_matrix(basis_2d, compile_expression("x2", 2)), np.kron(np.eye(8), X2), atol=1e-12)
    product = potential_matrix(basis_2d, compile_expression("x1*x2", 2))
    assert np.allclose(product, np.kron(X1, X2), atol=1e-12)
    print("✓ 2D matrices follow the Kronecker ordering")

    with pytest.raises(EvalError):
        potential_matrix(HermiteBasis(dimension=1, modes=4), compile_expression("1/x"), order=9)
    print("✓ Singular f at a node raises EvalError")

    basis = HermiteBasis(dimension=1, modes=20)
    with pytest.raises(ValueError):
        potential_matrix(basis, compile_expression("x^2"), order=39)
    at_floor = potential_matrix(basis, compile_expression("1"), order=40)
    assert np.allclose(at_floor, np.eye(20), atol=1e-12)
    print("✓ Quadrature order below 2*modes is rejected; 2*modes is accepted")


def test_parity_commutes():
    """Even potentials commute with the basis parity matrix."""
    basis = HermiteBasis(dimension=2, modes=10, length_scales=(1.0, 0.7071067811865476), kinetic=0.5)
    H0 = hamiltonian(basis, "(x1^2 + 4*x2^2)/2")
    P = np.diag(basis.parity_signs((0, 1)))
    assert np.max(np.abs(P @ H0 - H0 @ P)) <= 1e-12 * np.max(np.abs(H0))
    assert np.array_equal(basis.parity_signs((0, 1)), np.kron(np.ones(10), (-1.0) ** np.arange(10)))


def test_double_well_convergence():
    """Lowest two levels of -d^2 + x^2(1+x)^2 are stable from N=40 to N=50."""
    print("\n" + "=" * 60)
    print("Testing basis convergence")
    print("=" * 60)

    levels = []
    for modes in (40, 50):
        basis = HermiteBasis(dimension=1, modes=modes, length_scales=(0.75,), centers=(-0.5,))
        levels.append(np.linalg.eigvalsh(hamiltonian(basis, "x^2*(1+x)^2"))[:2])
    assert np.all(np.abs(levels[1] - levels[0]) <= 1e-8)
    print(f"✓ E0, E1 = {levels[1]} (shift {np.max(np.abs(levels[1] - levels[0])):.1e})")


def test_fd_operator():
    print("\n" + "=" * 60)
    print("Testing finite-difference oracle")
    print("=" * 60)

    grid = FDGrid(half_width=10.0, points=400)
    ground = np.linalg.eigvalsh(fd_operator(grid, compile_expression("x^2")))[0]
    assert abs(ground - 1.0) < 1e-3
    print(f"✓ Harmonic ground state {ground:.6f}")

    free = np.linalg.eigvalsh(fd_operator(grid, compile_expression("0")))[:3]
    k = np.arange(1, 4)
    discrete = 2.0 / grid.spacing ** 2 * (1.0 - np.cos(k * np.pi / (grid.points + 1)))
    assert np.allclose(free, discrete, rtol=1e-10)
    assert np.allclose(free, (k * np.pi / 20.0) ** 2, rtol=2e-2)
    print("✓ V = 0 reproduces the Dirichlet Laplacian")

    quartic = np.linalg.eigvalsh(fd_operator(FDGrid(6.0, 800), compile_expression("x^4")))[0]
    assert abs(quartic - 1.0604) < 1e-3
    print(f"✓ Quartic ground state {quartic:.6f}")

    grid = FDGrid(half_width=3.0, points=31, center=-0.5)
    x = grid.coordinates
    assert np.allclose(grid.reflection_matrix() @ x, 2 * grid.center - x, atol=1e-14)
    assert grid.spacing == pytest.approx(0.2)

    with pytest.raises(ValueError):
        FDGrid(half_width=1.0, points=8)


def test_hermite_matches_fd():
    """Lowest levels of the two discretizations agree (FD error ~ h^2 <p^4>/12)."""
    print("\n" + "=" * 60)
    print("Testing Hermite vs finite differences")
    print("=" * 60)

    grid = FDGrid(half_width=12.0, points=800)
    basis = HermiteBasis(dimension=1, modes=40)
    for V in ("x^2", "x^4", "x^4 - 2*x^2"):
        hermite = np.linalg.eigvalsh(hamiltonian(basis, V))[:3]
        fd = np.linalg.eigvalsh(fd_operator(grid, compile_expression(V)))[:3]
        assert np.allclose(hermite, fd, rtol=1e-3, atol=1e-3), (V, hermite, fd)
        print(f"✓ {V}: max difference {np.max(np.abs(hermite - fd)):.1e}")


def test_basis_validation():
    with pytest.raises(ValueError):
        HermiteBasis(dimension=1, modes=3)
    with pytest.raises(ValueError):
        HermiteBasis(dimension=3, modes=10)
    with pytest.raises(ValueError):
        HermiteBasis(dimension=2, modes=10, length_scales=(1.0,))
    with pytest.raises(ValueError):
        HermiteBasis(dimension=1, modes=10, length_scales=(-1.0,))
    basis = HermiteBasis(dimension=2, modes=10, length_scales=(1.0, 1.0))
    assert basis.size == 100
    assert basis.centers == (0.0, 0.0)
    assert basis.grown().modes == 13
    assert basis.default_quadrature_order() == 36


def main():
    test_gauss_hermite_closed_forms()
    test_quadrature_exactness()
    test_quadrature_every_order()
    test_scaled_weights()
    test_kinetic_matrix()
    test_potential_matrix()
    test_parity_commutes()
    test_double_well_convergence()
    test_fd_operator()
    test_hermite_matches_fd()
    test_basis_validation()
    print("\n✅ All basis tests passed!")
    return 0


if __name__ == "__main__":
    sys.exit(main())
