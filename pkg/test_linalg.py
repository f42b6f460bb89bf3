#!/usr/bin/env python3
"""
Test the dense linear-algebra kernels.
"""

import sys

import numpy as np
import pytest

from spectra.basis import HermiteBasis, kinetic_matrix, potential_matrix
from spectra.errors import SingularError
from spectra.expr_parser import compile_expression
from spectra.linalg import eig_complex, eig_symmetric, eigenvalues_only, op_norm, solve, spectral_order


def test_eig_symmetric():
    print("=" * 60)
    print("Testing eig_symmetric")
    print("=" * 60)

    decomposition = eig_symmetric(np.diag([3.0, 1.0, 2.0]))
    assert np.array_equal(decomposition.real_eigenvalues(), [1.0, 2.0, 3.0])
    permutation = np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], dtype=float)
    assert np.array_equal(decomposition.eigenvectors, permutation)
    print("✓ diag(3,1,2) -> (1,2,3) with permutation eigenvectors")

    decomposition = eig_symmetric(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(decomposition.real_eigenvalues(), [-1.0, 1.0], atol=1e-15)
    vectors = decomposition.eigenvectors
    assert np.allclose(np.abs(vectors), 1 / np.sqrt(2), atol=1e-15)
    assert vectors[0, 0] * vectors[1, 0] < 0 < vectors[0, 1] * vectors[1, 1]
    print("✓ [[0,1],[1,0]] -> (-1, 1), vectors (1, -+1)/sqrt(2)")

    basis = HermiteBasis(dimension=1, modes=25, kinetic=0.5)
    H = kinetic_matrix(basis) + potential_matrix(basis, compile_expression("x^2/2"))
    decomposition = eig_symmetric(H)
    assert np.allclose(decomposition.real_eigenvalues(), np.arange(25) + 0.5, atol=1e-10)
    print("✓ Harmonic oscillator levels n + 1/2")

    rng = np.random.default_rng(5)
    A = rng.normal(size=(60, 60))
    A = A + A.T
    decomposition = eig_symmetric(A)
    Q = decomposition.eigenvectors
    assert np.linalg.norm(Q.T @ Q - np.eye(60)) <= 1e-10
    assert decomposition.max_residual <= 1e-12 * decomposition.matrix_norm * 60
    again = eig_symmetric(A)
    assert np.array_equal(again.eigenvectors, Q)
    print("✓ Orthonormal, small residuals, bit-identical on repeat")

    with pytest.raises(ValueError):
        eig_symmetric(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_eig_complex():
    print("\n" + "=" * 60)
    print("Testing eig_complex")
    print("=" * 60)

    decomposition = eig_complex(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    assert np.allclose(decomposition.eigenvalues, [-1j, 1j], atol=1e-15)
    assert decomposition.eigenvalues[0].imag < 0
    assert eigenvalues_only(np.array([[0.0, 1.0], [-1.0, 0.0]]))[0].imag < 0
    print("✓ Rotation generator -> -i, +i (sorted by imaginary part)")

    # real parts differing only by rounding noise still tie
    noisy = np.array([3.0 + 1e-15 + 2j, 3.0 - 1e-15 - 2j, 1.0 + 0j])
    assert spectral_order(noisy).tolist() == [2, 1, 0]
    scaled = np.array([1e6 * (1 + 1e-14) + 1j, 1e6 - 1j])
    assert spectral_order(scaled).tolist() == [1, 0]
    print("✓ Conjugate pairs list -i before +i regardless of real-part noise")

    lambda0, epsilon, w = 2.0, 0.1, 0.7
    A = np.array([[lambda0, 1j * epsilon * w], [1j * epsilon * w, lambda0]])
    values = eig_complex(A).eigenvalues
    assert np.allclose(values, [lambda0 - 1j * epsilon * w, lambda0 + 1j * epsilon * w], atol=1e-14)
    print(f"✓ lambda0 +- i eps w = {values}")

    rng = np.random.default_rng(8)
    planted = rng.normal(size=50) + 1j * rng.normal(size=50)
    S = np.eye(50) + 0.1 * (rng.normal(size=(50, 50)) + 1j * rng.normal(size=(50, 50)))
    A = S @ np.diag(planted) @ np.linalg.inv(S)
    values = eig_complex(A).eigenvalues
    expected = planted[np.lexsort((planted.imag, planted.real))]
    assert np.allclose(values, expected, atol=1e-8)
    print("✓ Planted spectrum of S D S^-1 recovered")

    A = rng.normal(size=(200, 200)) + 1j * rng.normal(size=(200, 200))
    decomposition = eig_complex(A)
    assert decomposition.max_residual <= 1e-9 * decomposition.matrix_norm
    assert np.allclose(np.linalg.norm(decomposition.eigenvectors, axis=0), 1.0)
    assert np.allclose(eigenvalues_only(A), decomposition.eigenvalues, atol=1e-10)
    print(f"✓ 200x200 random: max residual {decomposition.max_residual:.1e}")

    jordan = eig_complex(np.array([[1.0, 1.0], [0.0, 1.0]]))
    assert np.any(jordan.near_defective)
    assert np.all(np.isfinite(jordan.residuals))
    print("✓ Jordan block flagged near-defective, residuals reported")


def test_conjugation_symmetry():
    """A* J = J A forces a spectrum closed under conjugation."""
    print("\n" + "=" * 60)
    print("Testing J-symmetric spectra")
    print("=" * 60)

    rng = np.random.default_rng(13)
    n = 40
    J = np.diag(np.where(np.arange(n) % 2 == 0, 1.0, -1.0))
    H = rng.normal(size=(n, n))
    H = H + H.T
    K = rng.normal(size=(n, n))
    K = K + K.T
    even = np.outer(np.diag(J), np.diag(J)) > 0
    A = np.where(even, H, 0.0) + 1j * np.where(even, 0.0, K)
    assert np.allclose(A.conj().T @ J, J @ A)

    values = eig_complex(A).eigenvalues
    distance = max(float(np.min(np.abs(values - np.conj(z)))) for z in values)
    assert distance <= 1e-8
    print(f"✓ Spectrum closed under conjugation (pairing distance {distance:.1e})")


def test_solve():
    print("\n" + "=" * 60)
    print("Testing solve")
    print("=" * 60)

    B = np.arange(6.0).reshape(3, 2)
    assert np.array_equal(solve(np.eye(3), B), B)

    with pytest.raises(SingularError) as error:
        solve(np.array([[1.0, 1.0], [1.0, 1.0]]), np.ones((2, 1)))
    assert error.value.pivot_magnitude == 0.0
    print(f"✓ Singular system: {error.value}")

    rng = np.random.default_rng(21)
    for trial in range(500):
        n = int(rng.integers(2, 201))
        A = np.eye(n) * n + rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        B = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
        X = solve(A, B)
        residual = np.linalg.norm(A @ X - B)
        assert residual <= 1e-10 * np.linalg.norm(A, 1) * np.linalg.norm(X)
    print("✓ 500 random systems up to 200x200 solved within the residual bound")


def test_op_norm():
    print("\n" + "=" * 60)
    print("Testing op_norm")
    print("=" * 60)

    assert op_norm(np.diag([1.0, -3.0, 2.0])) == pytest.approx(3.0, rel=1e-14)

    rng = np.random.default_rng(34)
    u = rng.normal(size=7) + 1j * rng.normal(size=7)
    v = rng.normal(size=5) + 1j * rng.normal(size=5)
    assert op_norm(np.outer(u, v.conj())) == pytest.approx(np.linalg.norm(u) * np.linalg.norm(v), rel=1e-12)

    A = rng.normal(size=(80, 80)) + 1j * rng.normal(size=(80, 80))
    gram = (A.conj().T @ A)
    largest = np.sqrt(np.max(np.linalg.eigvalsh(gram)))
    assert op_norm(A) == pytest.approx(largest, rel=1e-8)
    assert op_norm(np.zeros((0, 0))) == 0.0
    print("✓ diag, rank-1 and random 80x80 norms")


def main():
    test_eig_symmetric()
    test_eig_complex()
    test_conjugation_symmetry()
    test_solve()
    test_op_norm()
    print("\n✅ All linear algebra tests passed!")
    return 0


if __name__ == "__main__":
    sys.exit(main())
