#!/usr/bin/env python3
"""
Test assembly of (H0, H1, J) and the intertwining checks.
"""

import sys

import numpy as np
import pytest

from spectra.basis import HermiteBasis
from spectra.errors import AssemblyError, SymmetryViolation
from spectra.expr_parser import compile_expression
from spectra.linalg import eigenvalues_only
from spectra.operators import (PerturbationForm, ProblemSpec, assemble, evaluate_at,
                               h1_operator_norm, intertwining_residual)


def oscillator2d_spec(modes: int = 10, W: str = "x1^2*x2/(1+x1^2+x2^2)") -> ProblemSpec:
    basis = HermiteBasis(dimension=2, modes=modes, length_scales=(1.0, 1 / np.sqrt(2)), kinetic=0.5)
    return ProblemSpec(basis=basis,
                       V=compile_expression("(x1^2 + 4*x2^2)/2", 2),
                       W=compile_expression(W, 2),
                       reflection=(0, 1))


def oscillator_spec(W: str = "x/(1+x^2)", modes: int = 40) -> ProblemSpec:
    return ProblemSpec(basis=HermiteBasis(dimension=1, modes=modes),
                       V=compile_expression("x^2"), W=compile_expression(W))


def test_oscillator2d_assembly():
    print("=" * 60)
    print("Testing 2D oscillator assembly")
    print("=" * 60)

    family = assemble(oscillator2d_spec())
    n1, n2 = np.divmod(np.arange(100), 10)
    assert np.allclose(family.H0, np.diag(n1 + 2 * n2 + 1.5), atol=1e-10)
    print("✓ H0 = diag(k1 + 2 k2 + 3/2)")

    assert np.array_equal(family.J, np.diag(np.where(n2 % 2 == 0, 1.0, -1.0)))
    assert np.array_equal(family.J @ family.J, np.eye(100))
    assert family.h0_residual <= 1e-12
    assert family.h1_residual <= 1e-12
    assert family.valid
    family.require_valid()
    print(f"✓ Residuals {family.h0_residual:.1e} / {family.h1_residual:.1e}")

    again = assemble(oscillator2d_spec())
    assert np.array_equal(again.H0, family.H0)
    assert np.array_equal(again.H1, family.H1)
    print("✓ Assembly is deterministic")


def test_even_w_is_flagged():
    family = assemble(oscillator_spec(W="1"))
    assert family.h1_residual == pytest.approx(2.0, rel=1e-12)
    assert not family.valid
    with pytest.raises(SymmetryViolation):
        family.require_valid()
    print("✓ Constant W violates J H1 = H1* J and is flagged")


def test_evaluate_at():
    print("\n" + "=" * 60)
    print("Testing evaluate_at")
    print("=" * 60)

    family = assemble(oscillator_spec())
    assert np.array_equal(evaluate_at(family, 0.0), family.H0)
    assert np.array_equal(evaluate_at(family, 0.5) - evaluate_at(family, 0.25), 0.25 * family.H1)
    for epsilon in (0.1, 0.7, 3.0):
        H = evaluate_at(family, epsilon)
        assert intertwining_residual(family.J, H) <= 1e-12
    print("✓ H(eps) is J-symmetric and linear in eps")

    values = eigenvalues_only(evaluate_at(family, 0.3))
    distance = max(float(np.min(np.abs(values - np.conj(z)))) for z in values)
    assert distance <= 1e-8
    print("✓ Spectrum closed under conjugation")


def test_h1_operator_norm():
    print("\n" + "=" * 60)
    print("Testing ||H1||")
    print("=" * 60)

    norm = h1_operator_norm(assemble(oscillator_spec()))
    assert norm.sup_bound == pytest.approx(0.5, abs=1e-6)
    assert abs(abs(norm.argmax[0]) - 1.0) < 1e-3
    assert norm.matrix_norm <= norm.sup_bound + 1e-6
    assert norm.conservative == norm.sup_bound
    print(f"✓ sup|x/(1+x^2)| = {norm.sup_bound:.8f}, matrix norm {norm.matrix_norm:.6f}")

    zero = h1_operator_norm(assemble(oscillator_spec(W="0")))
    assert zero.matrix_norm == 0.0
    assert zero.sup_bound == 0.0

    oscillator = h1_operator_norm(assemble(oscillator2d_spec(modes=12)))
    assert oscillator.sup_bound > 0
    assert oscillator.matrix_norm <= oscillator.sup_bound + 1e-6
    print(f"✓ 2D W: node max {oscillator.sup_bound:.4f}, matrix norm {oscillator.matrix_norm:.4f}")


def test_matrix_form():
    print("\n" + "=" * 60)
    print("Testing user-supplied H1 and J")
    print("=" * 60)

    rng = np.random.default_rng(2)
    size = 6
    J = np.diag([1.0, -1.0, 1.0, -1.0, 1.0, -1.0]).astype(complex)
    S = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
    S = S + S.conj().T
    basis = HermiteBasis(dimension=1, modes=size)
    spec = ProblemSpec(basis=basis, V=compile_expression("x^2"), reflection=(1,),
                       perturbation=PerturbationForm.MATRIX, h1_matrix=J @ S, j_matrix=J)
    family = assemble(spec)
    assert family.h1_residual <= 1e-14
    assert family.valid
    assert h1_operator_norm(family).sup_bound is None
    print("✓ H1 = J S with S Hermitian satisfies J H1 = H1* J")

    bad = ProblemSpec(basis=basis, V=compile_expression("x^2"), reflection=(1,),
                      perturbation=PerturbationForm.MATRIX, h1_matrix=J @ S, j_matrix=2 * J)
    with pytest.raises(AssemblyError):
        assemble(bad)
    print("✓ Non-involutive J rejected")


def test_spec_validation():
    basis = HermiteBasis(dimension=1, modes=8)
    V = compile_expression("x^2")
    with pytest.raises(ValueError):
        ProblemSpec(basis=basis, V=V, W=compile_expression("x"), reflection=(0,))
    with pytest.raises(ValueError):
        ProblemSpec(basis=basis, V=V)
    with pytest.raises(ValueError):
        ProblemSpec(basis=basis, V=compile_expression("x1^2", 2), W=compile_expression("x"))
    with pytest.raises(ValueError):
        ProblemSpec(basis=basis, V=V, perturbation=PerturbationForm.MATRIX, h1_matrix=np.eye(3), j_matrix=np.eye(3))

    singular = ProblemSpec(basis=HermiteBasis(dimension=1, modes=4), V=compile_expression("1/x"),
                           W=compile_expression("x"), quadrature_order=9)
    with pytest.raises(AssemblyError):
        assemble(singular)


def main():
    test_oscillator2d_assembly()
    test_even_w_is_flagged()
    test_evaluate_at()
    test_h1_operator_norm()
    test_matrix_form()
    test_spec_validation()
    print("\n✅ All operator assembly tests passed!")
    return 0


if __name__ == "__main__":
    sys.exit(main())
