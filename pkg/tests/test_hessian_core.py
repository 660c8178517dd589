import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from parahess.hessian_core import (NEG_INFINITY, AxiomReport, ConeSpec, DomainError, SymOpSpec,
                                   F_eval, check_operator_axioms, complex_hessian_of_quadratic,
                                   eigenvalues_hermitian, elementary_symmetric, f_eval, f_gradient,
                                   hermitian_sigmas, in_cone, jacobi_eigh, sample_cone, sigma_k_root)


def sigma_by_subsets(x, l):
    return sum(math.prod(c) for c in itertools.combinations(x, l))


def random_hermitian(rng, n, count=None):
    shape = (n, n) if count is None else (count, n, n)
    A = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))


# ---------------------------------------------------------------------------
# elementary symmetric sums
# ---------------------------------------------------------------------------

def test_sigma2_all_ones():
    assert elementary_symmetric([1, 1, 1], 2) == 3


def test_sigma2_of_123_matches_subset_enumeration():
    assert elementary_symmetric([1, 2, 3], 2) == sigma_by_subsets([1, 2, 3], 2) == 11


def test_sigma1_zero_vector():
    assert elementary_symmetric([0, 0, 0], 1) == 0


@pytest.mark.parametrize("l", [0, 4, -1])
def test_sigma_index_out_of_range(l):
    with pytest.raises(ValueError):
        elementary_symmetric([1, 2, 3], l)


@given(hnp.arrays(float, st.integers(1, 5), elements=st.floats(-10, 10)), st.data())
def test_sigma_matches_subset_enumeration(x, data):
    l = data.draw(st.integers(1, len(x)))
    expect = sigma_by_subsets(x, l)
    assert elementary_symmetric(x, l) == pytest.approx(expect, rel=1e-9, abs=1e-9 * 10**l)


# ---------------------------------------------------------------------------
# cones
# ---------------------------------------------------------------------------

def test_in_cone_examples():
    assert in_cone([1, 1], ConeSpec(2, 2), slack=0)
    assert in_cone([3, -1], ConeSpec(2, 1))
    assert not in_cone([3, -1], ConeSpec(2, 2))
    for k in (1, 2, 3):
        assert not in_cone([0, 0, 0], ConeSpec(3, k), strict=True)


def test_in_cone_rejects_negative_slack_and_bad_length():
    with pytest.raises(ValueError):
        in_cone([1, 1], ConeSpec(2, 1), slack=-1)
    with pytest.raises(ValueError):
        in_cone([1, 1, 1], ConeSpec(2, 1))


def test_cone_spec_validation():
    with pytest.raises(ValueError):
        ConeSpec(2, 3)
    with pytest.raises(ValueError):
        ConeSpec(0, 1)


@given(hnp.arrays(float, 3, elements=st.floats(-5, 5)))
def test_nested_cones(x):
    inside = [in_cone(x, ConeSpec(3, k), strict=True) for k in (1, 2, 3)]
    # Gamma_3 subset Gamma_2 subset Gamma_1
    assert (not inside[2] or inside[1]) and (not inside[1] or inside[0])


@given(hnp.arrays(float, 3, elements=st.floats(-5, 5)), st.permutations(range(3)),
       st.floats(0.01, 100), st.integers(1, 3))
def test_membership_symmetric_and_scale_invariant(x, perm, c, k):
    cone = ConeSpec(3, k)
    base = in_cone(x, cone, strict=True)
    assert in_cone(x[list(perm)], cone, strict=True) == base
    assert in_cone(c * x, cone, strict=True) == base


@pytest.mark.parametrize("n,k", [(2, 1), (2, 2), (3, 2), (3, 3)])
def test_cone_convex_on_samples(n, k, rng):
    cone = ConeSpec(n, k)
    x, y = sample_cone(cone, 500, rng), sample_cone(cone, 500, rng)
    w = rng.uniform(size=(500, 1))
    assert np.all(in_cone(w * x + (1 - w) * y, cone))


# ---------------------------------------------------------------------------
# f and its gradient
# ---------------------------------------------------------------------------

def test_f_eval_examples():
    assert f_eval(sigma_k_root(2, 2), [1, 1]) == pytest.approx(1.0)
    assert f_eval(sigma_k_root(3, 2), [1, 1, 1]) == pytest.approx(math.sqrt(3), rel=1e-15)
    assert f_eval(sigma_k_root(2, 2), [1, 3]) == pytest.approx(math.sqrt(3), rel=1e-15)


def test_f_eval_outside_cone_raises():
    with pytest.raises(DomainError):
        f_eval(sigma_k_root(2, 2), [3, -1])


def test_f_eval_boundary_clamps_to_zero():
    assert f_eval(sigma_k_root(2, 2), [1, -1e-14]) == 0.0


@pytest.mark.parametrize("analytic", [False, True])
def test_f_gradient_examples(analytic):
    np.testing.assert_allclose(f_gradient(sigma_k_root(2, 1), [0.3, 2.0], analytic), [1, 1], atol=1e-8)
    np.testing.assert_allclose(f_gradient(sigma_k_root(2, 2), [1, 1], analytic), [0.5, 0.5], atol=1e-8)
    np.testing.assert_allclose(f_gradient(sigma_k_root(2, 2), [4, 1], analytic), [0.25, 1.0], atol=1e-8)


def test_f_gradient_on_boundary_raises():
    with pytest.raises(DomainError):
        f_gradient(sigma_k_root(2, 2), [1, 0])


@pytest.mark.parametrize("n,k", [(2, 1), (2, 2), (3, 2), (3, 3)])
def test_f_gradient_positive_and_matches_analytic(n, k, rng):
    op = sigma_k_root(n, k)
    x = sample_cone(op.cone, 200, rng)
    x = x[np.max(np.abs(x), axis=1) < 50]
    num = f_gradient(op, x)
    ana = f_gradient(op, x, analytic=True)
    assert np.all(num > 0)
    np.testing.assert_allclose(num, ana, rtol=1e-5, atol=1e-7)


@given(hnp.arrays(float, 3, elements=st.floats(0.01, 10)), st.floats(0.01, 100), st.integers(1, 3))
def test_homogeneity(x, c, k):
    op = sigma_k_root(3, k)
    assert f_eval(op, c * x) == pytest.approx(c * f_eval(op, x), rel=1e-10)


def test_sym_op_spec_serialisation():
    op = sigma_k_root(3, 2)
    assert op.to_dict() == {"kind": "sigma_k_root", "n": 3, "k": 2}
    assert SymOpSpec.from_dict(op.to_dict()) == op
    with pytest.raises(ValueError):
        SymOpSpec(ConeSpec(2, 1), kind="custom")


# ---------------------------------------------------------------------------
# eigenvalues
# ---------------------------------------------------------------------------

def test_eigenvalue_examples():
    np.testing.assert_allclose(eigenvalues_hermitian(np.eye(3)), [1, 1, 1], atol=1e-14)
    np.testing.assert_allclose(eigenvalues_hermitian(np.array([[2, 1j], [-1j, 2]])), [1, 3], atol=1e-13)
    np.testing.assert_allclose(eigenvalues_hermitian(np.zeros((2, 2))), [0, 0], atol=0)


def test_non_hermitian_rejected():
    with pytest.raises(ValueError):
        eigenvalues_hermitian(np.array([[1, 2], [0, 1]], dtype=complex))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_jacobi_matches_lapack_and_trace_det(n, rng):
    H = random_hermitian(rng, n, 200)
    lam = eigenvalues_hermitian(H)
    np.testing.assert_allclose(lam, np.linalg.eigvalsh(H), atol=1e-11)
    assert np.all(np.diff(lam, axis=1) >= 0)
    np.testing.assert_allclose(lam.sum(axis=1), np.trace(H, axis1=1, axis2=2).real, rtol=1e-9, atol=1e-10)
    np.testing.assert_allclose(lam.prod(axis=1), np.linalg.det(H).real, rtol=1e-9, atol=1e-10)


def test_jacobi_eigenpairs_residual(rng):
    A = rng.normal(size=(50, 6, 6))
    A = A + np.swapaxes(A, 1, 2)
    w, V = jacobi_eigh(A, vectors=True)
    res = np.linalg.norm(A @ V - V * w[:, None, :], axis=1)
    norm = np.linalg.norm(A, ord=2, axis=(1, 2))
    assert np.all(res <= 1e-10 * norm[:, None])


def test_hermitian_sigmas_match_eigenvalues(rng):
    for n in (1, 2, 3):
        H = random_hermitian(rng, n, 100)
        lam = np.linalg.eigvalsh(H)
        for l in range(1, n + 1):
            np.testing.assert_allclose(hermitian_sigmas(H)[:, l], elementary_symmetric(lam, l),
                                       rtol=1e-10, atol=1e-10)


# ---------------------------------------------------------------------------
# F
# ---------------------------------------------------------------------------

def test_F_eval_examples():
    op = sigma_k_root(2, 2)
    assert F_eval(np.eye(2), op) == pytest.approx(1.0)
    assert F_eval(np.diag([3.0, -1.0]), op) == NEG_INFINITY
    assert F_eval(np.diag([1.0, 0.0]), op) == 0.0


def test_F_monotone_under_psd_example():
    op = sigma_k_root(2, 2)
    assert F_eval(np.eye(2) + np.diag([1.0, 0.0]), op) == pytest.approx(math.sqrt(2))
    assert F_eval(np.eye(2) + np.diag([1.0, 0.0]), op) > F_eval(np.eye(2), op)


@pytest.mark.parametrize("n,k", [(2, 2), (3, 2)])
def test_F_unitary_invariance(n, k, rng):
    from parahess.hessian_core import random_unitary
    op = sigma_k_root(n, k)
    lam = sample_cone(op.cone, 50, rng)
    U = random_unitary(n, 50, rng)
    H = U @ (lam[:, :, None] * np.conj(np.swapaxes(U, 1, 2)))
    np.testing.assert_allclose(F_eval(H, op), f_eval(op, lam), rtol=1e-9)


# ---------------------------------------------------------------------------
# complex Hessian of quadratic forms
# ---------------------------------------------------------------------------

def fd_complex_hessian_of_form(Q):
    """d^2/dz_j dzbar_k of q(z) = 1/2 <Qz, z> from exact second differences."""
    m = Q.shape[0]
    n = m // 2

    def q(v):
        return 0.5 * v @ Q @ v

    e = np.eye(m)

    def d2(a, b):
        # exact for quadratics at any step
        return q(e[a] + e[b]) - q(e[a]) - q(e[b])

    H = np.zeros((n, n), dtype=complex)
    for j in range(n):
        for k in range(n):
            H[j, k] = 0.25 * ((d2(j, k) + d2(n + j, n + k)) + 1j * (d2(j, n + k) - d2(n + j, k)))
    return H


def test_quadratic_examples():
    np.testing.assert_allclose(complex_hessian_of_quadratic(2 * np.eye(4)), np.eye(2), atol=1e-15)
    np.testing.assert_allclose(complex_hessian_of_quadratic(np.zeros((4, 4))), np.zeros((2, 2)))
    np.testing.assert_allclose(complex_hessian_of_quadratic(np.diag([2.0, -2.0])), [[0]], atol=1e-15)


def test_quadratic_asymmetric_rejected():
    with pytest.raises(ValueError):
        complex_hessian_of_quadratic(np.array([[0.0, 1.0], [0.0, 0.0]]))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_quadratic_matches_finite_differences(n, rng):
    for _ in range(20):
        A = rng.normal(size=(2 * n, 2 * n))
        Q = A + A.T
        np.testing.assert_allclose(complex_hessian_of_quadratic(Q), fd_complex_hessian_of_form(Q), atol=1e-12)


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31 - 1))
def test_quadratic_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    Q1, Q2 = rng.normal(size=(2, 4, 4))
    Q1, Q2 = Q1 + Q1.T, Q2 + Q2.T
    lhs = complex_hessian_of_quadratic(a * Q1 + b * Q2)
    rhs = a * complex_hessian_of_quadratic(Q1) + b * complex_hessian_of_quadratic(Q2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    np.testing.assert_allclose(lhs, np.conj(lhs.T), atol=0)


# ---------------------------------------------------------------------------
# axiom audit
# ---------------------------------------------------------------------------

def test_axioms_pass_for_sigma2_n2():
    rep = check_operator_axioms(sigma_k_root(2, 2), samples=1000, seed=0)
    assert isinstance(rep, AxiomReport)
    assert rep.passed, rep.to_dict()


def test_boundary_axiom_fails_for_sigma1_on_gamma2():
    op = SymOpSpec(ConeSpec(2, 2), kind="custom", func=lambda x: np.sum(x, axis=-1),
                   declared_axioms=("homogeneous",))
    rep = check_operator_axioms(op, samples=500, seed=0)
    assert "boundary_zero" in rep.failed_axioms()
    witness = np.asarray(rep["boundary_zero"].witness)
    assert elementary_symmetric(witness, 2) == pytest.approx(0, abs=1e-8)
    assert witness.sum() > 0


def test_axiom_report_deterministic():
    a = check_operator_axioms(sigma_k_root(3, 2), samples=200, seed=7).to_dict()
    b = check_operator_axioms(sigma_k_root(3, 2), samples=200, seed=7).to_dict()
    assert a == b
