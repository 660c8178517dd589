import numpy as np
import pytest

from parahess.barriers import (BarrierError, HarmonicSolveError, build_subbarrier, build_superbarrier,
                               harmonic_extension)
from parahess.verify import AdmissibilityWitness, check_comparison, derive_witness

from conftest import manufactured, stationary


def dense_harmonic(boundary_values, dom):
    """Direct dense solve of the axis-stencil Laplace system."""
    st = dom.stencil
    m = len(dom.interior_idx)
    pos = {int(i): p for p, i in enumerate(dom.interior_idx)}
    known = np.full(dom.size, np.nan)
    known[dom.boundary_idx] = boundary_values
    A = np.zeros((m, m))
    b = np.zeros(m)
    for p in range(m):
        A[p, p] = -2 * len(st.axis)
        for plus, minus in st.axis:
            for nb in (int(plus[p]), int(minus[p])):
                if nb in pos:
                    A[p, pos[nb]] += 1
                else:
                    b[p] -= known[nb]
    out = known.copy()
    out[dom.interior_idx] = np.linalg.solve(A, b)
    return out


@pytest.mark.parametrize("n,h", [(1, 0.25), (2, 0.5)])
def test_harmonic_extension_matches_dense_solve(n, h, rng):
    dom = manufactured(n, 1, h).domain
    bv = rng.uniform(-1, 1, size=len(dom.boundary_idx))
    u, sweeps = harmonic_extension(bv, dom, tol_h=1e-12)
    ref = dense_harmonic(bv, dom)
    np.testing.assert_allclose(u[dom.defined], ref[dom.defined], atol=1e-11)
    assert sweeps >= 1
    # discrete maximum principle
    assert u[dom.interior].max() <= bv.max() + 1e-12
    assert u[dom.interior].min() >= bv.min() - 1e-12


def test_harmonic_extension_reproduces_linear_data():
    dom = manufactured(1, 1, 0.125).domain
    lin = 1 + 2 * dom.coords[:, 0] - dom.coords[:, 1]
    u, _ = harmonic_extension(lin[dom.boundary_idx], dom)
    np.testing.assert_allclose(u[dom.defined], lin[dom.defined], atol=1e-9)


def test_harmonic_extension_sweep_cap():
    dom = manufactured(1, 1, 0.125).domain
    with pytest.raises(HarmonicSolveError):
        harmonic_extension(np.sin(np.arange(len(dom.boundary_idx))), dom, tol_h=1e-14, max_sweeps=2)


@pytest.mark.parametrize("factory,n,k,h", [(manufactured, 1, 1, 0.25), (manufactured, 2, 2, 0.5),
                                           (stationary, 2, 1, 0.5)])
def test_barriers_certified_and_ordered(factory, n, k, h):
    p = factory(n, k, h)
    eps = 0.05
    sub = build_subbarrier(p, eps)
    sup = build_superbarrier(p, eps)
    assert sub.certificate.passed, sub.certificate.summary()
    assert sup.certificate.passed, sup.certificate.summary()
    assert check_comparison(sub.field, sup.field).passed
    d = p.domain.defined
    # initial sandwich: u0 - eps <= sub <= u0 <= sup <= u0 + eps
    assert sub.sandwich["initial_upper"] <= 1e-12
    assert sub.sandwich["initial_lower"] <= 1e-12
    assert sup.sandwich["initial_lower"] <= 1e-12
    assert sup.sandwich["initial_upper"] <= 1e-9
    assert sub.sandwich["lateral_upper"] <= 1e-12
    assert sup.sandwich["lateral_lower"] <= 1e-9
    # exact solution sits between the barriers
    for m, t in enumerate(p.times):
        ex = p.domain.evaluate(p.exact, t)
        assert np.all(sub.field.values[m, d] <= ex[d] + 1e-9)
        assert np.all(sup.field.values[m, d] >= ex[d] - 1e-9)


def test_subbarrier_rejects_bad_epsilon():
    with pytest.raises(ValueError):
        build_subbarrier(manufactured(1, 1, 0.5), 0.0)


def test_subbarrier_search_cap():
    p = manufactured(1, 1, 0.5)
    # G = r + 50 needs a time slope near 50
    p.G = lambda t, z, r: r + 50.0
    with pytest.raises(BarrierError, match="exceeded"):
        build_subbarrier(p, 0.05, m_max=10.0)
    assert build_subbarrier(p, 0.05).constants["M1"] >= 40


def test_superbarrier_witness_checks():
    p = manufactured(1, 1, 0.5)
    w = derive_witness(p, 0.05)
    with pytest.raises(ValueError, match="epsilon"):
        build_superbarrier(p, 0.1, witness=w)
    bad = AdmissibilityWitness(p.initial_slice() - 1.0, w.C_eps, 0.05)
    with pytest.raises(ValueError, match="witness"):
        build_superbarrier(p, 0.05, witness=bad)
