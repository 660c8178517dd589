"""Certificates: discrete sub/supersolution checks, comparison audits,
Gamma-subharmonicity of time slices, and admissibility witnesses.

Every check returns a :class:`VerificationReport`. The reported ``margin``
is the amount by which the worst node violates its inequality (positive
means violated before tolerance is applied); a check passes when no node
violates by more than ``tol``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .grid_domain import (GridDomain, GridMismatchError, ProblemSpec, SpaceTimeField,
                          inf_convolution_time)
from .hessian_core import ConeSpec, SymOpSpec, eigenvalues_hermitian, hermitian_sigmas
from .scheme import Spectrum, mollified_g, rhs, slice_spectrum

DEFAULT_EPS_G = 1e-8


class ExtractionError(RuntimeError):
    """No admissibility witness could be extracted at the grid resolution."""


@dataclass
class VerificationReport:
    check: str
    passed: bool
    tol: float
    worst_t: float | None = None
    worst_z: list | None = None
    worst_margin: float = float("-inf")
    tested: int = 0
    failed: int = 0
    details: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict:
        out = {"check": self.check, "pass": bool(self.passed), "tol": float(self.tol),
               "worst": {"t": self.worst_t, "z": self.worst_z, "margin": _json_float(self.worst_margin)},
               "tested": int(self.tested), "failed": int(self.failed)}
        if self.details:
            out["details"] = {k: _json_float(v) if isinstance(v, float) else v
                              for k, v in self.details.items()}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.check}: tested={self.tested} failed={self.failed} "
                f"worst margin={self.worst_margin:.3g} (tol {self.tol:.3g})")


def _json_float(x):
    x = float(x)
    if np.isnan(x):
        return None
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


class _Collector:
    """Accumulates violation amounts and keeps the worst (t, node)."""

    def __init__(self, name: str, tol: float, domain: GridDomain):
        self.name, self.tol, self.domain = name, tol, domain
        self.tested = 0
        self.failed = 0
        self.worst = -np.inf
        self.where = (None, None)

    def add(self, t: float, nodes, violation) -> None:
        violation = np.asarray(violation, dtype=float)
        if violation.size == 0:
            return
        violation = np.where(np.isnan(violation), np.inf, violation)
        self.tested += violation.size
        self.failed += int(np.sum(violation > self.tol))
        i = int(np.argmax(violation))
        if violation[i] > self.worst:
            self.worst = float(violation[i])
            self.where = (float(t), self.domain.coords[nodes[i]].tolist())

    def report(self, **details) -> VerificationReport:
        return VerificationReport(self.name, self.failed == 0, self.tol, self.where[0], self.where[1],
                                  self.worst, self.tested, self.failed, details)


def _as_field(problem: ProblemSpec, field) -> SpaceTimeField:
    if isinstance(field, SpaceTimeField):
        if len(field.times) != len(problem.times) or not np.allclose(field.times, problem.times,
                                                                      rtol=0, atol=1e-12):
            raise GridMismatchError("field time grid differs from the problem time grid")
        return field
    return SpaceTimeField(problem.domain, problem.times, field)


def _boundary_data(problem: ProblemSpec, field: SpaceTimeField):
    """(lateral data per time slice, initial data) on the sampling conventions of ``problem``."""
    lateral = [problem.boundary_values(t) for t in field.times]
    return lateral, problem.initial_slice()


def _operator_side(problem, field, tol, eps_g, sign, slack=None, name=""):
    dom = problem.domain
    u = field.values
    idx = dom.interior_idx
    g_eps = mollified_g(problem, eps_g)
    col = _Collector(name, tol, dom)
    lateral, init = _boundary_data(problem, field)
    b = dom.boundary_idx
    defined = np.flatnonzero(dom.defined)
    for m, t in enumerate(field.times):
        if m >= 1:
            dt = field.times[m] - field.times[m - 1]
            F = slice_spectrum(problem, u[m]).F(slack=slack)
            R = rhs(problem, t, idx, u[m, idx], u[m - 1, idx], dt, g_eps)
            if sign > 0:
                # subsolution: F >= RHS; outside the cone F = -inf fails
                viol = np.where(np.isneginf(F), np.inf, R - F)
            else:
                # supersolution: F <= RHS; outside the cone passes vacuously
                viol = np.where(np.isneginf(F), -np.inf, F - R)
            col.add(t, idx, viol)
            col.add(t, b, sign * (u[m, b] - lateral[m]))
        else:
            col.add(t, b, sign * (u[0, b] - lateral[0]))
            col.add(t, defined, sign * (u[0, defined] - init[defined]))
    return col


def check_subsolution(problem: ProblemSpec, field, tol: float = 1e-9,
                      eps_g: float = DEFAULT_EPS_G) -> VerificationReport:
    """Discrete subsolution test.

    At interior nodes of slices m >= 1 the backward residual must be
    >= -tol (nodes outside the closed cone fail); lateral values must not
    exceed phi + tol and the first slice must not exceed the initial data.
    """
    field = _as_field(problem, field)
    return _operator_side(problem, field, tol, eps_g, +1, name="subsolution").report()


def check_supersolution(problem: ProblemSpec, field, tol: float = 1e-9,
                        eps_g: float = DEFAULT_EPS_G) -> VerificationReport:
    """Discrete supersolution test with the cone guard.

    Interior nodes whose discrete Hessian lies outside the closed cone pass;
    elsewhere F <= RHS + tol. Lateral and initial values must be >= the data - tol.
    """
    field = _as_field(problem, field)
    return _operator_side(problem, field, tol, eps_g, -1, name="supersolution").report()


def check_comparison(u: SpaceTimeField, v: SpaceTimeField, tol: float = 1e-8) -> VerificationReport:
    """Audit sup over the interior of (u - v) <= sup over the parabolic boundary of (u - v)_+ + tol.

    The discrete parabolic boundary is the first time slice (all defined
    nodes) together with boundary nodes of every later slice.
    """
    if not u.same_grid(v):
        raise GridMismatchError("comparison requires fields on a common grid")
    dom = u.domain
    diff = u.values - v.values
    b = dom.boundary_idx
    defined = np.flatnonzero(dom.defined)
    par = np.concatenate([diff[0, defined], diff[1:, b].ravel()])
    bsup = max(float(np.max(par)), 0.0) if par.size else 0.0
    bi = int(np.argmax(par)) if par.size else 0
    inner = diff[1:, dom.interior_idx]
    col = _Collector("comparison", tol, dom)
    for m in range(1, len(u.times)):
        col.add(u.times[m], dom.interior_idx, diff[m, dom.interior_idx] - bsup)
    isup = float(np.max(inner)) if inner.size else float("-inf")
    if bi < len(defined):
        bwhere = (float(u.times[0]), dom.coords[defined[bi]].tolist())
    else:
        j = bi - len(defined)
        bwhere = (float(u.times[1 + j // len(b)]), dom.coords[b[j % len(b)]].tolist())
    rep = col.report(interior_sup=isup, boundary_sup=bsup)
    rep.details["boundary_argmax"] = {"t": bwhere[0], "z": bwhere[1]}
    return rep


def _slice_sigmas(values, domain: GridDomain, cone: ConeSpec):
    H = domain.stencil.hessian(values)
    if cone.membership is not None:
        lam = eigenvalues_hermitian(H, validate=False, method="lapack")
        return None, lam
    return hermitian_sigmas(H), None


def check_gamma_sh_slice(field: SpaceTimeField, t0: float, cone: ConeSpec,
                         slack: float | None = None) -> VerificationReport:
    """Every interior node of the slice at t0 has its discrete Hessian
    spectrum in the closed cone, up to ``slack`` (default 1e-6 (1 + max|u|))."""
    dom = field.domain
    m = field.time_index(t0)
    vals = field.values[m]
    if slack is None:
        slack = 1e-6 * (1.0 + float(np.max(np.abs(vals[dom.defined]))))
    sig, lam = _slice_sigmas(vals, dom, cone)
    col = _Collector("gamma_sh", slack, dom)
    if sig is not None:
        viol = np.max(-sig[:, 1:cone.k + 1], axis=1)
    else:
        inside = np.asarray(cone.contains(lam, slack=slack), dtype=bool)
        viol = np.where(inside, 0.0, np.inf)
    col.add(field.times[m], dom.interior_idx, viol)
    return col.report()


def check_gamma_sh_all(field: SpaceTimeField, cone: ConeSpec, slack: float | None = None) -> VerificationReport:
    """check_gamma_sh_slice over every time slice, merged into one report."""
    reports = [check_gamma_sh_slice(field, t, cone, slack) for t in field.times]
    worst = max(reports, key=lambda r: r.worst_margin)
    return VerificationReport("gamma_sh", all(r.passed for r in reports), worst.tol, worst.worst_t,
                              worst.worst_z, worst.worst_margin, sum(r.tested for r in reports),
                              sum(r.failed for r in reports), {"slices": len(reports)})


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------

@dataclass
class AdmissibilityWitness:
    """u0 <= u_eps <= u0 + epsilon with F(H u_eps) <= exp(C_eps) g."""

    u_eps: np.ndarray
    C_eps: float
    epsilon: float
    details: dict = field(default_factory=dict)


def check_admissible(u0, g, witness: AdmissibilityWitness, domain: GridDomain, op: SymOpSpec,
                     tol: float = 1e-9) -> VerificationReport:
    """Sandwich u0 <= u_eps <= u0 + eps on defined nodes and the operator bound
    F(H_h u_eps) <= exp(C_eps) g at interior nodes (out-of-cone nodes pass)."""
    u0 = np.asarray(u0, dtype=float)
    g = np.asarray(g, dtype=float)
    ue = np.asarray(witness.u_eps, dtype=float)
    defined = np.flatnonzero(domain.defined)
    idx = domain.interior_idx
    col = _Collector("admissible", tol, domain)
    col.add(0.0, defined, u0[defined] - ue[defined])
    col.add(0.0, defined, ue[defined] - u0[defined] - witness.epsilon)
    F = Spectrum(op, domain.stencil.hessian(ue)).F()
    with np.errstate(over="ignore"):
        bound = np.exp(witness.C_eps) * g[idx]
    col.add(0.0, idx, np.where(np.isneginf(F), -np.inf, F - bound))
    return col.report(C_eps=float(witness.C_eps), epsilon=float(witness.epsilon))


def derive_witness(problem: ProblemSpec, epsilon: float, shift: float = 0.0) -> AdmissibilityWitness:
    """Witness from the initial data itself: u_eps = u0 + shift and
    C_eps = max(0, max log(F(H_h u0) / g)).

    Raises :class:`ValueError` when F(H_h u0) > 0 at a node where g = 0: then
    the trivial witness cannot exist, and without an admissible pair the
    problem has no solution.
    """
    if not 0.0 <= shift <= epsilon:
        raise ValueError("shift must lie in [0, epsilon]")
    dom = problem.domain
    u0 = problem.initial_slice()
    F = Spectrum(problem.op, dom.stencil.hessian(u0)).F()
    F = np.where(np.isneginf(F), 0.0, F)
    g = problem.g_nodes[dom.interior_idx]
    bad = (F > 1e-12 * (1 + np.max(F))) & (g <= 0)
    if np.any(bad):
        i = dom.interior_idx[int(np.argmax(bad))]
        raise ValueError(
            "no admissibility witness: F(H u0) > 0 where g = 0 at node "
            f"{dom.coords[i].tolist()}; a solution exists only for admissible (u0, g)")
    pos = F > 0
    C = float(np.max(np.log(F[pos] / g[pos]))) if np.any(pos) else 0.0
    return AdmissibilityWitness(u0 + shift, max(C, 0.0), epsilon, {"source": "initial data"})


def extract_admissibility_witness(problem: ProblemSpec, solved, epsilon: float,
                                  A: float | None = None) -> AdmissibilityWitness:
    """Converse construction: u_eps = u_k0(delta, .) + eps/2 from a solved field.

    ``delta`` is the first time node with |u(delta) - u0| < eps/4; k0 is
    doubled until |u_k0(delta) - u(delta)| < eps/4. C_eps = k0 + C with
    C = max over grid of G(t, z, max u).
    """
    u = solved.field if hasattr(solved, "field") else solved
    dom = problem.domain
    d = dom.defined
    u0 = problem.initial_slice()
    osc = u.osc()
    if A is None:
        A = 2.0 * osc + 1.0
    T = float(u.times[-1] - u.times[0])
    delta_m = None
    for m in range(1, len(u.times)):
        if np.max(np.abs(u.values[m, d] - u0[d])) < epsilon / 4:
            delta_m = m
            break
    if delta_m is None:
        raise ExtractionError("no time node delta with |u(delta) - u0| < eps/4; refine the time grid")
    delta = float(u.times[delta_m] - u.times[0])
    if delta >= T - 1e-12 * T:
        raise ExtractionError("delta lies at the final time; refine the time grid")
    k0 = max(2.0 * A / T, A / delta, A / (T - delta)) * (1.0 + 1e-9)
    for _ in range(200):
        uk = inf_convolution_time(u, k0, A)
        pos = np.flatnonzero(np.isclose(uk.times, u.times[delta_m], rtol=0, atol=1e-12 * (1 + T)))
        if len(pos) and np.max(np.abs(uk.values[pos[0], d] - u.values[delta_m, d])) < epsilon / 4:
            break
        k0 *= 2.0
    else:
        raise ExtractionError("inf-convolution parameter search failed; refine the time grid")
    u_eps = np.full(dom.size, np.nan)
    u_eps[d] = uk.values[pos[0], d] + epsilon / 2
    umax = float(np.max(u.defined_values()))
    C = -np.inf
    pts = dom.coords[d]
    for t in u.times:
        C = max(C, float(np.max(problem.G(t, pts, np.full(len(pts), umax)))))
    return AdmissibilityWitness(u_eps, k0 + C, epsilon,
                                {"delta": delta, "k0": k0, "C": C, "A": A})


def check_envelope_stability(problem: ProblemSpec, fields, tol: float = 1e-9,
                             eps_g: float = DEFAULT_EPS_G) -> VerificationReport:
    """The pointwise maximum of passing subsolutions is again a subsolution."""
    fields = [_as_field(problem, f) for f in fields]
    if not fields:
        raise ValueError("need at least one field")
    for i, f in enumerate(fields):
        rep = check_subsolution(problem, f, tol, eps_g)
        if not rep.passed:
            rep.check = "envelope_stability"
            rep.details["precondition"] = f"input {i} is not a subsolution"
            return rep
    top = np.max(np.stack([f.values for f in fields]), axis=0)
    rep = check_subsolution(problem, SpaceTimeField(problem.domain, problem.times, top), tol, eps_g)
    rep.check = "envelope_stability"
    return rep
