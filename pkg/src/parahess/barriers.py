"""epsilon-subbarriers, epsilon-superbarriers and the discrete harmonic extension."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid_domain import GridDomain, ProblemSpec, SpaceTimeField
from .scheme import Spectrum, mollified_g, rhs
from .verify import (AdmissibilityWitness, VerificationReport, check_admissible,
                     check_subsolution, check_supersolution, derive_witness)

__all__ = ["AdmissibilityWitness", "BarrierBundle", "BarrierError", "HarmonicSolveError",
           "build_subbarrier", "build_superbarrier", "harmonic_extension", "derive_witness"]


class BarrierError(RuntimeError):
    """Constant search exceeded its cap; carries the worst node."""


class HarmonicSolveError(RuntimeError):
    pass


@dataclass
class BarrierBundle:
    field: SpaceTimeField
    side: str
    epsilon: float
    constants: dict
    certificate: VerificationReport
    components: tuple = ()
    sandwich: dict = field(default_factory=dict)


def _defining(problem: ProblemSpec):
    """rho shifted so it is <= 0 on every boundary node, and c = max(-rho_h)."""
    dom = problem.domain
    rho = dom.rho_values.copy()
    delta = max(float(np.max(rho[dom.boundary_idx])), 0.0) if len(dom.boundary_idx) else 0.0
    rho_h = rho - delta
    rho_h[~dom.defined] = np.nan
    c = float(np.max(-rho_h[dom.defined]))
    return rho_h, c, delta


def _geometric_search(feasible, m_max: float, start: float = 1.0, ratio: float = 1.25):
    """Smallest-ish M with feasible(M): double from ``start``, then bisect
    geometrically until the bracket ratio is at most ``ratio``."""
    hi = start
    lo = None
    while not feasible(hi):
        lo = hi
        hi *= 2.0
        if hi > m_max:
            return None, lo
    if lo is None:
        return hi, None
    while hi / lo > ratio:
        mid = math.sqrt(hi * lo)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi, lo


def _worst(problem, viol_by_slice):
    m, i = np.unravel_index(int(np.nanargmax(viol_by_slice)), viol_by_slice.shape)
    dom = problem.domain
    return {"t": float(problem.times[m]), "z": dom.coords[dom.interior_idx[i]].tolist(),
            "margin": float(viol_by_slice[m, i])}


def build_subbarrier(problem: ProblemSpec, epsilon: float, tol_b: float = 1e-9,
                     eps_g: float = 1e-8, m_max: float = 1e12, max_doublings: int = 3) -> BarrierBundle:
    """max(u1, u2) with u1 = u0 + eps (rho_h - c)/(2c) - M1 t and
    u2 = phi - eps/2 + M2 rho_h.

    ``rho_h`` is rho shifted down so it is non-positive on boundary nodes
    (the grid boundary lies slightly outside {rho = 0}). M1 and M2 come from
    a doubling/bisection search on the discrete subsolution inequality with
    slack ``tol_b``. The composed field is then certified; if the maximum
    still fails after ``max_doublings`` doublings of both constants, the
    certified component u1 is returned (``constants["composition"]``).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    dom = problem.domain
    idx = dom.interior_idx
    b = dom.boundary_idx
    times = problem.times
    rho_h, c, delta = _defining(problem)
    U0 = problem.initial_slice()
    g_eps = mollified_g(problem, eps_g)
    lateral = np.stack([problem.boundary_values(t) for t in times])
    phi = np.stack([problem.phi_nodes(t) for t in times])

    base1 = U0 + epsilon * (rho_h - c) / (2 * c)
    F1 = Spectrum(problem.op, dom.stencil.hessian(base1)).F()

    def field1(M1):
        return base1[None, :] - M1 * times[:, None]

    def viol1(M1):
        u = field1(M1)
        out = np.empty((len(times) - 1, len(idx)))
        for m in range(1, len(times)):
            R = rhs(problem, times[m], idx, u[m, idx], u[m - 1, idx], times[m] - times[m - 1], g_eps)
            out[m - 1] = np.where(np.isneginf(F1), np.inf, R - F1)
        lat = np.max(u[:, b] - lateral) if len(b) else -np.inf
        return out, lat

    def feasible1(M1):
        out, lat = viol1(M1)
        return bool(np.all(out <= tol_b) and lat <= tol_b)

    def field2(M2):
        return phi - epsilon / 2 + M2 * rho_h[None, :]

    Hphi = [dom.stencil.hessian(phi[m]) for m in range(len(times))]
    Hrho = dom.stencil.hessian(rho_h)

    def viol2(M2):
        u = field2(M2)
        out = np.empty((len(times) - 1, len(idx)))
        for m in range(1, len(times)):
            F = Spectrum(problem.op, Hphi[m] + M2 * Hrho).F()
            R = rhs(problem, times[m], idx, u[m, idx], u[m - 1, idx], times[m] - times[m - 1], g_eps)
            out[m - 1] = np.where(np.isneginf(F), np.inf, R - F)
        lat = np.max(u[:, b] - lateral) if len(b) else -np.inf
        init = np.max(u[0, idx] - U0[idx])
        return out, max(lat, init)

    def feasible2(M2):
        out, other = viol2(M2)
        return bool(np.all(out <= tol_b) and other <= tol_b)

    M1, _ = _geometric_search(feasible1, m_max)
    if M1 is None:
        out, _ = viol1(m_max)
        raise BarrierError(f"subbarrier slope search exceeded M_max={m_max:g}; worst node {_worst(problem, out)}")
    M2, _ = _geometric_search(feasible2, m_max)
    if M2 is None:
        out, _ = viol2(m_max)
        raise BarrierError(f"subbarrier rho-weight search exceeded M_max={m_max:g}; worst node {_worst(problem, out)}")

    # the mixed stencil is not monotone for n >= 2: the maximum of two
    # discrete subsolutions can leave the cone where they cross, so the
    # composed field is certified and, failing that, u1 alone is used
    composition = "max"
    bumps = 0
    M1_0, M2_0 = M1, M2
    while True:
        u1 = field1(M1)
        u2 = field2(M2)
        vals = np.fmax(u1, u2)
        vals[:, ~dom.defined] = np.nan
        fld = SpaceTimeField(dom, times, vals)
        cert = check_subsolution(problem, fld, tol_b, eps_g)
        if cert.passed:
            break
        if bumps == max_doublings or 2 * max(M1, M2) > m_max:
            M1, M2 = M1_0, M2_0
            u1 = field1(M1)
            u2 = field2(M2)
            vals = u1.copy()
            vals[:, ~dom.defined] = np.nan
            fld = SpaceTimeField(dom, times, vals)
            composition = "u1"
            cert = check_subsolution(problem, fld, tol_b, eps_g)
            if not cert.passed:
                raise BarrierError(f"subbarrier failed certification; worst t={cert.worst_t} "
                                   f"z={cert.worst_z} margin={cert.worst_margin:.3g}")
            break
        bumps += 1
        M1, M2 = 2 * M1, 2 * M2
    d = dom.defined
    sandwich = {
        "initial_upper": float(np.max(vals[0, d] - U0[d])),
        "initial_lower": float(np.max(U0[d] - epsilon - vals[0, d])),
        "lateral_upper": float(np.max(vals[:, b] - lateral)) if len(b) else 0.0,
        "lateral_lower": float(np.max(lateral - epsilon - vals[:, b])) if len(b) else 0.0,
    }
    comps = (SpaceTimeField(dom, times, np.where(d, u1, np.nan)),
             SpaceTimeField(dom, times, np.where(d, u2, np.nan)))
    return BarrierBundle(fld, "sub", epsilon,
                         {"M1": M1, "M2": M2, "c": c, "rho_shift": delta, "certification_doublings": bumps,
                          "composition": composition},
                         cert, comps, sandwich)


def _colour_split(domain: GridDomain):
    multi = np.array(np.unravel_index(domain.interior_idx, domain.shape))
    parity = multi.sum(axis=0) % 2
    return np.flatnonzero(parity == 0), np.flatnonzero(parity == 1)


def harmonic_extension(boundary_values, domain: GridDomain, tol_h: float = 1e-10,
                       initial=None, max_sweeps: int = 1_000_000):
    """Solve the axis-stencil discrete Laplace equation with Dirichlet data
    on boundary nodes by red-black successive over-relaxation.

    ``boundary_values`` is ordered like ``domain.boundary_idx``. The
    relaxation factor is 2 / (1 + sin(pi / N)) for a box with N cells per
    axis. Stops when max |Laplacian| <= tol_h. Returns ``(field, sweeps)``.
    """
    st = domain.stencil
    dims = 2 * domain.n
    u = np.full(domain.size, np.nan)
    bv = np.asarray(boundary_values, dtype=float)
    u[domain.boundary_idx] = bv
    if initial is not None:
        u[domain.interior_idx] = np.asarray(initial, dtype=float)[domain.interior_idx]
    else:
        u[domain.interior_idx] = float(np.mean(bv))
    N = domain.points_per_axis - 1
    omega = 2.0 / (1.0 + math.sin(math.pi / N))
    h2 = domain.h ** 2
    groups = _colour_split(domain)
    nodes = st.nodes
    for sweep in range(1, max_sweeps + 1):
        for pos in groups:
            nb = sum(u[p[pos]] + u[m[pos]] for p, m in st.axis)
            target = nb / (2 * dims)
            u[nodes[pos]] += omega * (target - u[nodes[pos]])
        if sweep % 4 == 0 or sweep == 1:
            res = np.max(np.abs(st.laplacian(u))) if len(nodes) else 0.0
            if res <= tol_h:
                return u, sweep
    res = np.max(np.abs(st.laplacian(u)))
    raise HarmonicSolveError(f"SOR did not converge in {max_sweeps} sweeps (residual {res:.3g})")


def build_superbarrier(problem: ProblemSpec, epsilon: float, witness: AdmissibilityWitness | None = None,
                       tol_b: float = 1e-9, eps_g: float = 1e-8, tol_h: float = 1e-10,
                       witness_tol: float = 1e-9) -> BarrierBundle:
    """min(v1, v2) with v1 = u_eps + (C_eps + M1') t and v2 the slice-wise
    discrete harmonic extension of phi + eps.

    M1' = max |G(t, z, u0)| over the grid plus the largest difference
    quotient of phi between consecutive time nodes.
    """
    dom = problem.domain
    times = problem.times
    if witness is None:
        witness = derive_witness(problem, epsilon)
    if abs(witness.epsilon - epsilon) > 1e-12 * max(1.0, epsilon):
        raise ValueError("witness epsilon does not match the requested epsilon")
    U0 = problem.initial_slice()
    adm = check_admissible(U0, problem.g_nodes, witness, dom, problem.op, witness_tol)
    if not adm.passed:
        raise ValueError(f"invalid admissibility witness: {adm.summary()}")
    d = dom.defined
    pts = dom.coords[d]
    Gmax = max(float(np.max(np.abs(problem.G(t, pts, U0[d])))) for t in times)
    lateral = np.stack([problem.boundary_values(t) for t in times])
    dphi = np.max(np.abs(np.diff(lateral, axis=0)) / np.diff(times)[:, None]) if len(times) > 1 else 0.0
    M1p = Gmax + float(dphi)
    v1 = witness.u_eps[None, :] + (witness.C_eps + M1p) * times[:, None]
    v2 = np.full((len(times), dom.size), np.nan)
    sweeps = []
    prev = None
    for m, t in enumerate(times):
        v2[m], s = harmonic_extension(lateral[m] + epsilon, dom, tol_h, initial=prev)
        prev = v2[m]
        sweeps.append(s)
    vals = np.fmin(v1, v2)
    vals[:, ~d] = np.nan
    fld = SpaceTimeField(dom, times, vals)
    cert = check_supersolution(problem, fld, tol_b, eps_g)
    b = dom.boundary_idx
    sandwich = {
        "initial_lower": float(np.max(U0[d] - vals[0, d])),
        "initial_upper": float(np.max(vals[0, d] - U0[d] - epsilon)),
        "lateral_lower": float(np.max(lateral - vals[:, b])) if len(b) else 0.0,
        "lateral_upper": float(np.max(vals[:, b] - lateral - epsilon)) if len(b) else 0.0,
    }
    comps = (SpaceTimeField(dom, times, np.where(d, v1, np.nan)), SpaceTimeField(dom, times, v2))
    return BarrierBundle(fld, "super", epsilon,
                         {"C_eps": witness.C_eps, "M1_prime": M1p, "sor_sweeps": int(sum(sweeps))},
                         cert, comps, sandwich)
