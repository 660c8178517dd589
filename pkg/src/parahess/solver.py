"""Discrete solutions by explicit log-form time marching and by a Perron sweep.

Both schemes share the backward residual of :mod:`parahess.scheme`; the
Perron scheme produces the largest discrete subsolution below the
superbarrier, the explicit scheme an independent forward-Euler candidate.
"""
from __future__ import annotations

import logging
import time as _time
from dataclasses import asdict, dataclass, field

import numpy as np

from .barriers import BarrierBundle, build_subbarrier, build_superbarrier
from .grid_domain import ProblemSpec, SpaceTimeField
from .hessian_core import eigenvalues_hermitian, f_gradient, in_cone
from .scheme import (Spectrum, max_feasible, mollified_g, node_colours, residual_slice,
                     slice_spectrum)
from .verify import (VerificationReport, check_comparison, check_gamma_sh_all,
                     check_subsolution, check_supersolution, derive_witness)

log = logging.getLogger(__name__)

SCHEMES = ("explicit", "perron", "both")


class SolverError(RuntimeError):
    pass


class StepFailure(SolverError):
    """Explicit step rejected down to dt_min; ``node`` is the worst node."""

    def __init__(self, message, t=None, node=None):
        super().__init__(message)
        self.t = t
        self.node = node


class AdmissibilityError(SolverError):
    pass


@dataclass
class SolverConfig:
    scheme: str = "both"
    dt_initial: float | None = None
    dt_min: float = 1e-12
    cfl_safety: float = 0.9
    eps_g: float = 1e-8
    tol_perron: float = 1e-12
    max_sweeps: int = 2000
    tol_residual: float = 1e-9
    admissibility_slack: float = 1e-6
    barrier_epsilon: float = 0.1
    ordering: str = "coloured"
    explicit_cert_factor: float = 10.0
    tol_harmonic: float = 1e-10

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.ordering not in ("coloured", "lexicographic"):
            raise ValueError("ordering must be 'coloured' or 'lexicographic'")
        if self.dt_initial is not None and self.dt_min > self.dt_initial:
            raise ValueError("dt_min must not exceed dt_initial")
        for name in ("dt_min", "eps_g", "tol_perron", "tol_residual", "admissibility_slack",
                     "barrier_epsilon", "tol_harmonic"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolveResult:
    field: SpaceTimeField
    scheme: str
    diagnostics: dict
    certificates: dict = field(default_factory=dict)
    other: "SolveResult | None" = None
    barriers: tuple = ()

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.certificates.values())


# ---------------------------------------------------------------------------
# residual
# ---------------------------------------------------------------------------

def residual(problem: ProblemSpec, field: SpaceTimeField, m: int, node=None,
             eps_g: float = 1e-8, slack=None):
    """F(H_h u(t_m)) - exp(D_t u + G(t_m, z, u)) g_eps at interior nodes.

    ``node`` selects one interior node (flat index or coordinates); by
    default the whole interior is returned. -inf when F is -inf.
    """
    if m < 1:
        raise ValueError("the residual needs a previous time slice (m >= 1)")
    dom = problem.domain
    t = field.times
    r = residual_slice(problem, field.values[m - 1], field.values[m], t[m], t[m] - t[m - 1], eps_g, slack)
    if node is None:
        return r
    if not np.isscalar(node):
        node = dom.index_of(node)
    pos = np.searchsorted(dom.interior_idx, node)
    if pos >= len(dom.interior_idx) or dom.interior_idx[pos] != node:
        raise ValueError(f"node {node} is not interior")
    return float(r[pos])


def _slack(config: SolverConfig, values, domain) -> float:
    return config.admissibility_slack * (1.0 + float(np.max(np.abs(values[domain.defined]))))


# ---------------------------------------------------------------------------
# explicit marching
# ---------------------------------------------------------------------------

def cfl_dt(problem: ProblemSpec, values, config: SolverConfig) -> float:
    """cfl * h^2 * min F / (4 n max_i f_i) over interior nodes strictly inside the cone."""
    dom = problem.domain
    H = dom.stencil.hessian(values)
    lam = eigenvalues_hermitian(H, validate=False, method="lapack")
    inside = np.asarray(in_cone(lam, problem.cone, strict=True))
    if not np.any(inside):
        return float("inf")
    lam = lam[inside]
    Fv = Spectrum(problem.op, H[inside]).F()
    ok = Fv > 1e-12 * (1 + np.max(Fv))
    if not np.any(ok):
        return float("inf")
    grad = f_gradient(problem.op, lam[ok], analytic=problem.op.kind == "sigma_k_root")
    ratio = Fv[ok] / (4 * dom.n * np.max(grad, axis=1))
    return float(config.cfl_safety * dom.h**2 * np.min(ratio))


def step_explicit(problem: ProblemSpec, prev, t: float, dt: float, config: SolverConfig,
                  lower=None, upper=None):
    """One forward-Euler step of the log-form equation.

    u+ = u + dt [log F(H_h u) - log g_eps - G(t, z, u)] at interior nodes and
    phi(t + dt) on boundary nodes. The step is accepted if the new slice is
    in the closed cone (admissibility slack) and, when given, lies between
    ``lower`` and ``upper``; otherwise dt halves. Returns ``(slice, dt)``.
    """
    dom = problem.domain
    idx = dom.interior_idx
    prev = np.asarray(prev, dtype=float)
    if dt == 0:
        return prev.copy(), 0.0
    g_eps = mollified_g(problem, config.eps_g)
    F = slice_spectrum(problem, prev).F(slack=_slack(config, prev, dom))
    if np.any(np.isneginf(F)):
        i = idx[int(np.argmax(np.isneginf(F)))]
        raise StepFailure("previous slice is not admissible", t, dom.coords[i].tolist())
    drift = np.log(np.maximum(F, config.eps_g)) - np.log(g_eps) - problem.G_at(t, idx, prev[idx])
    while True:
        nxt = prev.copy()
        nxt[idx] = prev[idx] + dt * drift
        nxt[dom.boundary_idx] = problem.boundary_values(t + dt)
        sp = slice_spectrum(problem, nxt)
        inside = sp.inside(slack=_slack(config, nxt, dom))
        bad = ~inside
        tol = config.tol_residual
        if lower is not None:
            bad |= nxt[idx] < lower[idx] - tol
        if upper is not None:
            bad |= nxt[idx] > upper[idx] + tol
        if not np.any(bad):
            return nxt, dt
        dt *= 0.5
        if dt < config.dt_min:
            i = idx[int(np.argmax(bad))]
            raise StepFailure(f"explicit step rejected below dt_min at t={t:.6g}", t, dom.coords[i].tolist())


def explicit_solve(problem: ProblemSpec, config: SolverConfig, sub: BarrierBundle | None = None,
                   sup: BarrierBundle | None = None) -> SolveResult:
    """March from the initial slice to T, landing on every time node."""
    dom = problem.domain
    times = problem.times
    u = problem.empty_field()
    u.values[0] = problem.initial_slice()
    dt = config.dt_initial
    if dt is None:
        dt = cfl_dt(problem, u.values[0], config)
    dt = min(dt, float(times[1] - times[0]))
    dt_history = []
    substeps = 0
    for m in range(len(times) - 1):
        t0, t1 = float(times[m]), float(times[m + 1])
        while True:
            nsub = int(np.ceil((t1 - t0) / dt - 1e-9))
            step = (t1 - t0) / nsub
            cur = u.values[m].copy()
            t = t0
            ok = True
            for j in range(nsub):
                last = j == nsub - 1
                lower = sub.field.values[m + 1] if (last and sub is not None) else None
                upper = sup.field.values[m + 1] if (last and sup is not None) else None
                cur, used = step_explicit(problem, cur, t, step, config, lower, upper)
                if used != step:
                    # rejected: redo the whole interval with the smaller step
                    dt = used
                    ok = False
                    break
                t = t0 + (j + 1) * step
            if ok:
                break
        u.values[m + 1] = cur
        substeps += nsub
        dt_history.append(step)
    u.values[:, ~dom.defined] = np.nan
    diag = {"scheme": "explicit", "dt_history": dt_history, "substeps": substeps}
    return SolveResult(u, "explicit", diag)


# ---------------------------------------------------------------------------
# Perron sweeps
# ---------------------------------------------------------------------------

def perron_max_value(problem: ProblemSpec, field: SpaceTimeField, m: int, node, upper: float,
                     tol_residual: float = 1e-9, eps_g: float = 1e-8, max_iter: int = 60):
    """Largest r in [current, upper] with residual(field with u(t_m, node) = r) >= -tol.

    Returns ``(r, infeasible)``; an infeasible node keeps its current value.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    dom = problem.domain
    if not np.isscalar(node):
        node = dom.index_of(node)
    pos = np.searchsorted(dom.interior_idx, node)
    if pos >= len(dom.interior_idx) or dom.interior_idx[pos] != node:
        raise ValueError(f"node {node} is not interior")
    cur = field.values[m]
    sp = slice_spectrum(problem, cur, np.array([pos]))
    t = field.times
    g_eps = mollified_g(problem, eps_g)[[pos]]
    val, bad = max_feasible(problem, sp, np.array([node]), cur[[node]], field.values[m - 1][[node]],
                            np.array([upper], dtype=float), t[m], t[m] - t[m - 1], g_eps,
                            tol_residual, max_iter)
    return float(val[0]), bool(bad[0])


def _groups(problem: ProblemSpec, ordering: str):
    if ordering == "lexicographic":
        return [np.array([p]) for p in range(len(problem.domain.interior_idx))]
    return node_colours(problem.domain)


def perron_solve(problem: ProblemSpec, config: SolverConfig, sub: BarrierBundle | None = None,
                 sup: BarrierBundle | None = None) -> SolveResult:
    """Discrete Perron envelope by Gauss-Seidel sweeps between the barriers.

    Starting from the subbarrier (with the data imposed on the parabolic
    boundary), each interior node is raised to its largest feasible value
    with the superbarrier as cap. Slices are swept in time order: the
    backward residual at t_m only involves t_{m-1} and t_m, so converging
    slice by slice is the same as repeating full forward sweeps.
    """
    dom = problem.domain
    times = problem.times
    if sub is None:
        sub = build_subbarrier(problem, config.barrier_epsilon, config.tol_residual, config.eps_g)
    if sup is None:
        sup = build_superbarrier(problem, config.barrier_epsilon, None, config.tol_residual,
                                 config.eps_g, config.tol_harmonic)
    u = sub.field.copy()
    problem.apply_data(u)
    idx = dom.interior_idx
    g_eps = mollified_g(problem, config.eps_g)
    groups = _groups(problem, config.ordering)
    sweeps = []
    flagged = 0
    decreased = 0
    residual_sup = [0.0]
    # headroom so the residual recomputed from the full Hessian clears tol_residual
    target = 0.99 * config.tol_residual
    for m in range(1, len(times)):
        t, dt = float(times[m]), float(times[m] - times[m - 1])
        cur = u.values[m]
        prev = u.values[m - 1]
        cap = sup.field.values[m]
        for sweep in range(1, config.max_sweeps + 1):
            change = 0.0
            bad_count = 0
            for pos in groups:
                nodes = idx[pos]
                sp = slice_spectrum(problem, cur, pos)
                new, bad = max_feasible(problem, sp, nodes, cur[nodes], prev[nodes], cap[nodes], t, dt,
                                        g_eps[pos], target)
                if np.any(new < cur[nodes]):
                    decreased += 1
                change = max(change, float(np.max(new - cur[nodes])) if len(nodes) else 0.0)
                cur[nodes] = new
                bad_count += int(np.sum(bad))
            if change < config.tol_perron:
                break
        flagged += bad_count
        sweeps.append(sweep)
        r = residual_slice(problem, prev, cur, t, dt, config.eps_g)
        residual_sup.append(float(np.max(np.abs(r))) if np.all(np.isfinite(r)) else float("inf"))
    converged = all(s < config.max_sweeps for s in sweeps)
    diag = {"scheme": "perron", "sweeps": int(sum(sweeps)), "sweeps_per_slice": sweeps,
            "converged": converged, "flagged_nodes": flagged, "monotone_violations": decreased,
            "residual_sup": residual_sup, "dt_history": [float(d) for d in np.diff(times)]}
    return SolveResult(u, "perron", diag)


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------

def certify(problem: ProblemSpec, result: SolveResult, config: SolverConfig,
            sub: BarrierBundle, sup: BarrierBundle) -> dict:
    """Sub/supersolution, slice Gamma-subharmonicity and barrier comparison reports."""
    u = result.field
    tol = config.tol_residual
    if result.scheme == "explicit":
        # forward Euler satisfies the backward residual only to O(dt)
        Fmax = 1.0 + float(np.max(np.abs(u.defined_values())))
        tol = tol + config.explicit_cert_factor * u.dt * Fmax
    certs = {
        "subsolution": check_subsolution(problem, u, tol, config.eps_g),
        "supersolution": check_supersolution(problem, u, tol, config.eps_g),
        "gamma_sh": check_gamma_sh_all(u, problem.cone),
        "comparison_sub": check_comparison(sub.field, u, 1e-8),
        "comparison_super": check_comparison(u, sup.field, 1e-8),
    }
    return certs


def solve(problem: ProblemSpec, config: SolverConfig | None = None, witness=None) -> SolveResult:
    """Solve with the configured scheme(s) and attach certificates.

    Without an admissibility witness for (u0, g) the problem has no
    solution; one is derived from the initial data when not supplied.
    """
    config = config or SolverConfig()
    eps = config.barrier_epsilon
    if witness is None:
        try:
            witness = derive_witness(problem, eps)
        except ValueError as exc:
            raise AdmissibilityError(
                f"{exc}. Existence holds if and only if (u0, g) is admissible; supply a witness") from exc
    start = _time.perf_counter()
    sub = build_subbarrier(problem, eps, config.tol_residual, config.eps_g)
    sup = build_superbarrier(problem, eps, witness, config.tol_residual, config.eps_g, config.tol_harmonic)
    results = {}
    if config.scheme in ("perron", "both"):
        results["perron"] = perron_solve(problem, config, sub, sup)
    if config.scheme in ("explicit", "both"):
        results["explicit"] = explicit_solve(problem, config, sub, sup)
    for r in results.values():
        r.certificates = certify(problem, r, config, sub, sup)
        r.diagnostics["certificates"] = {k: v.to_dict() for k, v in r.certificates.items()}
    main = results.get("perron") or results["explicit"]
    if config.scheme == "both":
        other = results["explicit"]
        d = problem.domain.defined
        gap = float(np.max(np.abs(main.field.values[:, d] - other.field.values[:, d])))
        main.diagnostics["cross_gap"] = gap
        other.diagnostics["cross_gap"] = gap
        main.other = other
        main.diagnostics["explicit"] = {k: v for k, v in other.diagnostics.items() if k != "certificates"}
        main.diagnostics["explicit_certificates"] = other.diagnostics["certificates"]
    else:
        main.diagnostics["cross_gap"] = None
    main.diagnostics["barriers"] = {"sub": sub.constants, "super": sup.constants,
                                    "sub_sandwich": sub.sandwich, "super_sandwich": sup.sandwich}
    main.diagnostics["wall_seconds"] = _time.perf_counter() - start
    main.barriers = (sub, sup)
    return main
