"""Randomised audits shared by the self-test and the test suites.

* convolution laws of the time sup/inf-convolutions on random fields
  that are Lipschitz in t;
* random well-posed problems on balls (quadratic plus pluriharmonic
  initial data, data growing linearly in t, G affine in r);
* comparison audits: subbarrier against superbarrier, and solutions of
  two problems with ordered data.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .barriers import build_subbarrier, build_superbarrier
from .grid_domain import (ProblemSpec, SpaceTimeField, TimeGrid, inf_convolution_time,
                          make_ball_domain, sup_convolution_time)
from .hessian_core import sigma_k_root
from .solver import SolverConfig, solve
from .verify import check_comparison


@dataclass
class AuditResult:
    name: str
    passed: bool
    trials: int
    failures: int
    worst: float
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        return (f"{'PASS' if self.passed else 'FAIL'} {self.name}: trials={self.trials} "
                f"failures={self.failures} worst={self.worst:.3g}")


# ---------------------------------------------------------------------------
# convolution laws
# ---------------------------------------------------------------------------

def random_lipschitz_field(rng: np.random.Generator, n: int = 1, h: float = 0.5, M: int = 40,
                           T: float = 1.0, lip: float = 2.0) -> SpaceTimeField:
    """Random field on a small ball grid whose time increments are bounded by lip * dt."""
    dom = make_ball_domain(n, 1.0, 2.0, h)
    times = np.linspace(0.0, T, M + 1)
    dt = times[1] - times[0]
    steps = rng.uniform(-lip, lip, size=(M, dom.size)) * dt
    vals = np.vstack([rng.uniform(-1, 1, size=(1, dom.size)), steps]).cumsum(axis=0)
    vals[:, ~dom.defined] = np.nan
    return SpaceTimeField(dom, times, vals)


def discrete_lipschitz(u: SpaceTimeField) -> float:
    """max |u(t_i) - u(t_j)| / |t_i - t_j| over all time-node pairs and nodes."""
    v = u.values[:, u.domain.defined]
    best = 0.0
    for i in range(1, len(u.times)):
        d = np.abs(v[i:] - v[:-i]).max() / (u.times[i] - u.times[0])
        best = max(best, float(d))
    return best


def convolution_law_margins(u: SpaceTimeField, k: float, A: float) -> dict[str, float]:
    """Worst violations (positive = violated) of the convolution laws for one k.

    sandwich: u_k <= u <= u^k on the window; lipschitz: u^k and u_k are
    k-Lipschitz in t over all node pairs; idempotence (only when k is at
    least the discrete Lipschitz constant of u): u^k = u_k = u.
    """
    up = sup_convolution_time(u, k, A)
    lo = inf_convolution_time(u, k, A)
    d = u.domain.defined
    pos = np.searchsorted(u.times, up.times)
    base = u.values[pos][:, d]
    U, L = up.values[:, d], lo.values[:, d]
    out = {"sandwich": float(max(np.max(base - U), np.max(L - base)))}
    lip = -np.inf
    for i in range(1, len(up.times)):
        gap = up.times[i] - up.times[0]
        for W in (U, L):
            lip = max(lip, float(np.max(np.abs(W[i:] - W[:-i]) - k * gap)))
    out["lipschitz"] = lip
    if k >= discrete_lipschitz(u):
        out["idempotence"] = float(max(np.max(np.abs(U - base)), np.max(np.abs(L - base))))
    return out


def audit_convolutions(fields: int = 100, seed: int = 0, tol: float = 1e-14) -> AuditResult:
    rng = np.random.default_rng(seed)
    worst = {"sandwich": -np.inf, "lipschitz": -np.inf, "idempotence": -np.inf}
    failures = 0
    for _ in range(fields):
        u = random_lipschitz_field(rng, lip=rng.uniform(0.5, 3.0))
        A = u.osc() + 1.0
        L = discrete_lipschitz(u)
        T = u.times[-1] - u.times[0]
        for k in (max(2.5 * A / T, 0.5 * L), max(2.5 * A / T, L * 1.0000001)):
            m = convolution_law_margins(u, k, A)
            for key, v in m.items():
                worst[key] = max(worst[key], v)
            failures += sum(v > tol for v in m.values())
    return AuditResult("convolution laws", failures == 0, fields, failures,
                       max(worst.values()), {k: float(v) for k, v in worst.items()})


# ---------------------------------------------------------------------------
# random problems and comparison audits
# ---------------------------------------------------------------------------

def random_problem(rng: np.random.Generator, n: int | None = None, h: float | None = None,
                   M: int = 8, T: float = 0.25, offset: float = 0.0, drift: float = 0.0,
                   params: dict | None = None) -> tuple[ProblemSpec, dict]:
    """A random admissible problem on a ball.

    u0 = c|z|^2 + Re<b, z> + d (plus ``offset``), phi = u0 + (beta + drift) t,
    g constant, G = gamma r + delta. Passing ``params`` from an earlier call
    reuses its coefficients, so ordered pairs share g and G.
    """
    if params is None:
        n = n or int(rng.integers(1, 3))
        params = {
            "n": n,
            "k": int(rng.integers(1, n + 1)),
            "a": float(rng.uniform(1.5, 3.0)),
            "c": float(rng.uniform(0.5, 2.0)),
            "b": rng.uniform(-0.5, 0.5, size=2 * n).tolist(),
            "d": float(rng.uniform(-0.5, 0.5)),
            "beta": float(rng.uniform(0.0, 1.0)),
            "g": float(rng.uniform(0.5, 2.0)),
            "gamma": float(rng.uniform(0.0, 1.0)),
            "delta": float(rng.uniform(-0.5, 0.5)),
        }
    p = params
    n = p["n"]
    h = h or (0.25 if n == 1 else 0.5)
    b = np.asarray(p["b"])

    def u0(z):
        return p["c"] * np.sum(z**2, axis=-1) + z @ b + p["d"] + offset

    def phi(t, z):
        return u0(z) + (p["beta"] + drift) * t

    def g(z):
        return np.full(len(z), p["g"])

    def G(t, z, r):
        return p["gamma"] * r + p["delta"] + 0.0 * t

    problem = ProblemSpec(make_ball_domain(n, 1.0, p["a"], h), TimeGrid(T, M), sigma_k_root(n, p["k"]),
                          G, g, phi, u0, name="random")
    return problem, params


def audit_comparisons(problems: int = 20, seed: int = 0, tol: float = 1e-8,
                      solve_pairs: bool = True) -> AuditResult:
    """Subbarrier vs superbarrier and ordered-data solution pairs on random problems.

    Each comparison passes when the interior excess sup(u - v) is at most the
    parabolic-boundary excess plus ``tol``.
    """
    rng = np.random.default_rng(seed)
    failures = 0
    trials = 0
    worst = -np.inf
    config = SolverConfig(scheme="perron")
    for _ in range(problems):
        problem, params = random_problem(rng)
        sub = build_subbarrier(problem, config.barrier_epsilon, config.tol_residual, config.eps_g)
        sup = build_superbarrier(problem, config.barrier_epsilon, None, config.tol_residual,
                                 config.eps_g, config.tol_harmonic)
        reports = [check_comparison(sub.field, sup.field, tol)]
        if solve_pairs:
            higher, _ = random_problem(rng, offset=float(rng.uniform(0.0, 0.3)),
                                       drift=float(rng.uniform(0.0, 0.5)), params=params)
            u1 = solve(problem, config).field
            u2 = solve(higher, config).field
            reports.append(check_comparison(u1, u2, tol))
        for r in reports:
            trials += 1
            failures += int(not r.passed)
            worst = max(worst, r.worst_margin)
    return AuditResult("comparison audit", failures == 0, trials, failures, worst)
