"""Discrete residual of F(Hu) = exp(u_t + G(t, z, u)) g(z) and per-node solves.

Shared by the solver, the barrier constructions and the certificates. The
discrete Hessian at a node depends on the centre value only through the
diagonal: raising the centre by d shifts H by -(d / h^2) I, so every
eigenvalue moves by the same amount. :class:`Spectrum` exploits this to
evaluate F at shifted centre values without rebuilding the Hessian.
"""
from __future__ import annotations

import itertools
from math import comb

import numpy as np

from .grid_domain import GridDomain, ProblemSpec, g_mollify, used_pairs
from .hessian_core import (SymOpSpec, eigenvalues_hermitian, elementary_symmetric_all,
                           f_values, hermitian_sigmas)

RELATIVE_SLACK = 1e-10


class Spectrum:
    """Symmetric-function data of a stack of Hermitian matrices.

    For the sigma_k family only sigma_0..sigma_n are kept (no
    diagonalisation); other operators keep the eigenvalues.
    """

    def __init__(self, op: SymOpSpec, H):
        self.op = op
        H = np.asarray(H, dtype=complex)
        if op.kind == "sigma_k_root" and op.cone.membership is None:
            self.sig = hermitian_sigmas(H)
            self.lam = None
        else:
            self.lam = eigenvalues_hermitian(H, validate=False, method="lapack")
            self.sig = elementary_symmetric_all(self.lam)
        self.size = len(self.sig)

    def take(self, pos) -> "Spectrum":
        out = object.__new__(Spectrum)
        out.op = self.op
        out.sig = self.sig[pos]
        out.lam = None if self.lam is None else self.lam[pos]
        out.size = len(out.sig)
        return out

    def shifted_sigmas(self, shift) -> np.ndarray:
        """sigma_l(lambda - shift) for l = 0..n via the binomial expansion."""
        s = np.asarray(shift, dtype=float)
        if not s.any():
            return self.sig
        C, D = _binomial_table(self.op.n)
        neg = -np.broadcast_to(s, (self.size,))
        powers = np.empty((self.size, self.op.n + 1))
        powers[:, 0] = 1.0
        for p in range(1, self.op.n + 1):
            powers[:, p] = powers[:, p - 1] * neg
        return np.einsum("ilj,lj,ij->il", powers[:, D], C, self.sig)

    def norm(self, shift=0.0) -> np.ndarray:
        """Euclidean norm of lambda - shift."""
        n = self.op.n
        s = np.asarray(shift, dtype=float)
        sq = self.sig[:, 1] ** 2 - (2.0 * self.sig[:, 2] if n > 1 else 0.0)
        sq = sq - 2.0 * s * self.sig[:, 1] + n * s * s
        return np.sqrt(np.maximum(sq, 0.0))

    def inside(self, shift=0.0, slack=None) -> np.ndarray:
        if slack is None:
            slack = RELATIVE_SLACK * (1.0 + self.norm(shift))
        k = self.op.k
        if self.op.cone.membership is not None:
            lam = self.eigenvalues(shift)
            return np.asarray(self.op.cone.contains(lam, slack=slack), dtype=bool)
        sig = self.shifted_sigmas(shift)
        slack = np.asarray(slack, dtype=float)
        if slack.ndim:
            slack = slack[:, None]
        return np.all(sig[:, 1:k + 1] >= -slack, axis=1)

    def eigenvalues(self, shift=0.0) -> np.ndarray:
        if self.lam is None:
            raise ValueError("eigenvalues are not stored for this operator kind")
        return self.lam - np.asarray(shift, dtype=float)[..., None]

    def edge_shift(self):
        """Smallest s with lambda - s on the boundary of Gamma_k (sigma_k family).

        sigma_k(lambda - s) is hyperbolic in the direction (1, ..., 1), so its
        roots in s are real and lambda lies in Gamma_k exactly when all of
        them are positive; the first one is where the shift leaves the cone.
        Returns None for operators without a closed cone polynomial.
        """
        if self.op.kind != "sigma_k_root" or self.op.cone.membership is not None:
            return None
        n, k = self.op.n, self.op.k
        # p(s) = sum_j comb(n - j, k - j) (-s)^(k - j) sigma_j, highest power first
        coef = np.stack([comb(n - j, k - j) * (-1.0) ** (k - j) * self.sig[:, j] for j in range(k + 1)], axis=1)
        if k == 1:
            return -coef[:, 1] / coef[:, 0]
        if k == 2:
            a, b, c = coef[:, 0], coef[:, 1], coef[:, 2]
            disc = np.sqrt(np.maximum(b * b - 4 * a * c, 0.0))
            # smaller root without cancellation (b < 0 inside the cone)
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(b < 0, 2 * c / (-b + disc), (-b - disc) / (2 * a))
        comp = np.zeros((self.size, k, k))
        comp[:, 0, :] = -coef[:, 1:] / coef[:, :1]
        comp[:, np.arange(1, k), np.arange(k - 1)] = 1.0
        return np.min(np.linalg.eigvals(comp).real, axis=1)

    def F(self, shift=0.0, slack=None, slope: bool = False):
        """f(lambda - shift) inside the closed cone, -inf outside.

        With ``slope=True`` also returns d/ds f(lambda - s) for the sigma_k
        family (None for other operators).
        """
        n, k = self.op.n, self.op.k
        sig = self.shifted_sigmas(shift) if self.lam is None or self.op.kind == "sigma_k_root" else None
        if self.op.cone.membership is not None:
            inside = self.inside(shift, slack)
        else:
            if slack is None:
                slack = RELATIVE_SLACK * (1.0 + _norm(sig, n))
            slack = np.asarray(slack, dtype=float)
            inside = np.all(sig[:, 1:k + 1] >= -(slack[:, None] if slack.ndim else slack), axis=1)
        if self.op.kind == "sigma_k_root":
            sk = np.maximum(sig[:, k], 0.0)
            vals = sk ** (1.0 / k)
        else:
            vals = f_values(self.op, self.eigenvalues(shift))
        vals = np.where(inside, vals, -np.inf)
        if not slope:
            return vals
        if self.op.kind != "sigma_k_root" or self.op.cone.membership is not None:
            return vals, None
        with np.errstate(divide="ignore", invalid="ignore"):
            d = -(n - k + 1) * sig[:, k - 1] * sk ** (1.0 / k - 1.0) / k
        return vals, d


def _norm(sig, n):
    sq = sig[:, 1] ** 2 - (2.0 * sig[:, 2] if n > 1 else 0.0)
    return np.sqrt(np.maximum(sq, 0.0))


_TABLES: dict = {}


def _binomial_table(n: int):
    """C[l, j] = comb(n - j, l - j) for j <= l and the power index D = l - j."""
    if n not in _TABLES:
        C = np.array([[comb(n - j, l - j) if j <= l else 0 for j in range(n + 1)]
                      for l in range(n + 1)], dtype=float)
        D = np.maximum(np.subtract.outer(np.arange(n + 1), np.arange(n + 1)), 0)
        _TABLES[n] = (C, D)
    return _TABLES[n]


def slice_spectrum(problem: ProblemSpec, values, nodes=None) -> Spectrum:
    """Spectrum of the centred discrete Hessian at interior nodes (all by default)."""
    st = problem.domain.stencil
    if nodes is not None:
        st = sub_stencil(problem.domain, nodes)
    return Spectrum(problem.op, st.hessian(values))


def sub_stencil(domain: GridDomain, pos):
    """Stencil restricted to interior positions ``pos`` (indices into interior_idx)."""
    from .grid_domain import Stencil
    st = domain.stencil
    return Stencil(st.nodes[pos], [(p[pos], m[pos]) for p, m in st.axis],
                   {k: tuple(i[pos] for i in v) for k, v in st.cross.items()}, st.n, st.h)


def mollified_g(problem: ProblemSpec, eps_g: float) -> np.ndarray:
    """g_eps = max(g, eps_g) at interior nodes."""
    return g_mollify(problem.g_nodes[problem.domain.interior_idx], eps_g)


def rhs(problem: ProblemSpec, t: float, idx, cur, prev, dt: float, g_eps) -> np.ndarray:
    """exp((cur - prev)/dt + G(t, z, cur)) * g_eps at the nodes ``idx``."""
    with np.errstate(over="ignore"):
        return np.exp((cur - prev) / dt + problem.G_at(t, idx, cur)) * g_eps


def residual_slice(problem: ProblemSpec, prev, cur, t: float, dt: float, eps_g: float,
                   slack=None) -> np.ndarray:
    """Backward-difference residual F(H_h u) - RHS at every interior node."""
    idx = problem.domain.interior_idx
    F = slice_spectrum(problem, cur).F(slack=slack)
    R = rhs(problem, t, idx, cur[idx], prev[idx], dt, mollified_g(problem, eps_g))
    with np.errstate(invalid="ignore"):
        return np.where(np.isneginf(F), -np.inf, F - R)


# ---------------------------------------------------------------------------
# node colouring for vectorised Gauss-Seidel
# ---------------------------------------------------------------------------

def _used_moves(n: int):
    moves = [{a: 1} for a in range(2 * n)]
    for a, b in used_pairs(n):
        moves.append({a: 1, b: 1})
        moves.append({a: 1, b: -1})
    return moves


def colour_weights(n: int):
    """Weights w and modulus q so that no stencil move changes sum(w_a i_a) mod q."""
    dims = 2 * n
    moves = _used_moves(n)
    for q in range(2, 32):
        for rest in itertools.product(range(1, q), repeat=dims - 1):
            w = (1,) + rest
            if all(sum(w[a] * d for a, d in mv.items()) % q for mv in moves):
                return w, q
    raise RuntimeError("no colouring found")


def node_colours(domain: GridDomain) -> list[np.ndarray]:
    """Groups of interior positions with no stencil coupling inside a group."""
    w, q = colour_weights(domain.n)
    multi = np.array(np.unravel_index(domain.interior_idx, domain.shape))
    colour = (np.asarray(w)[:, None] * multi).sum(axis=0) % q
    return [np.flatnonzero(colour == c) for c in range(q) if np.any(colour == c)]


# ---------------------------------------------------------------------------
# per-node maximal feasible value
# ---------------------------------------------------------------------------

def max_feasible(problem: ProblemSpec, spectrum: Spectrum, idx, cur, prev, upper,
                 t: float, dt: float, g_eps, tol: float, max_iter: int = 60, slack=None):
    """Largest r in [cur, upper] keeping the residual at each node >= -tol.

    ``spectrum`` is the Hessian data at the current centre values. The
    residual is strictly decreasing in r, so the feasible set is an
    interval [cur, r*]. A bracket [lo feasible, hi infeasible] is shrunk for
    at most ``max_iter`` iterations; each iteration classifies two trial
    points, a Newton step from lo (which overshoots r* because the slope of
    the G term is left out) and a secant point, falling back to the
    midpoint whenever a trial is not strictly inside the bracket or the
    bracket failed to halve. The feasible end ``lo`` is returned, so ties
    resolve conservatively. Returns ``(values, infeasible)``; infeasible
    nodes (the current value already violates the bound) are unchanged.
    """
    h2 = problem.domain.h ** 2
    if slack is not None and np.ndim(slack):
        slack = np.asarray(slack, dtype=float)
    cur = np.asarray(cur, dtype=float)
    prev = np.asarray(prev, dtype=float)
    g_eps = np.asarray(g_eps, dtype=float)
    idx = np.asarray(idx)
    upper = np.maximum(np.asarray(upper, dtype=float), cur)

    def q(r, sel):
        """Residual + tol, its scale, and a slope bound at the points r."""
        sp = spectrum.take(sel)
        c = cur[sel]
        shift = (r - c) / h2
        sl = slack[sel] if np.ndim(slack) else slack
        F, dF = sp.F(shift, sl, slope=True)
        R = rhs(problem, t, idx[sel], r, prev[sel], dt, g_eps[sel])
        with np.errstate(invalid="ignore"):
            val = np.where(np.isfinite(F) & np.isfinite(R), F - R + tol, -np.inf)
        # rounding scale: the time difference amplifies errors in r by 1/dt
        amp = 1.0 + (np.abs(r) + np.abs(prev[sel])) / dt
        scale = np.where(np.isfinite(F), np.abs(F), 0.0) + np.where(np.isfinite(R), np.abs(R) * amp, 0.0)
        slope = None if dF is None else dF / h2 - R / dt
        return val, scale, slope

    every = np.arange(len(cur))
    q_lo, sc_lo, s_lo = q(cur, every)
    edge = spectrum.edge_shift()
    if edge is not None:
        # beyond the cone edge the residual is -inf; cap there so it stays continuous
        with np.errstate(invalid="ignore"):
            r_edge = cur + h2 * edge
        upper = np.where(np.isfinite(r_edge) & (r_edge >= cur), np.minimum(upper, r_edge), upper)
    q_hi, _, _ = q(upper, every)
    # within rounding of the root already: keep the value without flagging
    at_root = (q_lo < 0) & (q_lo >= -4e-16 * (1.0 + sc_lo))
    infeasible = ~(q_lo >= 0) & ~at_root
    out = cur.copy()
    top = (q_hi >= 0) & (q_lo >= 0)
    out[top] = upper[top]
    act = np.flatnonzero(~top & (q_lo >= 0))
    lo, hi, qlo, qhi, sclo = cur[act], upper[act], q_lo[act], q_hi[act], sc_lo[act]
    slo = None if s_lo is None else s_lo[act]
    halved = np.ones(len(act), dtype=bool)
    for _ in range(max_iter):
        if len(act) == 0:
            break
        mid = 0.5 * (lo + hi)
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            sec = np.where(np.isfinite(qhi) & halved, lo - qlo * (hi - lo) / (qhi - qlo), mid)
            newt = mid if slo is None else np.where(slo < 0, lo - qlo / slo, mid)
        sec = np.where((sec > lo) & (sec < hi), sec, mid)
        # steps below resolution probe just inside an end to close the bracket
        newt = np.maximum(newt, lo + 0.5e-15 * (1.0 + np.abs(lo)))
        newt = np.where(newt < hi, newt, np.maximum(hi - 0.5e-15 * (1.0 + np.abs(hi)), mid))
        m = len(act)
        qx, scale, sx = q(np.concatenate([sec, newt]), np.concatenate([act, act]))
        width0 = hi - lo
        for part in (slice(0, m), slice(m, 2 * m)):
            x = (sec if part.start == 0 else newt)
            qp = qx[part]
            ok = qp >= 0
            better_lo = ok & (x > lo)
            better_hi = ~ok & (x < hi)
            lo = np.where(better_lo, x, lo)
            qlo = np.where(better_lo, qp, qlo)
            sclo = np.where(better_lo, scale[part], sclo)
            if sx is not None:
                slo = np.where(better_lo, sx[part], slo)
            hi = np.where(better_hi, x, hi)
            qhi = np.where(better_hi, qp, qhi)
        width = hi - lo
        halved = width <= 0.5 * width0
        done = (width <= 1e-15 * (1.0 + np.abs(lo))) | (qlo <= 4e-16 * (1.0 + sclo))
        out[act[done]] = lo[done]
        keep = ~done
        act, lo, hi, qlo, qhi, sclo = act[keep], lo[keep], hi[keep], qlo[keep], qhi[keep], sclo[keep]
        halved = halved[keep]
        if slo is not None:
            slo = slo[keep]
    out[act] = lo
    return out, infeasible
