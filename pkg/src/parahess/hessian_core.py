"""Cone arithmetic, symmetric eigenvalue operators and the operator F.

Everything here accepts batches: a trailing axis of length ``n`` holds one
eigenvalue vector, a trailing ``(n, n)`` block holds one Hermitian matrix.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

NEG_INFINITY = float("-inf")


class DomainError(ValueError):
    """Point lies outside the closed cone where f is defined."""


# ---------------------------------------------------------------------------
# cones
# ---------------------------------------------------------------------------

def elementary_symmetric_all(x) -> np.ndarray:
    """All elementary symmetric sums sigma_0..sigma_n of the last axis.

    Returns an array of shape ``x.shape[:-1] + (n + 1,)``.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    e = np.zeros(x.shape[:-1] + (n + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        xi = x[..., i]
        # descending so e[j-1] is still the previous value
        for j in range(i + 1, 0, -1):
            e[..., j] = e[..., j] + xi * e[..., j - 1]
    return e


def elementary_symmetric(x, l: int):
    """sigma_l(x): sum over all l-subsets of the product of entries."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if not isinstance(l, (int, np.integer)) or not 1 <= l <= n:
        raise ValueError(f"index l={l} outside 1..{n}")
    out = elementary_symmetric_all(x)[..., l]
    return float(out) if out.ndim == 0 else out


def default_slack(x) -> np.ndarray:
    """Relative membership slack 1e-10 * (1 + |x|_inf)."""
    x = np.asarray(x, dtype=float)
    return 1e-10 * (1.0 + np.max(np.abs(x), axis=-1))


@dataclass(frozen=True)
class ConeSpec:
    """The Garding cone Gamma_k in R^n.

    ``membership`` is an extension hook: a callable ``(x, slack, strict) ->
    bool array`` replacing the sigma_l test for a user-supplied cone. It must
    describe an open convex symmetric cone between Gamma_n and Gamma_1.
    """

    n: int
    k: int
    membership: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be positive, got n={self.n}")
        if not 1 <= self.k <= self.n:
            raise ValueError(f"cone index k={self.k} outside 1..{self.n}")

    def contains(self, x, slack=None, strict: bool = False):
        return in_cone(x, self, slack=slack, strict=strict)


def in_cone(x, cone: ConeSpec, slack=None, strict: bool = False):
    """Membership test for Gamma_k (strict) or its closure widened by ``slack``.

    Non-strict: sigma_l(x) >= -slack for l = 1..k, with ``slack`` defaulting
    to :func:`default_slack`. Strict: sigma_l(x) > 0.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != cone.n:
        raise ValueError(f"expected vectors of length {cone.n}, got {x.shape[-1]}")
    if slack is not None and np.any(np.asarray(slack) < 0):
        raise ValueError("slack must be non-negative; use strict=True for the open cone")
    if cone.membership is not None:
        out = cone.membership(x, slack, strict)
    else:
        e = elementary_symmetric_all(x)[..., 1:cone.k + 1]
        if strict:
            out = np.all(e > 0, axis=-1)
        else:
            s = default_slack(x) if slack is None else np.asarray(slack, dtype=float)
            out = np.all(e >= -np.expand_dims(s, -1), axis=-1)
    return bool(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# symmetric functions f
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymOpSpec:
    """Symmetric function f on the closed cone.

    ``kind == "sigma_k_root"`` is the built-in f = sigma_k^(1/k). For
    ``kind == "custom"`` supply a vectorised ``func`` mapping ``(..., n)``
    arrays to ``(...)`` arrays, and list in ``declared_axioms`` which
    properties the caller vouches for (the audit still tests them).
    """

    cone: ConeSpec
    kind: str = "sigma_k_root"
    func: Callable | None = field(default=None, compare=False, repr=False)
    declared_axioms: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("sigma_k_root", "custom"):
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom operator needs func")

    @property
    def n(self) -> int:
        return self.cone.n

    @property
    def k(self) -> int:
        return self.cone.k

    @property
    def homogeneous(self) -> bool:
        return self.kind == "sigma_k_root" or "homogeneous" in self.declared_axioms

    def to_dict(self) -> dict:
        if self.kind != "sigma_k_root":
            raise ValueError("only the built-in operator family serialises")
        return {"kind": "sigma_k_root", "n": self.n, "k": self.k}

    @classmethod
    def from_dict(cls, d: dict) -> "SymOpSpec":
        if d.get("kind") != "sigma_k_root":
            raise ValueError(f"unknown operator kind {d.get('kind')!r}")
        return cls(ConeSpec(int(d["n"]), int(d["k"])))

    def one(self) -> float:
        """f(1, ..., 1)."""
        return float(f_values(self, np.ones(self.n)))


def sigma_k_root(n: int, k: int) -> SymOpSpec:
    return SymOpSpec(ConeSpec(n, k))


def f_values(f: SymOpSpec, x) -> np.ndarray:
    """Evaluate f without a domain check (continuous extension on the boundary)."""
    x = np.asarray(x, dtype=float)
    if f.kind == "sigma_k_root":
        s = elementary_symmetric_all(x)[..., f.k]
        return np.maximum(s, 0.0) ** (1.0 / f.k)
    return np.asarray(f.func(x), dtype=float)


def f_eval(f: SymOpSpec, x, slack=None):
    """f(x) for x in the closed cone; raises :class:`DomainError` outside."""
    x = np.asarray(x, dtype=float)
    inside = np.asarray(in_cone(x, f.cone, slack=slack))
    if not np.all(inside):
        raise DomainError("point outside the closed cone; use F_eval for the -inf branch")
    out = f_values(f, x)
    return float(out) if out.ndim == 0 else out


def f_gradient(f: SymOpSpec, x, analytic: bool = False) -> np.ndarray:
    """Gradient of f at an interior point of the cone.

    Central differences with step 1e-6 * (1 + |x|_inf); ``analytic=True``
    uses the closed form for sigma_k^(1/k).
    """
    x = np.asarray(x, dtype=float)
    if not np.all(in_cone(x, f.cone, strict=True)):
        raise DomainError("gradient requested on or outside the cone boundary")
    n = x.shape[-1]
    if analytic and f.kind == "sigma_k_root":
        k = f.k
        sk = elementary_symmetric_all(x)[..., k]
        grad = np.empty_like(x)
        for i in range(n):
            rest = np.delete(x, i, axis=-1)
            skm1 = elementary_symmetric_all(rest)[..., k - 1]
            grad[..., i] = skm1 * sk ** (1.0 / k - 1.0) / k
        return grad
    h = 1e-6 * (1.0 + np.max(np.abs(x), axis=-1, keepdims=True))
    grad = np.empty_like(x)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        grad[..., i] = (f_values(f, x + h * e) - f_values(f, x - h * e)) / (2 * h[..., 0])
    return grad


# ---------------------------------------------------------------------------
# Hermitian matrices and eigenvalues
# ---------------------------------------------------------------------------

def as_hermitian(H, tol: float = 1e-12) -> np.ndarray:
    """Validate and symmetrise a (batch of) Hermitian matrices."""
    H = np.asarray(H, dtype=complex)
    if H.ndim < 2 or H.shape[-1] != H.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {H.shape}")
    Hc = np.conj(np.swapaxes(H, -1, -2))
    scale = 1.0 + np.max(np.abs(H)) if H.size else 1.0
    if np.max(np.abs(H - Hc), initial=0.0) > tol * scale:
        raise ValueError("matrix is not Hermitian")
    return 0.5 * (H + Hc)


def real_embedding(H) -> np.ndarray:
    """The real symmetric 2n x 2n matrix [[Re H, -Im H], [Im H, Re H]]."""
    H = np.asarray(H, dtype=complex)
    re, im = H.real, H.imag
    top = np.concatenate([re, -im], axis=-1)
    bottom = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def jacobi_eigh(A, tol: float = 1e-14, max_sweeps: int = 60, vectors: bool = False):
    """Cyclic Jacobi eigen-decomposition of a batch of real symmetric matrices.

    Sweeps stop per matrix once the off-diagonal Frobenius norm drops below
    ``tol`` times the full norm. Returns ``(w, V)`` with unsorted eigenvalues
    ``w`` and, if requested, orthogonal ``V`` with ``A V = V diag(w)``.
    """
    A_all = np.array(A, dtype=float, copy=True)
    batch_shape = A_all.shape[:-2]
    m = A_all.shape[-1]
    A_all = A_all.reshape((-1, m, m))
    V_all = np.broadcast_to(np.eye(m), A_all.shape).copy() if vectors else None
    scale = np.sqrt(np.sum(A_all * A_all, axis=(1, 2)))
    iu = np.triu_indices(m, 1)
    active = np.arange(len(A_all))
    for _ in range(max_sweeps):
        off = np.sqrt(2.0 * np.sum(A_all[active][:, iu[0], iu[1]] ** 2, axis=1))
        active = active[off > tol * scale[active]]
        if len(active) == 0:
            break
        A = A_all[active]
        V = V_all[active] if vectors else None
        for p, q in itertools.combinations(range(m), 2):
            apq = A[:, p, q]
            rot = apq != 0.0
            if not np.any(rot):
                continue
            safe = np.where(rot, apq, 1.0)
            with np.errstate(over="ignore"):
                # theta = inf gives t = 0: the entry is negligible
                theta = (A[:, q, q] - A[:, p, p]) / (2.0 * safe)
                t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            c = np.where(rot, c, 1.0)[:, None]
            s = np.where(rot, s, 0.0)[:, None]
            cp, cq = A[:, :, p].copy(), A[:, :, q].copy()
            A[:, :, p] = c * cp - s * cq
            A[:, :, q] = s * cp + c * cq
            rp, rq = A[:, p, :].copy(), A[:, q, :].copy()
            A[:, p, :] = c * rp - s * rq
            A[:, q, :] = s * rp + c * rq
            A[:, p, q] = np.where(rot, 0.0, A[:, p, q])
            A[:, q, p] = A[:, p, q]
            if vectors:
                vp, vq = V[:, :, p].copy(), V[:, :, q].copy()
                V[:, :, p] = c * vp - s * vq
                V[:, :, q] = s * vp + c * vq
        A_all[active] = A
        if vectors:
            V_all[active] = V
    w = np.diagonal(A_all, axis1=1, axis2=2).reshape(batch_shape + (m,))
    if vectors:
        return w, V_all.reshape(batch_shape + (m, m))
    return w, None


def eigenvalues_hermitian(H, validate: bool = True, method: str = "jacobi") -> np.ndarray:
    """Ascending eigenvalues of (a batch of) Hermitian matrices.

    ``method="jacobi"`` runs cyclic Jacobi on the real embedding; each
    eigenvalue of H appears twice there, so every second entry of the sorted
    embedded spectrum is kept. ``method="lapack"`` defers to
    ``numpy.linalg.eigvalsh`` for large batches in the solver loops.
    """
    if validate:
        H = as_hermitian(H)
    else:
        H = np.asarray(H, dtype=complex)
    if method == "lapack":
        return np.linalg.eigvalsh(H)
    if method != "jacobi":
        raise ValueError(f"unknown eigenvalue method {method!r}")
    w, _ = jacobi_eigh(real_embedding(H))
    w = np.sort(w, axis=-1)
    return w[..., ::2]


def eigh_hermitian(H):
    """Eigenvalues (ascending) and complex eigenvectors of one Hermitian matrix."""
    H = as_hermitian(H)
    n = H.shape[-1]
    w, V = jacobi_eigh(real_embedding(H), vectors=True)
    order = np.argsort(w)[::2]
    # a real eigenvector (a, b) of the embedding gives the complex vector a + i b
    vecs = V[:n, order] + 1j * V[n:, order]
    vecs /= np.linalg.norm(vecs, axis=0, keepdims=True)
    return w[order], vecs


def hermitian_sigmas(H) -> np.ndarray:
    """sigma_0..sigma_n of the eigenvalues of (a batch of) Hermitian matrices.

    These are the signed characteristic-polynomial coefficients, obtained by
    the Faddeev-LeVerrier recurrence without diagonalising. Used where only
    symmetric functions of the spectrum are needed (sigma_k operators).
    """
    A = np.asarray(H, dtype=complex)
    n = A.shape[-1]
    out = np.empty(A.shape[:-2] + (n + 1,))
    out[..., 0] = 1.0
    eye = np.eye(n)
    M = np.zeros_like(A)
    c = np.ones(A.shape[:-2], dtype=complex)
    for j in range(1, n + 1):
        M = A @ M + c[..., None, None] * eye
        c = -np.trace(A @ M, axis1=-2, axis2=-1) / j
        out[..., j] = (-1) ** j * c.real
    return out


# ---------------------------------------------------------------------------
# the operator F
# ---------------------------------------------------------------------------

def F_values(f: SymOpSpec, lam, slack=None) -> np.ndarray:
    """F on eigenvalue vectors: f(lam) inside the closed cone, -inf outside."""
    lam = np.asarray(lam, dtype=float)
    inside = np.asarray(in_cone(lam, f.cone, slack=slack))
    vals = f_values(f, lam)
    return np.where(inside, vals, -np.inf)


def F_eval(H, f: SymOpSpec, slack=None):
    """F(H) = f(lambda(H)) on the closed cone, NEG_INFINITY elsewhere."""
    lam = eigenvalues_hermitian(H)
    out = F_values(f, lam, slack=slack)
    return float(out) if out.ndim == 0 else out


def complex_hessian_of_quadratic(Q, tol: float = 1e-12) -> np.ndarray:
    """Complex Hessian of z -> 1/2 <Q z, z> in coordinates (x_1..x_n, y_1..y_n)."""
    Q = np.asarray(Q, dtype=float)
    m = Q.shape[-1]
    if Q.shape[-2] != m or m % 2:
        raise ValueError(f"expected a symmetric 2n x 2n matrix, got shape {Q.shape}")
    if np.max(np.abs(Q - np.swapaxes(Q, -1, -2)), initial=0.0) > tol * (1.0 + np.max(np.abs(Q))):
        raise ValueError("Q is not symmetric")
    n = m // 2
    xx = Q[..., :n, :n]
    yy = Q[..., n:, n:]
    xy = Q[..., :n, n:]
    yx = Q[..., n:, :n]
    H = 0.25 * ((xx + yy) + 1j * (xy - yx))
    return 0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))


# ---------------------------------------------------------------------------
# randomized axiom audit
# ---------------------------------------------------------------------------

@dataclass
class AxiomResult:
    name: str
    passed: bool
    trials: int
    failures: int
    worst_margin: float
    witness: list | None = None

    def to_dict(self) -> dict:
        return {
            "axiom": self.name,
            "pass": self.passed,
            "trials": self.trials,
            "failures": self.failures,
            "worst_margin": self.worst_margin,
            "witness": self.witness,
        }


@dataclass
class AxiomReport:
    operator: str
    results: list[AxiomResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failed_axioms(self) -> list[str]:
        return [r.name for r in self.results if not r.passed]

    def __getitem__(self, name: str) -> AxiomResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"operator": self.operator, "pass": self.passed,
                "axioms": [r.to_dict() for r in self.results]}


def _result(name, margins, points, strict=False) -> AxiomResult:
    margins = np.asarray(margins, dtype=float)
    bad = ~(margins > 0) if strict else ~(margins >= 0)
    i = int(np.argmin(np.where(np.isnan(margins), -np.inf, margins)))
    return AxiomResult(name, not bool(np.any(bad)), int(margins.size), int(np.sum(bad)),
                       float(margins[i]), np.asarray(points[i]).tolist())


def sample_cone(cone: ConeSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """Random points strictly inside the cone at scales spread over 10^-2..10^2."""
    out = []
    have = 0
    while have < count:
        y = rng.standard_normal((2 * count, cone.n))
        y += rng.uniform(0.0, 3.0, size=(2 * count, 1))
        keep = y[np.asarray(in_cone(y, cone, strict=True))]
        if cone.membership is None:
            # stay clear of the boundary so the audit measures f, not rounding
            e = elementary_symmetric_all(keep)[:, 1:cone.k + 1]
            scale = 1.0 + np.max(np.abs(keep), axis=1, keepdims=True)
            keep = keep[np.all(e > 1e-6 * scale ** np.arange(1, cone.k + 1), axis=1)]
        out.append(keep)
        have += len(keep)
    pts = np.concatenate(out)[:count]
    return pts * 10.0 ** rng.uniform(-2, 2, size=(count, 1))


def sample_cone_boundary(cone: ConeSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """Points of the cone boundary where sigma_k vanishes exactly in floating point.

    ``n - k + 1`` zero coordinates make every k-subset product vanish while
    the positive remainder keeps lower sums non-negative. For k = 1 half the
    samples are zero-sum dyadic vectors.
    """
    n, k = cone.n, cone.k
    pts = np.zeros((count, n))
    pos = rng.uniform(0.1, 10.0, size=(count, n))
    nz = k - 1
    for i in range(count):
        idx = rng.permutation(n)[:nz]
        pts[i, idx] = pos[i, :nz]
    if k == 1 and n > 1:
        half = count // 2
        d = rng.integers(-4096, 4096, size=(half, n)).astype(float) / 1024.0
        d[:, -1] = -np.sum(d[:, :-1], axis=1)
        pts[:half] = d
    return pts


def random_unitary(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    Z = rng.standard_normal((count, n, n)) + 1j * rng.standard_normal((count, n, n))
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R, axis1=1, axis2=2)
    return Q * (d / np.abs(d))[:, None, :]


def check_operator_axioms(f: SymOpSpec, samples: int = 1000, seed: int = 0,
                          tol: float = 1e-10) -> AxiomReport:
    """Randomised audit of the structural hypotheses on f and F.

    Symmetry, homogeneity (when claimed), midpoint concavity, strict
    coordinate monotonicity, vanishing on the cone boundary, monotonicity
    of F under positive semidefinite perturbations, and coercivity along the
    diagonal. Tolerances are ``tol * (1 + |x|_inf)``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    n, cone = f.n, f.cone
    res = []

    def scale(x):
        return 1.0 + np.max(np.abs(x), axis=-1)

    x = sample_cone(cone, samples, rng)
    fx = f_values(f, x)

    perm = np.argsort(rng.random((samples, n)), axis=1)
    px = np.take_along_axis(x, perm, axis=1)
    res.append(_result("symmetry", tol * scale(x) - np.abs(f_values(f, px) - fx), x))

    if f.homogeneous:
        c = 10.0 ** rng.uniform(-1, 1, size=samples)
        err = np.abs(f_values(f, c[:, None] * x) - c * fx)
        res.append(_result("homogeneity", tol * c * scale(x) - err, x))

    y = sample_cone(cone, samples, rng)
    mid = f_values(f, 0.5 * (x + y)) - 0.5 * (fx + f_values(f, y))
    res.append(_result("concavity", mid + tol * scale(np.maximum(np.abs(x), np.abs(y))), x))

    i = rng.integers(0, n, size=samples)
    step = np.zeros_like(x)
    step[np.arange(samples), i] = rng.uniform(0.05, 1.0, size=samples) * scale(x)
    res.append(_result("strict_increase", f_values(f, x + step) - fx, x, strict=True))

    b = sample_cone_boundary(cone, samples, rng) * 10.0 ** rng.uniform(-2, 2, size=(samples, 1))
    res.append(_result("boundary_zero", tol * scale(b) - np.abs(f_values(f, b)), b))

    U = random_unitary(n, samples, rng)
    xm = sample_cone(cone, samples, rng)
    M = np.einsum("bij,bj,bkj->bik", U, xm, np.conj(U))
    v = rng.standard_normal((samples, n)) + 1j * rng.standard_normal((samples, n))
    v *= np.sqrt(rng.uniform(0.05, 1.0, size=(samples, 1)) * scale(xm)[:, None]) / np.linalg.norm(v, axis=1, keepdims=True)
    N = np.einsum("bi,bj->bij", v, np.conj(v))
    lam_m = eigenvalues_hermitian(M, validate=False)
    lam_mn = eigenvalues_hermitian(M + N, validate=False)
    gap = F_values(f, lam_mn) - F_values(f, lam_m)
    res.append(_result("F_monotone_psd", gap, xm, strict=True))

    R = 2.0 ** np.arange(0, 61)
    diag = f_values(f, R[:, None] * np.ones((1, n)))
    inc = np.diff(diag)
    grow = diag[-1] / max(diag[0], np.finfo(float).tiny) - 1e6
    res.append(_result("coercivity", np.append(inc, grow), np.append(R[1:], R[-1])[:, None] * np.ones((1, n)), strict=True))

    name = f"{f.kind}(n={n}, k={f.k})"
    return AxiomReport(name, res)
