"""Grid domains in C^n = R^2n, space-time fields and the time/space-time convolutions.

Coordinates are ordered (x_1..x_n, y_1..y_n) with z_j = x_j + i y_j. A
spatial field is a flat array over all box nodes (NaN on exterior nodes);
a :class:`SpaceTimeField` stacks one such array per time node.
"""
from __future__ import annotations

import csv
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .hessian_core import (ConeSpec, SymOpSpec, eigenvalues_hermitian, in_cone)


class ConfigurationError(ValueError):
    """Problem or domain data violates a structural requirement."""


class PseudoconvexityError(ConfigurationError):
    """The defining function does not certify strict Gamma-pseudoconvexity."""


class StencilError(ValueError):
    pass


class GridMismatchError(ValueError):
    pass


# ---------------------------------------------------------------------------
# stencil
# ---------------------------------------------------------------------------

@dataclass
class Stencil:
    """Flat neighbour indices of the complex-Hessian stencil at a set of nodes.

    ``axis[a]`` holds (plus, minus) neighbours along axis a; ``cross[(a, b)]``
    holds (++, --, +-, -+) neighbours for a < b.
    """

    nodes: np.ndarray
    axis: list
    cross: dict
    n: int
    h: float

    def second(self, u, a, b):
        if a == b:
            p, m = self.axis[a]
            return (u[p] - 2.0 * u[self.nodes] + u[m]) / self.h**2
        if a > b:
            a, b = b, a
        pp, mm, pm, mp = self.cross[(a, b)]
        return (u[pp] + u[mm] - u[pm] - u[mp]) / (4.0 * self.h**2)

    def hessian(self, u) -> np.ndarray:
        """Discrete complex Hessian at the stencil nodes, shape (m, n, n)."""
        n = self.n
        u = np.asarray(u, dtype=float)
        H = np.zeros((len(self.nodes), n, n), dtype=complex)
        for j in range(n):
            H[:, j, j] = 0.25 * (self.second(u, j, j) + self.second(u, n + j, n + j))
            for k in range(j + 1, n):
                re = self.second(u, j, k) + self.second(u, n + j, n + k)
                im = self.second(u, j, n + k) - self.second(u, n + j, k)
                H[:, j, k] = 0.25 * (re + 1j * im)
                H[:, k, j] = np.conj(H[:, j, k])
        return H

    def laplacian(self, u) -> np.ndarray:
        """Sum of pure second differences over all 2n axes."""
        return sum(self.second(u, a, a) for a in range(2 * self.n))

    def neighbours(self) -> np.ndarray:
        cols = [i for pair in self.axis for i in pair]
        cols += [i for quad in self.cross.values() for i in quad]
        return np.stack(cols, axis=1)


def used_pairs(n: int) -> list[tuple[int, int]]:
    """Axis pairs (a, b), a < b, whose mixed differences enter the complex Hessian.

    Pairs (x_j, y_j) cancel in H and are never read, so for n = 1 the
    stencil has no diagonal points.
    """
    return [(a, b) for a, b in itertools.combinations(range(2 * n), 2) if a % n != b % n] if n > 1 else []


def _build_stencil(shape, nodes, n, h) -> Stencil:
    multi = np.array(np.unravel_index(nodes, shape))
    dims = len(shape)

    def shifted(offsets):
        idx = multi.copy()
        for a, d in offsets:
            idx[a] += d
        if np.any(idx < 0) or np.any(idx >= np.array(shape)[:, None]):
            raise StencilError("stencil leaves the box")
        return np.ravel_multi_index(tuple(idx), shape)

    axis = [(shifted([(a, 1)]), shifted([(a, -1)])) for a in range(dims)]
    cross = {}
    for a, b in used_pairs(n):
        cross[(a, b)] = (shifted([(a, 1), (b, 1)]), shifted([(a, -1), (b, -1)]),
                         shifted([(a, 1), (b, -1)]), shifted([(a, -1), (b, 1)]))
    return Stencil(nodes, axis, cross, n, h)


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

@dataclass
class GridDomain:
    """Uniform box grid [-half_width, half_width]^2n with node classification.

    ``rho`` maps an (m, 2n) coordinate array to defining-function values;
    ``rho_grad`` (optional) to (m, 2n) gradients. ``margin`` is the
    strict-pseudoconvexity margin: min eigenvalue of H rho minus one.
    """

    n: int
    half_width: float
    h: float
    rho: Callable
    rho_grad: Callable | None = None
    margin: float = 0.0
    rho_hessian: Callable | None = field(default=None, repr=False)
    name: str = "domain"

    def __post_init__(self):
        if self.h <= 0:
            raise ConfigurationError("grid spacing h must be positive")
        steps = int(round(2 * self.half_width / self.h))
        if steps < 2 or not math.isclose(steps * self.h, 2 * self.half_width, rel_tol=1e-9):
            raise ConfigurationError("box width must be a multiple of h with at least 3 nodes per axis")
        self.points_per_axis = steps + 1
        self.shape = (self.points_per_axis,) * (2 * self.n)
        self.axis_coords = -self.half_width + self.h * np.arange(self.points_per_axis)
        grids = np.meshgrid(*([self.axis_coords] * (2 * self.n)), indexing="ij")
        self.coords = np.stack([g.ravel() for g in grids], axis=1)
        self.size = self.coords.shape[0]
        self.rho_values = np.asarray(self.rho(self.coords), dtype=float)
        classify_nodes(self)

    @property
    def defined(self) -> np.ndarray:
        return self.interior | self.boundary

    def index_of(self, point) -> int:
        point = np.asarray(point, dtype=float)
        idx = np.rint((point + self.half_width) / self.h).astype(int)
        if np.any(np.abs(idx * self.h - self.half_width - point) > 1e-9 * (1 + self.half_width)):
            raise GridMismatchError(f"point {point.tolist()} is not a grid node")
        if np.any(idx < 0) or np.any(idx >= self.points_per_axis):
            raise GridMismatchError(f"point {point.tolist()} outside the box")
        return int(np.ravel_multi_index(tuple(idx), self.shape))

    def empty_field(self) -> np.ndarray:
        out = np.full(self.size, np.nan)
        return out

    def evaluate(self, func, *args) -> np.ndarray:
        """Evaluate ``func(*args, coords)`` on defined nodes, NaN elsewhere."""
        out = self.empty_field()
        d = self.defined
        out[d] = np.broadcast_to(np.asarray(func(*args, self.coords[d]), dtype=float), (int(d.sum()),))
        return out

    def abs2(self) -> np.ndarray:
        return np.sum(self.coords**2, axis=1)

    def c_value(self) -> float:
        """sup(-rho) over the interior nodes."""
        return float(np.max(-self.rho_values[self.interior]))

    def distance_to_boundary(self) -> np.ndarray:
        """Euclidean distance from each interior node to the nearest boundary node."""
        b = self.coords[self.boundary]
        out = np.full(self.size, np.nan)
        idx = np.flatnonzero(self.interior)
        for start in range(0, len(idx), 2048):
            chunk = idx[start:start + 2048]
            d2 = np.sum((self.coords[chunk, None, :] - b[None, :, :]) ** 2, axis=2)
            out[chunk] = np.sqrt(np.min(d2, axis=1))
        return out

    def certify(self, cone: ConeSpec) -> float:
        """Check H rho - I lies in the open cone at interior and boundary nodes.

        Returns the smallest eigenvalue of H rho minus one (the Gamma_n
        margin). Raises :class:`PseudoconvexityError` on failure.
        """
        pts = self.coords[self.defined]
        if self.rho_hessian is not None:
            Hr = self.rho_hessian(pts)
        else:
            Hr = self.stencil.hessian(self.rho_values)
            pts = self.coords[self.interior]
        lam = eigenvalues_hermitian(Hr, validate=False) - 1.0
        ok = np.asarray(in_cone(lam, cone, strict=True))
        if not np.all(ok):
            i = int(np.argmin(ok))
            raise PseudoconvexityError(
                "strict Γ-pseudoconvexity certificate failed: H rho - I not in the cone "
                f"at node {pts[i].tolist()} (eigenvalues {lam[i].tolist()})")
        return float(np.min(lam))


def classify_nodes(domain: GridDomain) -> None:
    """Partition box nodes into interior / boundary / exterior masks.

    Interior: rho < 0 and every axis neighbour inside the box. Boundary:
    any non-interior node reached by the Hessian stencil (axis step, or for
    n >= 2 a diagonal step in a mixed pair) from an interior node. Boundary nodes also get their
    projection onto {rho = 0} by Newton iteration along grad rho.
    """
    shape = domain.shape
    dims = len(shape)
    multi = np.array(np.unravel_index(np.arange(domain.size), shape))
    inside_box = np.all((multi >= 1) & (multi <= shape[0] - 2), axis=0)
    interior = (domain.rho_values < 0) & inside_box
    if not np.any(interior):
        raise ConfigurationError("domain has no interior nodes")
    grid = interior.reshape(shape)
    reach = np.zeros(shape, dtype=bool)
    offsets = [(a, d) for a in range(dims) for d in (1, -1)]
    moves = [[o] for o in offsets]
    moves += [[(a, da), (b, db)] for a, b in used_pairs(domain.n)
              for da in (1, -1) for db in (1, -1)]
    for mv in moves:
        shifted = grid
        for a, d in mv:
            # interior nodes never touch the box faces, so rolling cannot wrap
            shifted = np.roll(shifted, d, axis=a)
        reach |= shifted
    boundary = reach.ravel() & ~interior
    domain.interior = interior
    domain.boundary = boundary
    domain.exterior = ~(interior | boundary)
    domain.interior_idx = np.flatnonzero(interior)
    domain.boundary_idx = np.flatnonzero(boundary)
    domain.stencil = _build_stencil(shape, domain.interior_idx, domain.n, domain.h)
    domain.projected = project_to_boundary(domain, domain.coords[boundary])


def _numeric_grad(rho, pts, step=1e-7):
    g = np.empty_like(pts)
    for a in range(pts.shape[1]):
        e = np.zeros(pts.shape[1])
        e[a] = step
        g[:, a] = (rho(pts + e) - rho(pts - e)) / (2 * step)
    return g


def project_to_boundary(domain: GridDomain, pts, max_iter: int = 50) -> np.ndarray:
    """Newton iteration z <- z - rho(z) grad rho / |grad rho|^2 onto {rho = 0}."""
    z = np.array(pts, dtype=float, copy=True)
    if len(z) == 0:
        return z
    for _ in range(max_iter):
        r = np.asarray(domain.rho(z), dtype=float)
        if np.all(np.abs(r) <= 1e-14 * (1 + np.abs(domain.rho_values).max())):
            break
        g = domain.rho_grad(z) if domain.rho_grad is not None else _numeric_grad(domain.rho, z)
        z -= (r / np.sum(g * g, axis=1))[:, None] * g
    return z


def make_ball_domain(n: int, R: float, a: float, h: float) -> GridDomain:
    """Ball |z| < R with defining function rho = a(|z|^2 - R^2), a > 1.

    H rho = a I, so H rho - I = (a - 1) I lies in every Gamma_k exactly
    when a > 1.
    """
    if R <= 0 or h <= 0:
        raise ConfigurationError("ball radius and grid spacing must be positive")
    if a <= 1:
        raise PseudoconvexityError(
            f"strict Γ-pseudoconvexity certificate failed: scale a={a} must exceed 1 "
            "(H rho - I = (a-1) I)")
    half = math.ceil(R / h - 1e-9) * h

    def rho(z):
        return a * (np.sum(np.asarray(z) ** 2, axis=-1) - R * R)

    def rho_grad(z):
        return 2.0 * a * np.asarray(z)

    def rho_hessian(z):
        return np.broadcast_to(a * np.eye(n, dtype=complex), (len(z), n, n))

    return GridDomain(n, half, h, rho, rho_grad, margin=a - 1.0,
                      rho_hessian=rho_hessian, name=f"ball(n={n}, R={R}, a={a})")


# ---------------------------------------------------------------------------
# time grids and fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeGrid:
    T: float
    M: int

    def __post_init__(self):
        if self.T <= 0 or self.M < 1:
            raise ConfigurationError("time horizon must be positive with at least one step")

    @property
    def dt(self) -> float:
        return self.T / self.M

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.M + 1)


@dataclass
class SpaceTimeField:
    """Real values per (time node, box node); NaN marks undefined nodes."""

    domain: GridDomain
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.times), self.domain.size):
            raise ValueError(f"values shape {self.values.shape} does not match grid "
                             f"({len(self.times)}, {self.domain.size})")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def copy(self) -> "SpaceTimeField":
        return SpaceTimeField(self.domain, self.times.copy(), self.values.copy())

    def defined_values(self) -> np.ndarray:
        return self.values[:, self.domain.defined]

    def osc(self) -> float:
        v = self.defined_values()
        return float(np.max(v) - np.min(v))

    def time_index(self, t0: float) -> int:
        m = int(np.argmin(np.abs(self.times - t0)))
        if abs(self.times[m] - t0) > 1e-9 * (1.0 + abs(t0)):
            raise ValueError(f"t0={t0} is not a time node")
        return m

    def same_grid(self, other: "SpaceTimeField") -> bool:
        return (self.domain is other.domain or (
            self.domain.shape == other.domain.shape and self.domain.h == other.domain.h
            and np.array_equal(self.domain.defined, other.domain.defined))) and \
            len(self.times) == len(other.times) and np.allclose(self.times, other.times, rtol=0, atol=1e-12)


def field_from_function(domain: GridDomain, times, func) -> SpaceTimeField:
    """Sample ``func(t, coords)`` on every defined node of every time slice."""
    times = np.asarray(times, dtype=float)
    vals = np.full((len(times), domain.size), np.nan)
    d = domain.defined
    pts = domain.coords[d]
    for m, t in enumerate(times):
        vals[m, d] = func(t, pts)
    return SpaceTimeField(domain, times, vals)


def time_slice(u: SpaceTimeField, t0: float) -> np.ndarray:
    """Copy of the spatial values at grid time t0 (no interpolation)."""
    return u.values[u.time_index(t0)].copy()


def fd_complex_hessian(values, domain: GridDomain, node=None):
    """Centred-difference complex Hessian of a spatial field.

    With ``node`` (flat index or coordinate tuple) returns one n x n matrix;
    otherwise an (m, n, n) stack over all interior nodes.
    """
    values = np.asarray(values, dtype=float)
    st = domain.stencil
    if node is None:
        return st.hessian(values)
    if not np.isscalar(node):
        node = domain.index_of(node)
    pos = np.searchsorted(domain.interior_idx, node)
    if pos >= len(domain.interior_idx) or domain.interior_idx[pos] != node:
        raise StencilError(f"node {node} is not interior")
    sub = Stencil(np.array([node]), [(p[pos:pos + 1], m[pos:pos + 1]) for p, m in st.axis],
                  {k: tuple(i[pos:pos + 1] for i in v) for k, v in st.cross.items()}, st.n, st.h)
    H = sub.hessian(values)[0]
    if not np.all(np.isfinite(H)):
        raise StencilError(f"stencil at node {node} touches undefined values")
    return H


def g_mollify(g, eps_g: float):
    """Pointwise max(g, eps_g)."""
    if eps_g <= 0:
        raise ValueError("eps_g must be positive")
    return np.maximum(np.asarray(g, dtype=float), eps_g)


# ---------------------------------------------------------------------------
# convolutions
# ---------------------------------------------------------------------------

def _time_window(u: SpaceTimeField, k: float, A: float):
    if k <= 0 or A <= 0:
        raise ValueError("k and A must be positive")
    T = u.times[-1] - u.times[0]
    if not k > 2 * A / T:
        raise ValueError(f"k={k} too small: window A/k={A / k} must be shorter than T/2={T / 2}")
    osc = u.osc()
    if not A > osc:
        raise ValueError(f"A={A} must exceed the oscillation {osc}")
    dt = u.dt
    J = int(math.floor(A / (k * dt) + 1e-9))
    rel = u.times - u.times[0]
    keep = np.flatnonzero((rel > A / k + 1e-12 * T) & (rel < T - A / k - 1e-12 * T))
    return J, dt, keep


def sup_convolution_time(u: SpaceTimeField, k: float, A: float) -> SpaceTimeField:
    """u^k(t, z) = max over |s| <= A/k of u(t + s, z) - k|s|, on grid shifts s.

    Only time nodes in the open window (A/k, T - A/k) are returned.
    """
    J, dt, keep = _time_window(u, k, A)
    out = u.values[keep].copy()
    for j in range(1, J + 1):
        pen = k * j * dt
        out = np.fmax(out, u.values[keep + j] - pen)
        out = np.fmax(out, u.values[keep - j] - pen)
    return SpaceTimeField(u.domain, u.times[keep], out)


def inf_convolution_time(u: SpaceTimeField, k: float, A: float) -> SpaceTimeField:
    """u_k(t, z) = min over |s| <= A/k of u(t + s, z) + k|s|."""
    J, dt, keep = _time_window(u, k, A)
    out = u.values[keep].copy()
    for j in range(1, J + 1):
        pen = k * j * dt
        out = np.fmin(out, u.values[keep + j] + pen)
        out = np.fmin(out, u.values[keep - j] + pen)
    return SpaceTimeField(u.domain, u.times[keep], out)


def sup_convolution_spacetime(w: SpaceTimeField, eps: float, A: float) -> SpaceTimeField:
    """Space-time sup-convolution w(s, xi) - (A/eps^2)(|t-s|^2 + |z-xi|^2).

    Maximises over grid samples within distance eps of (t, z); farther
    samples are penalised by more than A > osc(w) and cannot win. Output is
    kept on time nodes in (eps, T - eps) and interior nodes farther than eps
    from the boundary; other nodes are NaN.
    """
    osc = w.osc()
    if not A > osc:
        raise ValueError(f"A={A} must exceed the oscillation {osc}")
    dom = w.domain
    dt, h = w.dt, dom.h
    if eps < min(dt, h):
        warnings.warn("eps below grid spacing: sup-convolution reduces to the identity", stacklevel=2)
    c = A / eps**2
    jt = int(math.floor(eps / dt + 1e-9))
    jz = int(math.floor(eps / h + 1e-9))
    dims = 2 * dom.n
    shape = dom.shape
    vals = w.values.reshape((len(w.times),) + shape)
    T = w.times[-1] - w.times[0]
    rel = w.times - w.times[0]
    tkeep = np.flatnonzero((rel > eps) & (rel < T - eps))
    dist = dom.distance_to_boundary()
    zkeep = dom.interior & (dist > eps)
    out = np.full((len(w.times), dom.size), np.nan)
    if len(tkeep) == 0 or not np.any(zkeep):
        return SpaceTimeField(dom, w.times, out)
    best = np.full((len(tkeep),) + shape, -np.inf)
    pad = jz
    padded = np.pad(vals, [(0, 0)] + [(pad, pad)] * dims, constant_values=np.nan)
    for dz in itertools.product(range(-jz, jz + 1), repeat=dims):
        d2z = h * h * sum(x * x for x in dz)
        if d2z > eps * eps * (1 + 1e-12):
            continue
        sl = tuple(slice(pad + x, pad + x + shape[0]) for x in dz)
        for ds in range(-jt, jt + 1):
            d2 = d2z + (ds * dt) ** 2
            if d2 > eps * eps * (1 + 1e-12):
                continue
            cand = padded[(tkeep + ds,) + sl] - c * d2
            best = np.fmax(best, cand)
    best = best.reshape(len(tkeep), dom.size)
    out[np.ix_(tkeep, np.flatnonzero(zkeep))] = best[:, zkeep]
    return SpaceTimeField(dom, w.times, out)


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------

def field_csv_header(n: int) -> list[str]:
    return ["t"] + [f"x{j + 1}" for j in range(n)] + [f"y{j + 1}" for j in range(n)] + ["value"]


def write_field_csv(u: SpaceTimeField, path) -> None:
    dom = u.domain
    idx = np.flatnonzero(dom.defined)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(field_csv_header(dom.n))
        for m, t in enumerate(u.times):
            for i in idx:
                w.writerow([f"{t:.17g}"] + [f"{c:.17g}" for c in dom.coords[i]] + [f"{u.values[m, i]:.17g}"])


def read_field_csv(path, domain: GridDomain) -> SpaceTimeField:
    """Read a field CSV onto ``domain``; raises :class:`GridMismatchError`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != field_csv_header(domain.n):
        raise GridMismatchError(f"CSV header does not match a dimension-{domain.n} grid")
    data = np.array(rows[1:], dtype=float)
    if data.size == 0:
        raise GridMismatchError("CSV contains no rows")
    times = np.unique(data[:, 0])
    vals = np.full((len(times), domain.size), np.nan)
    tpos = np.searchsorted(times, data[:, 0])
    idx = np.rint((data[:, 1:-1] + domain.half_width) / domain.h).astype(int)
    if np.any(idx < 0) or np.any(idx >= domain.points_per_axis) or \
            np.any(np.abs(idx * domain.h - domain.half_width - data[:, 1:-1]) > 1e-9 * (1 + domain.half_width)):
        raise GridMismatchError("CSV coordinates are not nodes of the configured grid")
    flat = np.ravel_multi_index(tuple(idx.T), domain.shape)
    vals[tpos, flat] = data[:, -1]
    if not np.all(domain.defined[flat]) or np.any(np.isnan(vals[:, domain.defined])):
        raise GridMismatchError("CSV node set differs from the configured grid's defined nodes")
    return SpaceTimeField(domain, times, vals)


# ---------------------------------------------------------------------------
# problems
# ---------------------------------------------------------------------------

@dataclass
class ProblemSpec:
    """The Cauchy-Dirichlet data (domain, time grid, f, G, g, phi, u0).

    Callables are vectorised: ``G(t, z, r)``, ``g(z)``, ``phi(t, z)``,
    ``u0(z)`` with ``z`` an (m, 2n) coordinate array. ``phi`` must be
    defined on a neighbourhood of the boundary cylinder; boundary nodes take
    ``phi`` at the node itself (``boundary_mode="node"``) or at its
    projection onto {rho = 0} (``"projected"``). ``exact`` is an optional
    known solution used by convergence studies.
    """

    domain: GridDomain
    time: TimeGrid
    op: SymOpSpec
    G: Callable
    g: Callable
    phi: Callable
    u0: Callable
    boundary_mode: str = "node"
    exact: Callable | None = None
    name: str = "problem"
    tol_compat: float = 1e-9

    def __post_init__(self):
        if self.op.n != self.domain.n:
            raise ConfigurationError(f"operator dimension {self.op.n} != domain dimension {self.domain.n}")
        if self.boundary_mode not in ("node", "projected"):
            raise ConfigurationError(f"unknown boundary_mode {self.boundary_mode!r}")
        dom = self.domain
        self.g_nodes = dom.evaluate(self.g)
        self.u0_nodes = dom.evaluate(self.u0)

    @property
    def cone(self) -> ConeSpec:
        return self.op.cone

    @property
    def times(self) -> np.ndarray:
        return self.time.times

    def boundary_points(self) -> np.ndarray:
        dom = self.domain
        return dom.projected if self.boundary_mode == "projected" else dom.coords[dom.boundary]

    def boundary_values(self, t: float) -> np.ndarray:
        """phi(t, .) at the boundary sampling points, ordered like ``boundary_idx``."""
        pts = self.boundary_points()
        return np.broadcast_to(np.asarray(self.phi(t, pts), dtype=float), (len(pts),)).copy()

    def phi_nodes(self, t: float) -> np.ndarray:
        """phi(t, .) on every defined node (used by barrier constructions)."""
        return self.domain.evaluate(self.phi, t)

    def G_at(self, t, idx, r) -> np.ndarray:
        z = self.domain.coords[idx]
        return np.broadcast_to(np.asarray(self.G(t, z, r), dtype=float), np.shape(r))

    def initial_slice(self) -> np.ndarray:
        """u0 in the interior, phi(0, .) on boundary nodes."""
        out = self.u0_nodes.copy()
        out[self.domain.boundary_idx] = self.boundary_values(0.0)
        return out

    def empty_field(self) -> SpaceTimeField:
        vals = np.full((len(self.times), self.domain.size), np.nan)
        return SpaceTimeField(self.domain, self.times, vals)

    def apply_data(self, u: SpaceTimeField) -> None:
        """Overwrite boundary nodes with phi and the first slice with the initial data."""
        b = self.domain.boundary_idx
        for m, t in enumerate(u.times):
            u.values[m, b] = self.boundary_values(t)
        u.values[0] = self.initial_slice()

    def validate(self, seed: int = 0, samples: int = 256, slack: float | None = None) -> None:
        """Raise :class:`ConfigurationError` on the first violated structural requirement."""
        dom = self.domain
        self.domain.certify(self.cone)
        g = self.g_nodes[dom.defined]
        if not np.all(np.isfinite(g)) or np.any(g < 0):
            raise ConfigurationError("g must be finite and non-negative")
        rng = np.random.default_rng(seed)
        idx = rng.choice(np.flatnonzero(dom.defined), size=samples)
        t = rng.uniform(0, self.time.T, size=samples)
        r1 = rng.uniform(-10, 10, size=samples)
        r2 = r1 + rng.uniform(1e-3, 10, size=samples)
        z = dom.coords[idx]
        g1 = np.asarray(self.G(t, z, r1), dtype=float)
        g2 = np.asarray(self.G(t, z, r2), dtype=float)
        if np.any(g2 < g1 - 1e-12 * (1 + np.abs(g1))):
            i = int(np.argmin(g2 - g1))
            raise ConfigurationError(f"G is not non-decreasing in r at z={z[i].tolist()}, t={t[i]}")
        u0b = self.u0(self.boundary_points())
        gap = np.abs(np.asarray(u0b) - self.boundary_values(0.0))
        if np.any(gap > self.tol_compat):
            raise ConfigurationError(f"compatibility u0 = phi(0, .) fails on the boundary (gap {gap.max():.3g})")
        u0 = self.initial_slice()
        lam = eigenvalues_hermitian(fd_complex_hessian(u0, dom), validate=False)
        if slack is None:
            slack = 1e-6 * (1 + np.max(np.abs(u0[dom.defined])))
        if not np.all(in_cone(lam, self.cone, slack=np.full(len(lam), slack))):
            raise ConfigurationError("u0 is not discretely Gamma-subharmonic")
