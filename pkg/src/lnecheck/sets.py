"""Finite descriptions of subsets of R^q and their point samples.

Three descriptor flavours are supported: networks of parametrized arcs
glued at junction points, zero sets of smooth maps inside a box, and plain
point clouds.  Arc networks are sampled with a spacing proportional to the
distance from a center (bounded below by a floor) and refined where the arc
turns, so one budget covers many dyadic scales at once.  Consecutive samples
along an arc are recorded as links; the inner metric is estimated on them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from . import expr
from .errors import DescriptorError, EmptySample, EvalError, InsufficientTail, ScaleError
from .geometry import EUCLIDEAN, AmbientMetric

TOL_MEMBER = 1e-7
JUNCTION_TOL = 1e-8
DELTA_BIN = math.radians(2.0)
N_MIN_TAIL = 32

ARCS = "arcs"
IMPLICIT = "implicit"
CLOUD = "cloud"

INFINITY = "infinity"


# --------------------------------------------------------------------------
# descriptors


@dataclass(frozen=True, eq=False)
class ParamArc:
    """A C^1 map ``gamma: [a, b] -> R^q`` (``b`` may be ``inf``).

    ``func`` and ``deriv`` take a 1-d parameter array and return arrays of
    shape ``(n, q)``.  Unbounded arcs must have ``|gamma(t)|`` increasing to
    infinity for ``t >= t_mono``.
    """

    label: str
    func: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    a: float
    b: float = math.inf
    t_mono: float | None = None
    orientation: int = 1
    sources: tuple[str, ...] | None = None

    def __post_init__(self):
        if not math.isfinite(self.a):
            raise DescriptorError(f"arc {self.label!r}: the start parameter must be finite")
        if not self.b > self.a:
            raise DescriptorError(f"arc {self.label!r}: empty parameter interval")

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.b)

    @property
    def mono(self) -> float:
        return self.a if self.t_mono is None else max(self.a, self.t_mono)

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        try:
            out = np.asarray(self.func(t), dtype=float)
        except Exception as exc:  # user code
            raise EvalError(f"arc {self.label!r} failed to evaluate: {exc}") from exc
        if out.ndim == 1:
            out = out[:, None]
        return out

    def velocity(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        try:
            out = np.asarray(self.deriv(t), dtype=float)
        except Exception as exc:
            raise EvalError(f"arc {self.label!r} derivative failed: {exc}") from exc
        if out.ndim == 1:
            out = out[:, None]
        return out

    def speed(self, t) -> np.ndarray:
        return np.linalg.norm(self.velocity(t), axis=-1)

    @classmethod
    def from_expressions(cls, label: str, coords: Sequence[str], domain=(0.0, math.inf),
                         derivatives: Sequence[str | None] | None = None,
                         t_mono: float | None = None) -> "ParamArc":
        derivatives = list(derivatives) if derivatives else [None] * len(coords)
        if len(derivatives) != len(coords):
            raise DescriptorError(f"arc {label!r}: one derivative per coordinate expected")
        comps = [expr.compile_component(c, d) for c, d in zip(coords, derivatives)]

        def func(t):
            return np.stack([f(t) for f, _ in comps], axis=-1)

        def deriv(t):
            return np.stack([df(t) for _, df in comps], axis=-1)

        return cls(label, func, deriv, float(domain[0]), float(domain[1]), t_mono,
                   sources=tuple(coords))


@dataclass(frozen=True, eq=False)
class ImplicitSet:
    """Zero set of ``F: R^q -> R^m`` inside the box ``[-bound, bound]^q``."""

    func: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray]
    dim: int
    bound: float
    terms: tuple | None = None

    def __post_init__(self):
        if not self.bound > 0:
            raise DescriptorError("implicit box bound must be positive")

    def residual(self, x) -> np.ndarray:
        f = np.asarray(self.func(np.atleast_2d(x)), dtype=float)
        return f if f.ndim == 2 else f[:, None]

    def jacobian(self, x) -> np.ndarray:
        j = np.asarray(self.jac(np.atleast_2d(x)), dtype=float)
        return j if j.ndim == 3 else j[:, None, :]

    @classmethod
    def polynomial(cls, terms: Sequence[Sequence[tuple[float, Sequence[int]]]], dim: int,
                   bound: float) -> "ImplicitSet":
        """Polynomial map given as, per output component, a list of
        ``(coefficient, exponents)`` monomials."""
        comps = []
        for comp in terms:
            coefs = np.array([c for c, _ in comp], dtype=float)
            exps = np.array([list(e) for _, e in comp], dtype=int).reshape(len(comp), dim)
            comps.append((coefs, exps))

        def func(x):
            x = np.atleast_2d(x)
            out = []
            for coefs, exps in comps:
                mono = np.prod(x[:, None, :] ** exps[None, :, :], axis=-1)
                out.append(mono @ coefs)
            return np.stack(out, axis=-1)

        def jac(x):
            x = np.atleast_2d(x)
            rows = []
            for coefs, exps in comps:
                grads = []
                for k in range(dim):
                    e = exps.copy()
                    fac = e[:, k].astype(float)
                    e[:, k] = np.maximum(e[:, k] - 1, 0)
                    mono = np.prod(x[:, None, :] ** e[None, :, :], axis=-1)
                    grads.append(mono @ (coefs * fac))
                rows.append(np.stack(grads, axis=-1))
            return np.stack(rows, axis=1)

        return cls(func, jac, dim, float(bound), terms=tuple(tuple(c) for c in terms))


@dataclass(frozen=True, eq=False)
class SetDescriptor:
    kind: str
    dim: int
    name: str = "set"
    arcs: tuple[ParamArc, ...] = ()
    junctions: tuple[tuple[str, np.ndarray], ...] = ()
    implicit: ImplicitSet | None = None
    cloud: np.ndarray | None = None
    metric: AmbientMetric | None = None

    @property
    def bounded(self) -> bool:
        if self.kind == ARCS:
            return all(arc.bounded for arc in self.arcs)
        return True

    def arc(self, label: str) -> ParamArc:
        for arc in self.arcs:
            if arc.label == label:
                return arc
        raise KeyError(label)

    def junction_points(self) -> list[np.ndarray]:
        return [p for _, p in self.junctions]


def arc_network(arcs: Sequence[ParamArc], junctions=(), name: str = "arcs") -> SetDescriptor:
    """Build and validate an arc network.

    ``junctions`` is a sequence of points or of ``(name, point)`` pairs; each
    must coincide with an endpoint of at least one arc.
    """
    arcs = tuple(arcs)
    if not arcs:
        raise DescriptorError("an arc network needs at least one arc")
    labels = [a.label for a in arcs]
    if len(set(labels)) != len(labels):
        raise DescriptorError("arc labels must be unique")
    dims = {arc(np.array([arc.a])).shape[-1] for arc in arcs}
    if len(dims) != 1:
        raise DescriptorError("all arcs must live in the same dimension")
    dim = dims.pop()
    named = []
    for k, j in enumerate(junctions):
        if isinstance(j, tuple) and len(j) == 2 and isinstance(j[0], str):
            jname, p = j
        else:
            jname, p = f"j{k}", j
        p = np.asarray(p, dtype=float)
        if p.shape != (dim,):
            raise DescriptorError(f"junction {jname!r} has the wrong dimension")
        if not any(_endpoint_params(arc, p) for arc in arcs):
            raise DescriptorError(f"junction {jname!r} does not lie on an arc endpoint")
        named.append((jname, p))
    return SetDescriptor(ARCS, dim, name, arcs=arcs, junctions=tuple(named))


def implicit_set(imp: ImplicitSet, name: str = "implicit") -> SetDescriptor:
    return SetDescriptor(IMPLICIT, imp.dim, name, implicit=imp)


def point_cloud(points, name: str = "cloud", metric: AmbientMetric | None = None) -> SetDescriptor:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if not np.all(np.isfinite(pts)):
        raise DescriptorError("point cloud contains non-finite coordinates")
    metric = metric or AmbientMetric.euclidean(pts.shape[1])
    return SetDescriptor(CLOUD, metric.dim, name, cloud=pts, metric=metric)


def _endpoint_params(arc: ParamArc, p: np.ndarray) -> list[float]:
    ends = [arc.a] + ([arc.b] if arc.bounded else [])
    return [t for t in ends if np.linalg.norm(arc(np.array([t]))[0] - p) <= JUNCTION_TOL]


# --------------------------------------------------------------------------
# samples


@dataclass(frozen=True, eq=False)
class Sample:
    """Finite point set with per-point provenance.

    ``tags`` are radial tags: ``|x|`` for Euclidean samples, and the radius of
    the affine preimage for samples pushed to the sphere or projective plane.
    ``links`` (optional) are index pairs of points known to be joined by a
    short piece of the set.  ``center`` and ``floor`` record where the sample
    was densified and its finest radial scale.
    """

    points: np.ndarray
    metric: AmbientMetric
    labels: np.ndarray
    params: np.ndarray
    tags: np.ndarray
    links: np.ndarray | None = None
    center: np.ndarray | None = None
    floor: float = 0.0
    relative: bool = False

    def __len__(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, idx) -> "Sample":
        idx = np.asarray(idx)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        links = None
        if self.links is not None:
            remap = np.full(len(self), -1, dtype=np.int64)
            remap[idx] = np.arange(len(idx))
            keep = (remap[self.links[:, 0]] >= 0) & (remap[self.links[:, 1]] >= 0)
            links = remap[self.links[keep]]
        return replace(self, points=self.points[idx], labels=self.labels[idx],
                       params=self.params[idx], tags=self.tags[idx], links=links)

    def scaled(self, lam: float) -> "Sample":
        if self.metric.kind != EUCLIDEAN:
            raise ValueError("only Euclidean samples can be rescaled")
        center = None if self.center is None else self.center * lam
        return replace(self, points=self.points * lam, tags=self.tags * abs(lam),
                       center=center, floor=self.floor * abs(lam))

    def provenance(self, i: int) -> dict:
        p = self.params[i]
        return {"index": int(i), "label": str(self.labels[i]),
                "param": None if not np.isfinite(p) else float(p)}

    def center_distances(self, x0=None) -> np.ndarray:
        c = np.zeros(self.dim) if x0 is None else np.asarray(x0, dtype=float)
        return np.linalg.norm(self.points - c, axis=1)


def euclidean_sample(points, labels=None, params=None, links=None, center=None,
                     floor=0.0, relative=False) -> Sample:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(pts)
    labels = np.array(["cloud"] * n, dtype=object) if labels is None else np.asarray(labels, dtype=object)
    params = np.arange(n, dtype=float) if params is None else np.asarray(params, dtype=float)
    return Sample(pts, AmbientMetric.euclidean(pts.shape[1]), labels, params,
                  np.linalg.norm(pts, axis=1), links, center, floor, relative)


# ----- arc sampling


def _unbounded_end(arc: ParamArc, center: np.ndarray, r_clip: float) -> float:
    """Smallest parameter past ``t_mono`` where the arc leaves ``B(center, r_clip)``."""
    t0 = arc.mono

    def excess(t):
        return float(np.linalg.norm(arc(np.array([t]))[0] - center) - r_clip)

    if excess(t0) >= 0:
        return t0
    step = max(1.0, abs(t0) * 0.5)
    lo, hi = t0, t0 + step
    for _ in range(200):
        if excess(hi) >= 0:
            return brentq(excess, lo, hi, xtol=1e-12 * max(1.0, abs(hi)), maxiter=200)
        lo, hi, step = hi, hi + 2 * step, 2 * step
    raise EvalError(f"arc {arc.label!r} does not leave the ball of radius {r_clip}")


def _measure_increments(arc: ParamArc, t: np.ndarray, center: np.ndarray, floor: float,
                        turn_weight: float) -> np.ndarray:
    P = arc(t)
    V = arc.velocity(t)
    chord = np.linalg.norm(np.diff(P, axis=0), axis=1)
    mid = 0.5 * (P[1:] + P[:-1])
    rho = np.linalg.norm(mid - center, axis=1)
    rho_c = np.maximum(rho, floor)
    vn = np.linalg.norm(V, axis=1)
    ok = np.isfinite(vn) & (vn > 0)
    U = np.zeros_like(V)
    U[ok] = V[ok] / vn[ok, None]
    cosang = np.clip(np.sum(U[1:] * U[:-1], axis=1), -1.0, 1.0)
    turn = np.arccos(cosang)
    turn[~(ok[1:] & ok[:-1])] = 0.0
    w = np.minimum(1.0, rho / floor) if floor > 0 else np.ones_like(rho)
    with np.errstate(invalid="ignore", divide="ignore"):
        inc = chord / rho_c + turn_weight * turn * w
    bad = ~np.isfinite(inc)
    if np.any(bad):
        raise EvalError(f"arc {arc.label!r} produced non-finite values")
    return inc


def _pilot(arc: ParamArc, a: float, b: float, center, floor, target, turn_weight,
           n0: int = 4097, max_nodes: int = 4_000_000):
    t = np.linspace(a, b, n0)
    for _ in range(40):
        inc = _measure_increments(arc, t, center, floor, turn_weight)
        split = inc > target
        if not np.any(split) or len(t) + split.sum() > max_nodes:
            break
        mids = 0.5 * (t[:-1][split] + t[1:][split])
        t = np.sort(np.concatenate([t, mids]))
    inc = _measure_increments(arc, t, center, floor, turn_weight)
    return t, np.concatenate([[0.0], np.cumsum(inc)])


def _allocate(weights: np.ndarray, total: int, minimum: int = 2) -> np.ndarray:
    k = len(weights)
    if total < minimum * k:
        raise ScaleError(f"budget {total} too small for {k} arcs")
    w = np.asarray(weights, dtype=float)
    w = w / w.sum() if w.sum() > 0 else np.full(k, 1.0 / k)
    spare = total - minimum * k
    raw = w * spare
    base = np.floor(raw).astype(int)
    rem = spare - base.sum()
    order = np.argsort(-(raw - base), kind="stable")
    base[order[:rem]] += 1
    return base + minimum


def sample_arcs(d: SetDescriptor, budget: int, radial_range=(1e-3, 1e3), center=None,
                turn_weight: float = 1.0) -> Sample:
    floor, r_clip = float(radial_range[0]), float(radial_range[1])
    c = np.zeros(d.dim) if center is None else np.asarray(center, dtype=float)
    spans = []
    for arc in d.arcs:
        a = arc.a
        b = arc.b if arc.bounded else _unbounded_end(arc, c, r_clip)
        if b > a:
            spans.append((arc, a, b))
    if not spans:
        raise EmptySample(f"{d.name}: no arc meets the ball of radius {r_clip}")

    # first pass: coarse measure of every arc
    coarse = [_pilot(arc, a, b, c, floor, 0.05, turn_weight)[1][-1] for arc, a, b in spans]
    n_j = len(d.junctions)
    matched = []
    for arc, a, b in spans:
        ends = {"a": None, "b": None}
        for ji, (_, p) in enumerate(d.junctions):
            for t in _endpoint_params(arc, p):
                if t == a:
                    ends["a"] = ji
                elif arc.bounded and t == b:
                    ends["b"] = ji
        matched.append(ends)
    n_collapse = sum((e["a"] is not None) + (e["b"] is not None) for e in matched)
    arc_total = budget - n_j + n_collapse
    counts = _allocate(np.array(coarse), arc_total)
    spacing = sum(coarse) / max(arc_total - len(spans), 1)

    pts, labels, params, links = [], [], [], []
    junction_index = {}
    offset = 0
    for ji, (jname, p) in enumerate(d.junctions):
        pts.append(p[None, :])
        labels.append(f"junction:{jname}")
        params.append(np.nan)
        junction_index[ji] = offset
        offset += 1
    for (arc, a, b), n, ends in zip(spans, counts, matched):
        t_pilot, mu = _pilot(arc, a, b, c, floor, min(0.5 * spacing, 0.05), turn_weight)
        targets = np.linspace(0.0, mu[-1], n)
        ts = np.interp(targets, mu, t_pilot)
        ts[0], ts[-1] = a, b
        P = arc(ts)
        idx = np.arange(n) + offset
        if ends["a"] is not None:
            idx[0] = junction_index[ends["a"]]
        if ends["b"] is not None:
            idx[-1] = junction_index[ends["b"]]
        keep = np.ones(n, dtype=bool)
        keep[0] = ends["a"] is None
        keep[-1] = ends["b"] is None
        # renumber the kept points contiguously
        new_idx = idx.copy()
        new_idx[keep] = offset + np.arange(keep.sum())
        pts.append(P[keep])
        labels.extend([arc.label] * int(keep.sum()))
        params.extend(ts[keep].tolist())
        links.append(np.stack([new_idx[:-1], new_idx[1:]], axis=1))
        offset += int(keep.sum())
    points = np.concatenate(pts, axis=0)
    link_arr = np.concatenate(links, axis=0).astype(np.int64)
    link_arr = link_arr[link_arr[:, 0] != link_arr[:, 1]]
    return euclidean_sample(points, np.array(labels, dtype=object), np.array(params),
                            link_arr, c, floor, relative=True)


# ----- implicit sampling


def _newton_project(imp: ImplicitSet, x: np.ndarray, steps: int = 12):
    for _ in range(steps):
        F = imp.residual(x)
        J = imp.jacobian(x)
        step = np.einsum("nij,nj->ni", np.linalg.pinv(J), F)
        x = x - step
        if np.max(np.abs(step)) < 1e-15 * max(1.0, np.max(np.abs(x))):
            break
    return x


def farthest_point_order(points: np.ndarray, k: int, start: int | None = None,
                         dist: Callable | None = None) -> np.ndarray:
    """Indices of ``k`` farthest-point-sampled points (deterministic).

    The first point is ``start`` or, by default, the lexicographically
    smallest point.
    """
    n = len(points)
    k = min(k, n)
    if k <= 0:
        return np.zeros(0, dtype=np.int64)
    if start is None:
        start = int(np.lexsort(points.T[::-1])[0])
    dist = dist or (lambda P, p: np.linalg.norm(P - p, axis=1))
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = start
    d = dist(points, points[start])
    for i in range(1, k):
        j = int(np.argmax(d))
        chosen[i] = j
        d = np.minimum(d, dist(points, points[j]))
    return chosen


def _thin(points: np.ndarray, radius: float) -> np.ndarray:
    """Greedy subset with pairwise gaps above ``radius``, in lexicographic order."""
    order = np.lexsort(points.T[::-1])
    tree = cKDTree(points)
    taken = np.zeros(len(points), dtype=bool)
    blocked = np.zeros(len(points), dtype=bool)
    for i in order:
        if blocked[i]:
            continue
        taken[i] = True
        blocked[tree.query_ball_point(points[i], radius)] = True
    return np.flatnonzero(taken)


def sample_implicit(d: SetDescriptor, budget: int, radial_range=(0.0, math.inf), seed: int = 0,
                    center=None) -> Sample:
    imp = d.implicit
    q = imp.dim
    rng = np.random.default_rng(seed)
    per_axis = max(16, int(round((400.0 * budget) ** (1.0 / q))))
    per_axis = min(per_axis, int(4e6 ** (1.0 / q)))
    h = 2 * imp.bound / per_axis
    axes = [np.linspace(-imp.bound + h / 2, imp.bound - h / 2, per_axis)] * q
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, q)
    grid = grid + rng.uniform(-h / 2, h / 2, size=grid.shape)
    F = imp.residual(grid)
    J = imp.jacobian(grid)
    gn = np.linalg.norm(J, axis=2).min(axis=1)
    near = np.max(np.abs(F), axis=1) <= h * np.maximum(gn, 1e-300)
    cand = _newton_project(imp, grid[near])
    F = imp.residual(cand)
    gn = np.linalg.norm(imp.jacobian(cand), axis=2).max(axis=1)
    ok = np.all(np.isfinite(cand), axis=1) & (np.max(np.abs(F), axis=1) <= TOL_MEMBER * np.maximum(gn, 1.0))
    ok &= np.all(np.abs(cand) <= imp.bound, axis=1)
    c = np.zeros(q) if center is None else np.asarray(center, dtype=float)
    ok &= np.linalg.norm(cand - c, axis=1) <= radial_range[1]
    cand = cand[ok]
    if len(cand) == 0:
        raise EmptySample(f"{d.name}: no points of the level set in the box")
    cand = cand[_thin(cand, 0.25 * h)]
    # FPS spaces points evenly only when it discards a fair share of the candidates
    k = min(budget, max(2, len(cand) // 2))
    keep = np.sort(farthest_point_order(cand, k))
    return euclidean_sample(cand[keep], np.array(["implicit"] * len(keep), dtype=object),
                            np.full(len(keep), np.nan), None, c, float(radial_range[0]))


def sample_descriptor(d: SetDescriptor, budget: int, radial_range=(1e-3, 1e3), center=None,
                      seed: int = 0) -> Sample:
    """Draw a :class:`Sample` of about ``budget`` points from ``d``.

    ``radial_range = (floor, clip)``: unbounded arcs are cut where they leave
    the ball of radius ``clip`` around ``center``; spacing is proportional
    to the distance from ``center`` but never finer than a fixed fraction
    of ``floor``.
    """
    if budget < 2:
        raise ValueError("budget must be at least 2")
    if not radial_range[0] < radial_range[1]:
        raise ValueError("radial range must satisfy r_min < r_max")
    if d.kind == ARCS:
        return sample_arcs(d, budget, radial_range, center)
    if d.kind == IMPLICIT:
        return sample_implicit(d, budget, radial_range, seed, center)
    pts = d.cloud
    c = np.zeros(pts.shape[1]) if center is None else np.asarray(center, dtype=float)
    metric = d.metric or AmbientMetric.euclidean(pts.shape[1])
    if metric.kind == EUCLIDEAN:
        keep = np.linalg.norm(pts - c, axis=1) <= radial_range[1]
        if not np.any(keep):
            raise EmptySample(f"{d.name}: no cloud point in range")
        idx = np.flatnonzero(keep)
        return euclidean_sample(pts[idx], params=idx.astype(float), center=c,
                                floor=float(radial_range[0]))
    n = len(pts)
    return Sample(pts, metric, np.array(["cloud"] * n, dtype=object), np.arange(n, dtype=float),
                  np.full(n, np.nan))


# --------------------------------------------------------------------------
# slicing and splitting

LE, EQ, GE = "le", "eq", "ge"


def slice_sample(s: Sample, mode: str, t: float, w: float | None = None) -> Sample:
    """Keep the points with radial tag ``<= t``, ``>= t`` or within ``w`` of ``t``."""
    if not t > 0:
        raise ValueError("slice radius must be positive")
    r = s.tags
    if mode == LE:
        mask = r <= t
    elif mode == GE:
        mask = r >= t
    elif mode == EQ:
        if w is None or not w > 0:
            raise ValueError("an EQ slice needs a positive band width")
        mask = np.abs(r - t) <= w
    else:
        raise ValueError(f"unknown slice mode {mode!r}")
    if not np.any(mask):
        raise EmptySample(f"nothing survives the {mode.upper()} {t:g} slice")
    return s.subset(mask)


@dataclass
class ComponentSplit:
    radius: float
    parts: list[Sample]
    indices: list[np.ndarray]
    eps: float | None = None
    adjacency: str = "links"


def _eps_pairs(points: np.ndarray, eps: float, scale: np.ndarray | None) -> np.ndarray:
    tree = cKDTree(points)
    if scale is None:
        pairs = tree.query_pairs(eps, output_type="ndarray")
        return pairs
    r = eps * scale
    nbrs = tree.query_ball_point(points, r)
    rows = []
    for i, js in enumerate(nbrs):
        js = np.asarray(js, dtype=np.int64)
        js = js[js > i]
        if len(js):
            dd = np.linalg.norm(points[js] - points[i], axis=1)
            js = js[dd <= eps * np.minimum(scale[i], scale[js])]
            rows.append(np.stack([np.full(len(js), i), js], axis=1))
    return np.concatenate(rows) if rows else np.zeros((0, 2), dtype=np.int64)


def median_spacing(points: np.ndarray, scale: np.ndarray | None = None) -> float:
    if len(points) < 2:
        raise ScaleError("need at least two points to measure spacing")
    tree = cKDTree(points)
    dd, _ = tree.query(points, k=2)
    nn = dd[:, 1]
    if scale is not None:
        nn = nn / scale
    return float(np.median(nn))


def components_of(n: int, pairs: np.ndarray) -> tuple[int, np.ndarray]:
    if len(pairs) == 0:
        return n, np.arange(n)
    m = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    return connected_components(m, directed=False)


def split_components_at_radius(s: Sample, R: float, eps: float | None = None) -> ComponentSplit:
    """Connected components of the part of ``s`` with radial tag ``>= R``.

    Linked samples use their links; otherwise (or when ``eps`` is given) the
    ``eps``-neighborhood graph, with ``eps`` defaulting to three times the
    median nearest-neighbor spacing (relative to the radial tag for
    log-spaced samples).
    """
    idx = np.flatnonzero(s.tags >= R)
    if len(idx) == 0:
        raise EmptySample(f"nothing at radius >= {R:g}")
    sub = s.subset(idx)
    adjacency = "links"
    if sub.links is not None and eps is None:
        pairs = sub.links
    else:
        adjacency = "eps"
        scale = np.maximum(sub.tags, max(sub.floor, 1e-300)) if sub.relative else None
        if eps is None:
            eps = 3.0 * median_spacing(sub.points, scale)
        if not eps > 0:
            raise ValueError("eps must be positive")
        pairs = _eps_pairs(sub.points, eps, scale)
        if len(pairs) == 0 and len(sub) > 1:
            raise ScaleError(f"eps={eps:g} isolates every point of the slice")
    ncomp, lab = components_of(len(sub), pairs)
    groups = [np.flatnonzero(lab == k) for k in range(ncomp)]

    def key(g):
        pts = sub.points[g]
        lex = pts[np.lexsort(pts.T[::-1])[0]]
        return (float(sub.tags[g].min()), tuple(lex))

    groups.sort(key=key)
    return ComponentSplit(R, [sub.subset(g) for g in groups], [idx[g] for g in groups], eps, adjacency)


# --------------------------------------------------------------------------
# asymptotic sets and tangent cones


@dataclass
class AsymptoticSet:
    directions: np.ndarray
    resolution: float
    anchor: object
    counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    spread: float = 0.0

    def __len__(self) -> int:
        return len(self.directions)

    def converges(self) -> bool:
        """True when the extreme band points toward a single direction."""
        return len(self.directions) == 1 and self.spread <= self.resolution


def _angle(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return 2.0 * np.arcsin(np.clip(np.linalg.norm(u - v, axis=-1) / 2.0, 0.0, 1.0))


def cluster_directions(dirs: np.ndarray, delta: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Greedy clustering of unit vectors; cluster means end up >= delta apart."""
    reps: list[np.ndarray] = []
    members: list[list[int]] = []
    for i, u in enumerate(dirs):
        if reps:
            ang = _angle(np.array(reps), u)
            k = int(np.argmin(ang))
            if ang[k] < delta:
                members[k].append(i)
                continue
        reps.append(u)
        members.append([i])
    groups = [np.array(m) for m in members]
    while True:
        means = [dirs[g].mean(axis=0) for g in groups]
        means = [m / np.linalg.norm(m) for m in means]
        merged = False
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                if _angle(means[i], means[j]) < delta:
                    groups[i] = np.concatenate([groups[i], groups[j]])
                    del groups[j]
                    merged = True
                    break
            if merged:
                break
        if not merged:
            break
    means = np.array(means)
    spread = max(float(np.max(_angle(dirs[g], means[k]))) for k, g in enumerate(groups))
    return means, np.array([len(g) for g in groups]), spread


def asymptotic_set(s: Sample, anchor=INFINITY, delta_bin: float = DELTA_BIN,
                   n_min: int = N_MIN_TAIL, r_lo: float | None = None) -> AsymptoticSet:
    """Directions of the extreme dyadic band at infinity or at a point.

    At infinity the band is ``[R_max / 2, R_max]``; at a point ``x0`` it is
    ``[r, 2 r]`` with ``r`` the smallest resolved distance to ``x0``
    (the sample floor when the sample was densified at ``x0``).
    """
    pts = s.points
    if isinstance(anchor, str):
        if anchor != INFINITY:
            raise ValueError(f"unknown anchor {anchor!r}")
        r = np.linalg.norm(pts, axis=1)
        top = r.max()
        band = r >= top / 2
        vec = pts[band]
    else:
        x0 = np.asarray(anchor, dtype=float)
        r = np.linalg.norm(pts - x0, axis=1)
        pos = r > 1e-12 * max(1.0, float(np.max(r)))
        if not np.any(pos):
            raise InsufficientTail("no sample point away from the anchor")
        lo = float(r[pos].min())
        if r_lo is None and s.center is not None and np.allclose(s.center, x0):
            r_lo = s.floor
        if r_lo:
            lo = max(lo, r_lo)
        band = pos & (r >= lo) & (r <= 2 * lo)
        vec = pts[band] - x0
    if band.sum() < n_min:
        raise InsufficientTail(f"only {int(band.sum())} points in the extreme band (need {n_min})")
    dirs = vec / np.linalg.norm(vec, axis=1, keepdims=True)
    means, counts, spread = cluster_directions(dirs, delta_bin)
    return AsymptoticSet(means, delta_bin, anchor, counts, spread)


def tangent_cone(a: AsymptoticSet, vertex=None) -> SetDescriptor:
    """Union of the rays ``vertex + t u`` over the directions of ``a``."""
    if len(a) == 0:
        raise ValueError("empty asymptotic set")
    q = a.directions.shape[1]
    v = np.zeros(q) if vertex is None else np.asarray(vertex, dtype=float)
    arcs = []
    for k, u in enumerate(a.directions):
        u = u / np.linalg.norm(u)

        def func(t, u=u):
            return v[None, :] + np.asarray(t, dtype=float)[:, None] * u[None, :]

        def deriv(t, u=u):
            return np.broadcast_to(u, (len(np.atleast_1d(t)), q)).copy()

        arcs.append(ParamArc(f"ray{k}", func, deriv, 0.0, math.inf))
    return arc_network(arcs, [("vertex", v)], name="tangent-cone")
