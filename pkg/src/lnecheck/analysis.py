"""Estimating LNE constants and deciding LNE locally and globally.

A ladder is a sequence of dyadic scales marching toward a locus (a point or
infinity).  At each rung the sup of inner over outer distance is taken over
the pairs of sample points lying in a shell around the locus, with inner
distances measured in the whole sample graph.  Definable ratio functions are
eventually monotone, so sustained growth along the ladder signals
divergence and a flat tail signals a bounded constant; anything else is
reported as inconclusive.

Every constant reported here is a lower estimate of the true one: it is a
maximum over finitely many pairs of a graph distance that undershoots the
inner distance.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import sets
from .errors import EmptySample, InsufficientTail, LneError, Unreachable
from .geometry import EUCLIDEAN, ambient_distance
from .inner import GeodesicEngine, ProximityGraph, network_inner_distance, sample_graph
from .sets import INFINITY, Sample, SetDescriptor

LNE = "LNE"
NOT_LNE = "NOT_LNE"
INCONCLUSIVE = "INCONCLUSIVE"

GLOBAL = "GLOBAL"
AT_POINT = "AT_POINT"
AT_INFINITY = "AT_INFINITY"

GROWTH = 1.25
GROWTH_RUNS = 3
STABLE_TOL = 0.10
STABLE_RUNGS = 3
PAIR_BUDGET = 4_000_000
BUDGET = 5000
N_SHELL = 32

R0_INF = 16.0
RUNGS_INF = 4
R0_POINT = 0.5
RUNGS_POINT = 6


def dyadic(r0: float, rungs: int, factor: float = 2.0) -> list[float]:
    """``r0, 2 r0, 4 r0, ...`` (or shrinking for ``factor < 1``)."""
    return [r0 * factor**k for k in range(rungs)]


# --------------------------------------------------------------------------
# reports


@dataclass
class Witness:
    i: int
    j: int
    p: np.ndarray
    q: np.ndarray
    outer: float
    inner: float
    provenance: tuple[dict, dict] = ({}, {})

    @property
    def ratio(self) -> float:
        if not math.isfinite(self.inner):
            return math.inf
        return self.inner / self.outer

    @property
    def infinite(self) -> bool:
        return not math.isfinite(self.inner)

    def to_dict(self) -> dict:
        return {
            "points": [self.p.tolist(), self.q.tolist()],
            "provenance": list(self.provenance),
            "outer": self.outer,
            "inner": self.inner,
            "ratio": self.ratio,
            "infinite": self.infinite,
        }


@dataclass
class LneReport:
    verdict: str
    locus: str
    constant: float | None = None
    ladder: list[tuple[float, float]] = field(default_factory=list)
    witness: Witness | None = None
    reason: str = ""
    stage: str | None = None
    anchor: list[float] | None = None
    config: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def trend(self) -> list[float]:
        ks = [k for _, k in self.ladder]
        return [b / a if math.isfinite(a) and a > 0 else math.nan for a, b in zip(ks, ks[1:])]

    def to_dict(self) -> dict:
        out = {
            "verdict": self.verdict,
            "locus": self.locus,
            "constant": self.constant,
            "constant_is_lower_estimate": True,
            "ladder": [[s, k] for s, k in self.ladder],
            "trend": self.trend,
            "witness": None if self.witness is None else self.witness.to_dict(),
            "reason": self.reason,
            "stage": self.stage,
            "anchor": self.anchor,
            "config": self.config,
        }
        if self.details:
            out["details"] = {k: (v.to_dict() if hasattr(v, "to_dict") else v) for k, v in self.details.items()}
        return out


# --------------------------------------------------------------------------
# ratio suprema


class Context:
    """A sample together with its graph and geodesic engine."""

    def __init__(self, sample: Sample, graph: ProximityGraph | None = None, eps: float | None = None):
        self.sample = sample
        self.graph = graph if graph is not None else sample_graph(sample, eps)
        self.engine = GeodesicEngine(self.graph)

    def outer(self, i, j) -> np.ndarray:
        P = self.sample.points
        return np.asarray(ambient_distance(self.sample.metric, P[np.asarray(i)][:, None, :], P[np.asarray(j)][None, :, :]))

    def witness(self, i: int, j: int) -> Witness:
        i, j = sorted((int(i), int(j)))
        s = self.sample
        outer = float(ambient_distance(s.metric, s.points[i], s.points[j]))
        return Witness(i, j, s.points[i].copy(), s.points[j].copy(), outer, self.engine.distance(i, j),
                       (s.provenance(i), s.provenance(j)))


def _fps_embedding(s: Sample) -> np.ndarray:
    """Coordinates in which farthest-point sampling covers every scale.

    Relatively spaced samples are embedded by (log radius, direction) about
    their center so small and large scales receive sources alike.
    """
    if not s.relative or s.metric.kind != EUCLIDEAN:
        return s.points
    c = np.zeros(s.dim) if s.center is None else s.center
    v = s.points - c
    rho = np.linalg.norm(v, axis=1)
    floor = max(s.floor, 1e-300)
    u = v / np.maximum(rho, 1e-300)[:, None]
    return np.column_stack([np.log(np.maximum(rho, floor)), u])


def _ratio_block(ctx: Context, src: np.ndarray, tgt: np.ndarray):
    D = ctx.engine.rows(src, tgt)
    O = ctx.outer(src, tgt)
    with np.errstate(divide="ignore", invalid="ignore"):
        R = D / O
    R[~(O > 0)] = -np.inf
    k = int(np.argmax(R))
    a, b = divmod(k, len(tgt))
    return float(R[a, b]), int(src[a]), int(tgt[b])


def ratio_sup(ctx: Context, subset=None, targets=None, pair_budget: int = PAIR_BUDGET,
              threads: int = 1, refine: bool = True) -> tuple[float, Witness]:
    """Largest inner/outer ratio over a deterministic pair schedule.

    Pairs are drawn from ``subset`` x ``targets`` (both default to every
    vertex).  When the full product exceeds ``pair_budget`` the sources are
    a farthest-point subset of ``subset``; the best pair found is then
    improved by alternating single-row maximization.  Ties resolve to the
    lexicographically smallest pair, independent of ``threads``.
    """
    if pair_budget < 1:
        raise ValueError("pair_budget must be >= 1")
    n = len(ctx.sample)
    V = np.arange(n) if subset is None else np.sort(np.asarray(subset, dtype=np.int64))
    T = V if targets is None else np.sort(np.asarray(targets, dtype=np.int64))
    if len(V) < 1 or len(T) < 1 or (targets is None and len(V) < 2):
        raise EmptySample("not enough points to form a pair")
    if len(V) * len(T) <= pair_budget:
        sources = V
    else:
        k = max(1, pair_budget // len(T))
        emb = _fps_embedding(ctx.sample)[V]
        sources = np.sort(V[sets.farthest_point_order(emb, k)])
    chunk = max(1, 2_000_000 // len(T))
    blocks = [sources[i:i + chunk] for i in range(0, len(sources), chunk)]
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda b: _ratio_block(ctx, b, T), blocks))
    else:
        results = [_ratio_block(ctx, b, T) for b in blocks]
    best, bi, bj = -math.inf, -1, -1
    for r, i, j in results:
        if r > best:
            best, bi, bj = r, i, j
    if bi < 0 or best == -math.inf:
        raise EmptySample("no pair with positive outer distance")
    if refine and len(sources) < len(V) and math.isfinite(best):
        # alternate between the best partner of each end of the current pair
        for _ in range(10):
            improved = False
            r, _, b = _ratio_block(ctx, np.array([bj]), V)
            if r > best * (1 + 1e-12):
                best, bi, improved = r, b, True
            r, _, b = _ratio_block(ctx, np.array([bi]), T)
            if r > best * (1 + 1e-12):
                best, bj, improved = r, b, True
            if not improved:
                break
    return best, ctx.witness(bi, bj)


# --------------------------------------------------------------------------
# ladders and verdict rules


def decide(ladder: Sequence[float], growth: float = GROWTH, runs: int = GROWTH_RUNS,
           stable_tol: float = STABLE_TOL, stable_rungs: int = STABLE_RUNGS) -> tuple[str, str]:
    """Apply the divergence rule, then the stability rule, to a K ladder."""
    ks = list(ladder)
    if any(not math.isfinite(k) for k in ks):
        return NOT_LNE, "infinite inner distance at finite outer distance"
    g = [b / a for a, b in zip(ks, ks[1:])]
    run = 0
    for x in g:
        run = run + 1 if x >= growth else 0
        if run >= runs:
            return NOT_LNE, f"ratio grew by >= {growth} over {runs} consecutive rungs"
    if len(ks) < stable_rungs:
        return INCONCLUSIVE, f"need at least {stable_rungs} rungs"
    tail = ks[-stable_rungs:]
    spread = (max(tail) - min(tail)) / min(tail)
    if spread < stable_tol:
        return LNE, f"last {stable_rungs} rungs agree within {100 * spread:.1f}%"
    return INCONCLUSIVE, f"last {stable_rungs} rungs vary by {100 * spread:.1f}% without sustained growth"


def shell_ladder(ctx: Context, rho: np.ndarray, radii: Sequence[float], inward: bool,
                 restrict=None, targets_restrict=None, pair_budget: int = PAIR_BUDGET,
                 threads: int = 1, n_min: int = N_SHELL):
    """K over the shells ``[R, 4R]`` (outward) or ``[r/4, r]`` (inward) of ``rho``.

    ``restrict`` limits the shell to a vertex subset; ``targets_restrict``
    makes the pairs bipartite between ``restrict`` and that subset.
    Returns a list of ``(radius, K, witness)``.
    """
    out = []
    allowed = np.ones(len(rho), dtype=bool) if restrict is None else np.isin(np.arange(len(rho)), restrict)
    other = None if targets_restrict is None else np.isin(np.arange(len(rho)), targets_restrict)
    for R in radii:
        lo, hi = (R / 4, R) if inward else (R, 4 * R)
        shell = (rho >= lo) & (rho <= hi)
        src = np.flatnonzero(shell & allowed)
        tgt = None if other is None else np.flatnonzero(shell & other)
        if len(src) < (1 if other is not None else n_min) or (tgt is not None and len(tgt) < 1):
            raise InsufficientTail(f"only {len(src)} sample points in the shell at radius {R:g}")
        K, w = ratio_sup(ctx, src, tgt, pair_budget, threads)
        out.append((float(R), K, w))
    return out


def _ladder_report(rungs, locus: str, anchor=None, config=None) -> LneReport:
    ks = [k for _, k, _ in rungs]
    verdict, reason = decide(ks)
    if verdict == NOT_LNE:
        wk = next((w for _, k, w in rungs if not math.isfinite(k)), rungs[-1][2])
    else:
        wk = max(rungs, key=lambda r: r[1])[2]
    constant = max(ks) if verdict == LNE else None
    return LneReport(verdict, locus, constant, [(r, k) for r, k, _ in rungs], wk, reason,
                     anchor=anchor, config=dict(config or {}))


def _config(budget, radii, eps, delta_bin=sets.DELTA_BIN, **extra) -> dict:
    cfg = {"budget": budget, "eps": "auto" if eps is None else eps,
           "delta_bin_deg": math.degrees(delta_bin), "ladder": list(radii)}
    cfg.update(extra)
    return cfg


def lne_at_infinity(d: SetDescriptor | Sample, ladder: Sequence[float] | None = None,
                    budget: int = BUDGET, eps: float | None = None, pair_budget: int = PAIR_BUDGET,
                    threads: int = 1, ctx: Context | None = None, restrict=None) -> LneReport:
    """Decide local LNE at infinity from a ladder ``R0 < 2 R0 < ...``.

    ``K(R)`` is taken over the pairs in the shell ``R <= |x| <= 4R``.
    """
    radii = list(ladder) if ladder is not None else dyadic(R0_INF, RUNGS_INF)
    if len(radii) < 4 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("an at-infinity ladder needs at least 4 increasing radii")
    if ctx is None:
        if isinstance(d, Sample):
            ctx = Context(d, eps=eps)
        else:
            if d.bounded:
                raise ValueError("the set is bounded; there is nothing to check at infinity")
            s = sets.sample_descriptor(d, budget, (radii[0] / 4, 8 * radii[-1]))
            ctx = Context(s, eps=eps)
    rungs = shell_ladder(ctx, ctx.sample.tags, radii, False, restrict, None, pair_budget, threads)
    return _ladder_report(rungs, AT_INFINITY, None, _config(budget, radii, eps))


def point_sample(d: SetDescriptor, x0, radii: Sequence[float], budget: int) -> Sample:
    r_min = min(radii) / 4
    return sets.sample_descriptor(d, budget, (r_min / 16, 64 * max(radii)), center=x0)


def lne_at_point(d: SetDescriptor | Sample, x0, ladder: Sequence[float] | None = None,
                 budget: int = BUDGET, eps: float | None = None, pair_budget: int = PAIR_BUDGET,
                 threads: int = 1, ctx: Context | None = None, rho: np.ndarray | None = None) -> LneReport:
    """Decide local LNE at ``x0`` from shrinking radii ``r0 > r0/2 > ...``.

    ``K(r)`` is taken over the pairs with ``r/4 <= |x - x0| <= r``.  The
    ladder in the report is listed in rung order, i.e. shrinking radii.
    """
    radii = list(ladder) if ladder is not None else dyadic(R0_POINT, RUNGS_POINT, 0.5)
    if len(radii) < 4 or any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("an at-point ladder needs at least 4 decreasing radii")
    x0 = np.asarray(x0, dtype=float)
    if ctx is None:
        s = d if isinstance(d, Sample) else point_sample(d, x0, radii, budget)
        ctx = Context(s, eps=eps)
    if rho is None:
        rho = np.linalg.norm(ctx.sample.points - x0, axis=1)
    if rho.min() > radii[-1] / 4:
        raise InsufficientTail(f"the sample does not approach {x0.tolist()} closer than {rho.min():g}")
    rungs = shell_ladder(ctx, rho, radii, True, None, None, pair_budget, threads)
    return _ladder_report(rungs, AT_POINT, x0.tolist(), _config(budget, radii, eps))


# --------------------------------------------------------------------------
# obstruction and gluing


@dataclass
class Obstruction:
    obstructed: bool
    direction: np.ndarray | None = None
    parts: tuple[int, int] | None = None
    angle: float | None = None
    sets: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "obstructed": self.obstructed,
            "direction": None if self.direction is None else self.direction.tolist(),
            "parts": None if self.parts is None else list(self.parts),
            "angle_deg": None if self.angle is None else math.degrees(self.angle),
            "asymptotic_sets": [a.directions.tolist() for a in self.sets],
        }


def shared_direction_obstruction(cs: sets.ComponentSplit, delta_bin: float = sets.DELTA_BIN,
                                 anchor=INFINITY) -> Obstruction:
    """OBSTRUCTED when two parts share an asymptotic direction up to ``delta_bin``."""
    if len(cs.parts) < 2:
        raise ValueError("the split has fewer than two parts")
    asym = [sets.asymptotic_set(p, anchor, delta_bin) for p in cs.parts]
    best = None
    for a in range(len(asym)):
        for b in range(a + 1, len(asym)):
            for u in asym[a].directions:
                for v in asym[b].directions:
                    ang = float(2 * np.arcsin(min(1.0, np.linalg.norm(u - v) / 2)))
                    if ang < delta_bin and (best is None or ang < best[0]):
                        w = u + v
                        best = (ang, w / np.linalg.norm(w), (a, b))
    if best is None:
        return Obstruction(False, sets=asym)
    return Obstruction(True, best[1], best[2], best[0], asym)


def _match_parts(src: sets.ComponentSplit, dst: sets.ComponentSplit, dst_sample: Sample) -> list[int]:
    """For each part of ``src``, the part of ``dst`` containing the point
    closest to the part's point of median radius."""
    owner = np.full(len(dst_sample), -1)
    for k, idx in enumerate(dst.indices):
        owner[idx] = k
    pool = np.flatnonzero(owner >= 0)
    out = []
    for part in src.parts:
        lim = dst_sample.tags[pool].max()
        ok = np.flatnonzero(part.tags <= lim)
        if len(ok) == 0:
            out.append(-1)
            continue
        m = ok[np.argsort(part.tags[ok])[len(ok) // 2]]
        near = pool[np.argmin(np.linalg.norm(dst_sample.points[pool] - part.points[m], axis=1))]
        out.append(int(owner[near]))
    return out


def glue_certify(d: SetDescriptor | Sample, R: float = R0_INF, budget: int = BUDGET,
                 ladder: Sequence[float] | None = None, point_ladder: Sequence[float] | None = None,
                 radial_range=None, eps: float | None = None, delta_bin: float = sets.DELTA_BIN,
                 pair_budget: int = PAIR_BUDGET, threads: int = 1, far_factor: float = 1e3) -> LneReport:
    """Global LNE certificate by gluing local information.

    Stages: (global) the sup ratio over the whole sample must be finite;
    (compact) the part within radius ``R`` has a finite ratio and every
    junction passes the at-point ladder; (ends) each connected component of
    the part beyond ``R`` passes the at-infinity ladder; (directions) no two
    such components share an asymptotic direction.
    """
    radii = list(ladder) if ladder is not None else dyadic(max(R, R0_INF), RUNGS_INF)
    cfg = _config(budget, radii, eps, delta_bin, split_radius=R, pair_budget=pair_budget)
    is_desc = isinstance(d, SetDescriptor)
    if is_desc:
        rr = radial_range or (R / 16, 8 * radii[-1])
        s = sets.sample_descriptor(d, budget, rr)
        cfg["radial_range"] = list(rr)
    else:
        s = d
    details: dict = {}

    def fail(verdict, stage, reason, witness=None, ladder_=None, constant=None):
        return LneReport(verdict, GLOBAL, constant, ladder_ or [], witness, reason, stage, None, cfg, details)

    try:
        ctx = Context(s, eps=eps)
        K0, w0 = ratio_sup(ctx, pair_budget=pair_budget, threads=threads)
        details["global"] = {"K": K0, "witness": w0.to_dict()}
        if not math.isfinite(K0):
            return fail(NOT_LNE, "global", "sample is disconnected: infinite inner distance", w0)
        # compact part and junctions
        inside = np.flatnonzero(s.tags <= R)
        if len(inside) >= 2:
            Kc, wc = ratio_sup(ctx, inside, pair_budget=pair_budget, threads=threads)
            details["compact"] = {"K": Kc, "witness": wc.to_dict()}
            if not math.isfinite(Kc):
                return fail(NOT_LNE, "compact", "compact part has infinite ratio", wc)
        if is_desc:
            for jname, p in d.junctions:
                rep = lne_at_point(d, p, point_ladder, budget, eps, pair_budget, threads)
                details[f"junction:{jname}"] = rep
                if rep.verdict != LNE:
                    return fail(rep.verdict, f"junction:{jname}", rep.reason, rep.witness, rep.ladder)
        bounded = d.bounded if is_desc else s.tags.max() < 4 * radii[-1]
        K_est = K0
        if not bounded:
            cs = sets.split_components_at_radius(s, R, eps)
            ends = []
            for k, idx in enumerate(cs.indices):
                rep = lne_at_infinity(s, radii, budget, eps, pair_budget, threads, ctx=ctx, restrict=idx)
                details[f"end:{k}"] = rep
                ends.append(rep)
                if rep.verdict == NOT_LNE:
                    return fail(NOT_LNE, f"end:{k}", rep.reason, rep.witness, rep.ladder)
            bad = [k for k, r in enumerate(ends) if r.verdict != LNE]
            if bad:
                return fail(INCONCLUSIVE, f"end:{bad[0]}", ends[bad[0]].reason, ends[bad[0]].witness,
                            ends[bad[0]].ladder)
            if len(cs.parts) >= 2:
                if is_desc:
                    far = sets.sample_descriptor(d, budget, (R, far_factor * rr[1]))
                    cs_far = sets.split_components_at_radius(far, R, eps)
                else:
                    far, cs_far = s, cs
                obs = shared_direction_obstruction(cs_far, delta_bin)
                details["directions"] = obs
                if obs.obstructed:
                    a, b = obs.parts
                    back = _match_parts(cs_far, cs, s)
                    ia, ib = back[a], back[b]
                    trend = []
                    witness = None
                    if ia >= 0 and ib >= 0 and ia != ib:
                        rungs = shell_ladder(ctx, s.tags, radii, False, cs.indices[ia], cs.indices[ib],
                                             pair_budget, threads)
                        trend = [(r, k) for r, k, _ in rungs]
                        witness = rungs[-1][2]
                    return fail(NOT_LNE, "directions",
                                f"ends {a} and {b} share the asymptotic direction {np.round(obs.direction, 6).tolist()}",
                                witness, trend)
            K_est = max([K0] + [r.constant for r in ends])
    except (InsufficientTail, EmptySample, Unreachable) as exc:
        return fail(INCONCLUSIVE, "error", f"{type(exc).__name__}: {exc}")
    end0 = details.get("end:0")
    return LneReport(LNE, GLOBAL, K_est, end0.ladder if end0 else [], w0, "all stages passed", None, None,
                     cfg, details)


# --------------------------------------------------------------------------
# auxiliary measurements


def cone_constant(d: SetDescriptor | Sample, budget: int = BUDGET, radial_range=(1e-4, 1e3),
                  eps: float | None = None) -> float:
    """Estimate ``sup d_in(x, 0) / |x|`` over the sample."""
    s = d if isinstance(d, Sample) else sets.sample_descriptor(d, budget, radial_range, center=np.zeros(d.dim))
    ctx = Context(s, eps=eps)
    r = np.linalg.norm(s.points, axis=1)
    o = int(np.argmin(r))
    dist = ctx.engine.rows([o])[0] + r[o]
    if not np.all(np.isfinite(dist)):
        raise Unreachable("part of the sample is disconnected from the origin")
    mask = r > max(10 * r[o], 1e-300)
    if not np.any(mask):
        raise EmptySample("every sample point sits at the origin")
    return float(np.max(dist[mask] / r[mask]))


ArcRef = str | tuple[str, Callable[[float], float]]


def arc_pair_ratio(y1: ArcRef, y2: ArcRef, d: SetDescriptor, t_ladder: Sequence[float],
                   tol: float = 1e-9) -> list[float]:
    """``d_in(y1(t), y2(t)) / |y1(t) - y2(t)|`` along a parameter ladder.

    An arc reference is an arc label of ``d`` (parameter ``t``) or a pair of
    a label and a reparametrization ``t -> s``.
    """
    def resolve(ref, t):
        label, fn = (ref, None) if isinstance(ref, str) else ref
        s_ = t if fn is None else fn(t)
        return label, float(s_), d.arc(label)(np.array([s_]))[0]

    out = []
    for t in t_ladder:
        l1, s1, p = resolve(y1, t)
        l2, s2, q = resolve(y2, t)
        outer = float(np.linalg.norm(p - q))
        if outer == 0:
            raise ValueError(f"the two arcs meet at t={t}")
        out.append(network_inner_distance(d, (l1, s1), (l2, s2), tol) / outer)
    return out


def length_ratio(arc: sets.ParamArc, t: float, t0: float | None = None) -> float:
    """Arc length from ``t0`` to ``t`` divided by ``|gamma(t)|``."""
    from .inner import arc_length

    t0 = arc.a if t0 is None else t0
    return arc_length(arc, t0, t) / float(np.linalg.norm(arc(np.array([t]))[0]))
