"""Equivalence harnesses and the frozen example corpus.

Each harness computes a verdict for a set and for its image under a
transform (stereographic compactification, inversion, projective closure)
and reports whether the two verdict classes agree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import analysis as an
from . import sets
from .analysis import INCONCLUSIVE, LNE, NOT_LNE, Context, LneReport
from .errors import EmptySample, InsufficientTail, LneError
from .geometry import (ETA_SINGULAR, AmbientMetric, affine_to_projective, conformal_factor_stereo,
                       direction_to_projective, distance_to_line_at_infinity, invert, north_pole,
                       stereo_to_sphere)
from .inner import chain_graph, sample_graph
from .sets import Sample, SetDescriptor


@dataclass
class EquivalenceReport:
    left: LneReport
    right: LneReport
    kind: str = ""

    @property
    def flagged(self) -> bool:
        return INCONCLUSIVE in (self.left.verdict, self.right.verdict)

    @property
    def agree(self) -> bool | None:
        if self.flagged:
            return None
        return self.left.verdict == self.right.verdict

    def to_dict(self) -> dict:
        return {"kind": self.kind, "left": self.left.to_dict(), "right": self.right.to_dict(),
                "agree": self.agree, "flagged": self.flagged}


def _combine(stages: list[tuple[str, LneReport]], locus: str, cfg: dict, constant=None) -> LneReport:
    details = {name: rep for name, rep in stages}
    for name, rep in stages:
        if rep.verdict == NOT_LNE:
            return LneReport(NOT_LNE, locus, None, rep.ladder, rep.witness, rep.reason, name, None, cfg, details)
    for name, rep in stages:
        if rep.verdict == INCONCLUSIVE:
            return LneReport(INCONCLUSIVE, locus, None, rep.ladder, rep.witness, rep.reason, name, None, cfg, details)
    ladder = next((rep.ladder for _, rep in stages if rep.ladder), [])
    return LneReport(LNE, locus, constant, ladder, None, "all stages passed", None, None, cfg, details)


def _global_stage(ctx: Context, pair_budget: int, threads: int) -> tuple[float, LneReport]:
    K, w = an.ratio_sup(ctx, pair_budget=pair_budget, threads=threads)
    if math.isfinite(K):
        return K, LneReport(LNE, an.GLOBAL, K, [], w, "finite ratio over the sample")
    return K, LneReport(NOT_LNE, an.GLOBAL, None, [], w, "infinite inner distance at finite outer distance")


def _end_tips(s: Sample, R: float) -> list[int]:
    """Index of the outermost point of each component beyond radius ``R``."""
    cs = sets.split_components_at_radius(s, R)
    return [int(idx[np.argmax(s.tags[idx])]) for idx in cs.indices]


def _append_points(s: Sample, extra: np.ndarray, label: str, edges: list[tuple[int, int]]):
    """Add points at infinity (tag ``inf``) joined to the given vertices."""
    n = len(s)
    m = len(extra)
    pts = np.concatenate([s.points, extra])
    labels = np.concatenate([s.labels, np.array([label] * m, dtype=object)])
    params = np.concatenate([s.params, np.full(m, np.nan)])
    tags = np.concatenate([s.tags, np.full(m, np.inf)])
    out = replace(s, points=pts, labels=labels, params=params, tags=tags)
    return out, np.array([(a, n + b) for a, b in edges], dtype=np.int64).reshape(-1, 2)


# --------------------------------------------------------------------------
# stereographic compactification


def to_sphere(s: Sample) -> Sample:
    """Push a Euclidean sample through the inverse stereographic projection."""
    y = stereo_to_sphere(s.points)
    return replace(s, points=y, metric=AmbientMetric.sphere(s.dim), relative=False,
                   center=None if s.center is None else stereo_to_sphere(s.center))


def sphere_certify(d: SetDescriptor, R: float = an.R0_INF, budget: int = an.BUDGET,
                   ladder: Sequence[float] | None = None, point_ladder: Sequence[float] | None = None,
                   radial_range=None, pair_budget: int = an.PAIR_BUDGET, threads: int = 1) -> LneReport:
    """LNE verdict for the closure of the stereographic image of ``d``.

    The affine sample is mapped to the sphere; for unbounded sets the north
    pole is appended and joined to the outermost point of each end.  The
    pole is treated like any other point: a shrinking ladder of chordal
    shells around it, plus the at-point ladders at the junction images.
    """
    radii = list(ladder) if ladder is not None else an.dyadic(max(R, an.R0_INF), an.RUNGS_INF)
    rr = radial_range or (R / 16, 8 * radii[-1])
    cfg = an._config(budget, radii, None, split_radius=R, radial_range=list(rr), metric="sphere")
    q = d.dim
    s = sets.sample_descriptor(d, budget, rr)
    ys = to_sphere(s)
    stages = []
    graph = chain_graph(ys) if ys.links is not None else sample_graph(ys)
    if not d.bounded:
        tips = _end_tips(s, R)
        ys, extra = _append_points(ys, north_pole(q)[None, :], "north-pole", [(t, 0) for t in tips])
        graph = (chain_graph(ys) if ys.links is not None else sample_graph(ys)).with_edges(extra)
    ctx = Context(ys, graph)
    K = None
    try:
        K, rep = _global_stage(ctx, pair_budget, threads)
        stages.append(("global", rep))
        if not d.bounded:
            rho = np.linalg.norm(ys.points - north_pole(q), axis=1)
            shrink = [2.0 / math.sqrt(1.0 + r * r) for r in radii]
            rungs = an.shell_ladder(ctx, rho, shrink, True, pair_budget=pair_budget, threads=threads)
            stages.append(("pole", an._ladder_report(rungs, an.AT_POINT, north_pole(q).tolist())))
        prad = list(point_ladder) if point_ladder is not None else an.dyadic(an.R0_POINT, an.RUNGS_POINT, 0.5)
        for jname, p in d.junctions:
            local = to_sphere(an.point_sample(d, p, prad, budget))
            yp = stereo_to_sphere(p)
            lam = float(conformal_factor_stereo(p))
            rep = an.lne_at_point(local, yp, [lam * r for r in prad], budget, pair_budget=pair_budget,
                                  threads=threads)
            stages.append((f"junction:{jname}", rep))
    except (InsufficientTail, EmptySample) as exc:
        stages.append(("error", LneReport(INCONCLUSIVE, an.GLOBAL, reason=f"{type(exc).__name__}: {exc}")))
    return _combine(stages, an.GLOBAL, cfg, K if stages and stages[0][1].verdict == LNE else None)


def verify_compactification(d: SetDescriptor, budget: int = an.BUDGET, R: float = an.R0_INF,
                            ladder=None, point_ladder=None, radial_range=None,
                            pair_budget: int = an.PAIR_BUDGET, threads: int = 1) -> EquivalenceReport:
    left = an.glue_certify(d, R, budget, ladder, point_ladder, radial_range, pair_budget=pair_budget,
                           threads=threads)
    right = sphere_certify(d, R, budget, ladder, point_ladder, radial_range, pair_budget, threads)
    return EquivalenceReport(left, right, "compactification")


# --------------------------------------------------------------------------
# inversion


def invert_sample(s: Sample) -> Sample:
    """Drop points at the origin and apply the inversion to the rest."""
    keep = np.linalg.norm(s.points, axis=1) > ETA_SINGULAR
    sub = s.subset(keep)
    pts = invert(sub.points)
    return replace(sub, points=pts, tags=np.linalg.norm(pts, axis=1), center=np.zeros(s.dim),
                   floor=0.0, relative=True)


def verify_inversion(d: SetDescriptor, budget: int = an.BUDGET, ladder: Sequence[float] | None = None,
                     pair_budget: int = an.PAIR_BUDGET, threads: int = 1) -> EquivalenceReport:
    """Local LNE at the origin versus local LNE at infinity of the inverted set."""
    radii = list(ladder) if ladder is not None else an.dyadic(an.R0_POINT, an.RUNGS_POINT, 0.5)
    origin = np.zeros(d.dim)
    s = an.point_sample(d, origin, radii, budget)
    left = an.lne_at_point(s, origin, radii, budget, pair_budget=pair_budget, threads=threads)
    inv = invert_sample(s)
    try:
        right = an.lne_at_infinity(inv, [1.0 / r for r in radii], budget, pair_budget=pair_budget,
                                   threads=threads)
    except (InsufficientTail, EmptySample) as exc:
        right = LneReport(INCONCLUSIVE, an.AT_INFINITY, reason=f"{type(exc).__name__}: {exc}")
    return EquivalenceReport(left, right, "inversion")


# --------------------------------------------------------------------------
# projective closure


def projective_certify(d: SetDescriptor, R: float = an.R0_INF, budget: int = an.BUDGET,
                       ladder: Sequence[float] | None = None, radial_range=None,
                       delta_bin: float = sets.DELTA_BIN, far_factor: float = 1e3,
                       pair_budget: int = an.PAIR_BUDGET, threads: int = 1) -> LneReport:
    """LNE verdict for the closure of ``d`` in the projective plane.

    Ends whose direction converges get their limit point on the line at
    infinity adjoined (shared by ends with the same limit).  The ladder
    runs over shells of shrinking distance to the line at infinity.
    """
    if d.dim != 2:
        raise ValueError("the projective closure is only defined for plane sets")
    radii = list(ladder) if ladder is not None else an.dyadic(max(R, an.R0_INF), an.RUNGS_INF)
    rr = radial_range or (R / 16, 8 * radii[-1])
    cfg = an._config(budget, radii, None, delta_bin, split_radius=R, radial_range=list(rr), metric="projective")
    s = sets.sample_descriptor(d, budget, rr)
    ps = replace(s, points=affine_to_projective(s.points), metric=AmbientMetric.projective(), relative=False,
                 center=None)
    stages = []
    K = None
    try:
        extra_pts, edges = [], []
        if not d.bounded:
            cs = sets.split_components_at_radius(s, R)
            far = sets.sample_descriptor(d, budget, (R, far_factor * rr[1]))
            cs_far = sets.split_components_at_radius(far, R)
            back = an._match_parts(cs_far, cs, s)
            for k, part in enumerate(cs_far.parts):
                a = sets.asymptotic_set(part, sets.INFINITY, delta_bin)
                if not a.converges() or back[k] < 0:
                    continue
                v = direction_to_projective(a.directions[0])
                slot = None
                for m, w in enumerate(extra_pts):
                    if min(np.linalg.norm(v - w), np.linalg.norm(v + w)) < delta_bin:
                        slot = m
                if slot is None:
                    extra_pts.append(v)
                    slot = len(extra_pts) - 1
                idx = cs.indices[back[k]]
                edges.append((int(idx[np.argmax(s.tags[idx])]), slot))
        graph = chain_graph(ps) if ps.links is not None else sample_graph(ps)
        if extra_pts:
            ps, extra = _append_points(ps, np.array(extra_pts), "line-at-infinity", edges)
            graph = (chain_graph(ps) if ps.links is not None else sample_graph(ps)).with_edges(extra)
        ctx = Context(ps, graph)
        K, rep = _global_stage(ctx, pair_budget, threads)
        stages.append(("global", rep))
        if not d.bounded:
            rho = distance_to_line_at_infinity(ps.points)
            shrink = [1.0 / r for r in radii]
            rungs = an.shell_ladder(ctx, rho, shrink, True, pair_budget=pair_budget, threads=threads)
            stages.append(("line-at-infinity", an._ladder_report(rungs, an.AT_INFINITY)))
        cfg["adjoined_points"] = [p.tolist() for p in extra_pts]
    except (InsufficientTail, EmptySample) as exc:
        stages.append(("error", LneReport(INCONCLUSIVE, an.GLOBAL, reason=f"{type(exc).__name__}: {exc}")))
    return _combine(stages, an.GLOBAL, cfg, K if stages and stages[0][1].verdict == LNE else None)


# --------------------------------------------------------------------------
# links


@dataclass
class LinkRung:
    radius: float
    constants: list[float]
    cross_infinite: bool

    @property
    def worst(self) -> float:
        return max(self.constants) if self.constants else math.nan


@dataclass
class LinkReport:
    rungs: list[LinkRung]
    at_infinity: LneReport
    band: float

    @property
    def uniform(self) -> bool:
        """Links uniformly LNE: finite, connected and a flat constant ladder."""
        if any(r.cross_infinite for r in self.rungs):
            return False
        verdict, _ = an.decide([r.worst for r in self.rungs])
        return verdict == LNE

    @property
    def consistent(self) -> bool:
        return self.uniform == (self.at_infinity.verdict == LNE)

    def to_dict(self) -> dict:
        return {
            "band": self.band,
            "rungs": [{"radius": r.radius, "constants": r.constants, "cross_component_infinite": r.cross_infinite}
                      for r in self.rungs],
            "uniform": self.uniform,
            "at_infinity": self.at_infinity.to_dict(),
            "consistent": self.consistent,
        }


def verify_link_criterion(d: SetDescriptor, ladder: Sequence[float] | None = None, band: float = 0.05,
                          budget: int = an.BUDGET, pair_budget: int = an.PAIR_BUDGET,
                          threads: int = 1) -> LinkReport:
    """Link constants ``K(X_R)`` on thickened spheres ``| |x| - R | <= band R``.

    Each link is measured with its own intrinsic graph and split into
    components; pairs in different components count as infinite.
    """
    if not band > 0:
        raise ValueError("band must be positive")
    radii = list(ladder) if ladder is not None else an.dyadic(an.R0_INF, an.RUNGS_INF)
    s = sets.sample_descriptor(d, budget, (radii[0] / 4, 8 * radii[-1]))
    rungs = []
    for R in radii:
        link = sets.slice_sample(s, sets.EQ, R, band * R)
        ctx = Context(link)
        labels = ctx.graph.labels
        consts = []
        for c in np.unique(labels):
            idx = np.flatnonzero(labels == c)
            if len(idx) >= 2:
                consts.append(an.ratio_sup(ctx, idx, pair_budget=pair_budget, threads=threads)[0])
        rungs.append(LinkRung(float(R), consts, len(np.unique(labels)) > 1))
    at_inf = an.lne_at_infinity(d, radii, budget, pair_budget=pair_budget, threads=threads)
    return LinkReport(rungs, at_inf, band)


# --------------------------------------------------------------------------
# corpus


INFINITY_LOCUS = "infinity"
GLOBAL_LOCUS = "global"
POINT_LOCUS = "point"
PROJECTIVE_LOCUS = "projective"
LOCI = (INFINITY_LOCUS, GLOBAL_LOCUS, POINT_LOCUS, PROJECTIVE_LOCUS)


@dataclass
class CorpusCase:
    name: str
    descriptor: SetDescriptor
    locus: str
    expected: str
    bound: float | None = None
    note: str = ""
    anchor: tuple[float, ...] | None = None
    at_origin: bool = False

    def __post_init__(self):
        if self.expected not in (LNE, NOT_LNE):
            raise ValueError(f"{self.name}: expected verdict must be LNE or NOT_LNE")
        if self.locus not in LOCI:
            raise ValueError(f"{self.name}: unknown locus {self.locus!r}")
        if self.locus == POINT_LOCUS and self.anchor is None:
            raise ValueError(f"{self.name}: a point case needs an anchor")


@dataclass
class CaseResult:
    name: str
    locus: str
    expected: str
    verdict: str
    constant: float | None
    bound: float | None
    reason: str
    note: str = ""

    @property
    def passed(self) -> bool:
        if self.verdict != self.expected:
            return False
        if self.bound is not None and self.verdict == LNE:
            return self.constant is not None and self.constant <= self.bound
        return True

    def to_dict(self) -> dict:
        return {"name": self.name, "locus": self.locus, "expected": self.expected, "verdict": self.verdict,
                "constant": self.constant, "bound": self.bound, "passed": self.passed, "reason": self.reason,
                "note": self.note}


def run_case(case: CorpusCase, budget: int = an.BUDGET, threads: int = 1) -> LneReport:
    d = case.descriptor
    if case.locus == INFINITY_LOCUS:
        return an.lne_at_infinity(d, budget=budget, threads=threads)
    if case.locus == POINT_LOCUS:
        return an.lne_at_point(d, case.anchor, budget=budget, threads=threads)
    if case.locus == PROJECTIVE_LOCUS:
        return projective_certify(d, budget=budget, threads=threads)
    return an.glue_certify(d, budget=budget, threads=threads)


def run_corpus(cases: Sequence[CorpusCase], budget: int = an.BUDGET, threads: int = 1) -> list[CaseResult]:
    """Run every case; failures are recorded in the table, never raised."""
    out = []
    for case in cases:
        try:
            rep = run_case(case, budget, threads)
            verdict, constant, reason = rep.verdict, rep.constant, rep.reason
        except LneError as exc:
            verdict, constant, reason = INCONCLUSIVE, None, f"{type(exc).__name__}: {exc}"
        out.append(CaseResult(case.name, case.locus, case.expected, verdict, constant, case.bound, reason, case.note))
    return out
