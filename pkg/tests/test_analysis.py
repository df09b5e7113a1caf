import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from lnecheck import analysis as an
from lnecheck import inner, sets
from lnecheck.errors import EmptySample, InsufficientTail, Unreachable
from lnecheck.io import data_path, load_descriptor

SQ = math.sqrt(1 + 4 * math.pi**2)


def load(name):
    return load_descriptor(data_path(name))


def arc(coords, domain=(0, math.inf), label="a"):
    return sets.ParamArc.from_expressions(label, coords, domain)


# ---- decision rules


def test_decide_rules():
    assert an.decide([1, 1.3, 1.7, 2.2])[0] == an.NOT_LNE
    assert an.decide([1, 1.3, 1.3, 1.7, 2.2])[0] == an.INCONCLUSIVE
    assert an.decide([2.0, 2.05, 2.02, 2.04])[0] == an.LNE
    assert an.decide([1, math.inf, 2, 2])[0] == an.NOT_LNE
    assert an.decide([1, 1])[0] == an.INCONCLUSIVE
    assert an.decide([1.0, 1.5, 1.0, 1.5])[0] == an.INCONCLUSIVE


@settings(max_examples=200, deadline=None)
@given(ks=st.lists(st.floats(1, 1e3), min_size=3, max_size=8))
def test_decide_is_three_valued(ks):
    verdict, reason = an.decide(ks)
    tail = ks[-3:]
    if verdict == an.LNE:
        assert (max(tail) - min(tail)) / min(tail) < an.STABLE_TOL
    if verdict == an.NOT_LNE:
        g = [b / a for a, b in zip(ks, ks[1:])]
        assert any(all(x >= an.GROWTH for x in g[i:i + 3]) for i in range(len(g) - 2))
    assert reason


# ---- ratio suprema


def _ctx_points(pts, links=None):
    return an.Context(sets.euclidean_sample(np.asarray(pts, dtype=float), links=links))


def test_segment_constant_is_one():
    t = np.linspace(0, 1, 200)
    pts = np.column_stack([t, 2 * t])
    ctx = _ctx_points(pts, np.column_stack([np.arange(199), np.arange(1, 200)]))
    K, w = an.ratio_sup(ctx)
    assert abs(K - 1) < 1e-6
    assert w.ratio == pytest.approx(K)


def test_circle_constant():
    d = load("circle.lne")
    s = sets.sample_descriptor(d, 1000, (0, 10))
    K, w = an.ratio_sup(an.Context(s))
    assert K == pytest.approx(math.pi / 2, rel=0.02)
    assert np.linalg.norm(w.p + w.q) < 0.05


def test_spiral_constant_bounded():
    d = load("spiral.lne")
    s = sets.sample_descriptor(d, 4000, (1.0, math.exp(6)))
    K, _ = an.ratio_sup(an.Context(s))
    assert 1 <= K <= 1.05 * SQ


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(4, 30))
def test_ratio_sup_matches_brute_force(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 1, size=(n, 2))
    s = sets.euclidean_sample(pts)
    try:
        g = inner.build_graph(s, 0.8)
    except Exception:
        return
    ctx = an.Context(s, g)
    K, w = an.ratio_sup(ctx)
    ref = oracles.brute_ratio(pts, g.edges, g.weights)
    if math.isinf(ref):
        assert math.isinf(K) and w.infinite
    else:
        assert K == pytest.approx(ref, rel=1e-12)
    assert K >= 1 - 1e-6


def test_ratio_sup_budgeted_is_deterministic():
    d = load("spiral.lne")
    s = sets.sample_descriptor(d, 3000, (1.0, math.exp(5)))
    ctx = an.Context(s)
    a = an.ratio_sup(ctx, pair_budget=200_000, threads=1)
    b = an.ratio_sup(ctx, pair_budget=200_000, threads=4)
    assert a[0] == b[0] and (a[1].i, a[1].j) == (b[1].i, b[1].j)
    full = an.ratio_sup(ctx)[0]
    assert a[0] <= full + 1e-12
    assert a[0] >= 0.95 * full


def test_ratio_sup_errors():
    ctx = _ctx_points([[0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(ValueError):
        an.ratio_sup(ctx, pair_budget=0)
    with pytest.raises(EmptySample):
        an.ratio_sup(ctx, subset=[0])


def test_monotone_in_nested_balls():
    d = load("gamma_plus.lne")
    s = sets.sample_descriptor(d, 2000, (0.5, 200))
    ctx = an.Context(s)
    prev = 0.0
    for r in (3, 6, 12, 24, 48, 96):
        K, _ = an.ratio_sup(ctx, np.flatnonzero(s.tags <= r))
        assert K >= prev - 1e-12
        prev = K


@settings(max_examples=10, deadline=None)
@given(lam=st.floats(1e-2, 1e2))
def test_scale_equivariance(lam):
    s = _osc_sample()
    base = an.lne_at_infinity(s, [16, 32, 64, 128])
    scaled = an.lne_at_infinity(s.scaled(lam), [16 * lam, 32 * lam, 64 * lam, 128 * lam])
    assert scaled.verdict == base.verdict
    for (r0, k0), (r1, k1) in zip(base.ladder, scaled.ladder):
        assert r1 == pytest.approx(lam * r0)
        assert k1 == pytest.approx(k0, rel=1e-9)


_CACHE = {}


def _osc_sample():
    if "osc" not in _CACHE:
        _CACHE["osc"] = sets.sample_descriptor(load("osc_m0p5.lne"), 5000, (4.0, 1024.0))
    return _CACHE["osc"]


# ---- ladders


def test_parabola_not_lne_at_infinity():
    rep = an.lne_at_infinity(load("parabola.lne"))
    assert rep.verdict == an.NOT_LNE
    assert all(k >= 1 - 1e-6 for _, k in rep.ladder)
    assert all(b > a for (a, _), (b, _) in zip(rep.ladder, rep.ladder[1:]))
    assert rep.witness is not None and rep.witness.ratio > 1


@pytest.mark.parametrize("name,expected", [("osc_m0p5.lne", an.LNE), ("osc_0p5.lne", an.NOT_LNE)])
def test_oscillation_examples(name, expected):
    assert an.lne_at_infinity(load(name)).verdict == expected


def test_lne_at_infinity_preconditions():
    with pytest.raises(ValueError):
        an.lne_at_infinity(load("parabola.lne"), [16, 32, 64])
    with pytest.raises(ValueError):
        an.lne_at_infinity(load("circle_arc.lne"))
    with pytest.raises(InsufficientTail):
        an.lne_at_infinity(load("parabola.lne"), budget=40)


def test_lne_at_point_examples():
    circ = load("circle_arc.lne")
    p = circ.arcs[0](np.array([0.5 * (circ.arcs[0].a + circ.arcs[0].b)]))[0]
    rep = an.lne_at_point(circ, p)
    assert rep.verdict == an.LNE
    assert rep.constant < 1.05
    cusp = an.lne_at_point(load("cusp.lne"), [0, 0])
    assert cusp.verdict == an.NOT_LNE
    branch = an.lne_at_point(load("cusp_branch.lne"), [0, 0])
    assert branch.verdict == an.LNE
    assert max(k for _, k in branch.ladder) <= 1.1


def test_lne_at_point_insufficient_tail():
    seg = sets.arc_network([arc(["t", "0"], (1, 2))])
    with pytest.raises(InsufficientTail):
        an.lne_at_point(seg, [0, 0])


@pytest.mark.parametrize("name", ["osc_m0p5.lne", "osc_m1.lne", "osc_0.lne"])
def test_stable_constant_at_infinity(name):
    rep = an.lne_at_infinity(load(name))
    ks = [k for _, k in rep.ladder]
    assert rep.verdict == an.LNE
    assert max(ks) <= 1.2 * min(ks)


def test_glued_ends_have_stable_constants():
    for name in ("spiral.lne", "gamma_plus.lne"):
        rep = an.glue_certify(load(name))
        assert rep.verdict == an.LNE
        for key, sub in rep.details.items():
            if key.startswith("end:"):
                ks = [k for _, k in sub.ladder]
                assert max(ks) <= 1.2 * min(ks)


# ---- obstruction and gluing


def _far_split(name, R=10.0):
    s = sets.sample_descriptor(load(name), 6000, (1.0, 1e5))
    return sets.split_components_at_radius(s, R)


def test_obstruction_examples():
    obs = an.shared_direction_obstruction(_far_split("parabola.lne"))
    assert obs.obstructed
    assert np.degrees(np.arccos(obs.direction @ [0, 1])) < 2
    assert not an.shared_direction_obstruction(_far_split("line.lne")).obstructed
    g0 = an.shared_direction_obstruction(_far_split("gamma_zero.lne"))
    assert g0.obstructed and np.degrees(np.arccos(g0.direction @ [0, 1])) < 2
    with pytest.raises(ValueError):
        an.shared_direction_obstruction(_far_split("spiral.lne"))


@pytest.mark.parametrize("name,left,right", [("parabola.lne", "left", "right"),
                                             ("gamma_zero.lne", "left", "right")])
def test_obstruction_implies_growing_pair_ratio(name, left, right):
    d = load(name)
    assert an.shared_direction_obstruction(_far_split(name)).obstructed
    labels = {a.label for a in d.arcs}
    l1 = next(x for x in labels if x.endswith(left))
    l2 = next(x for x in labels if x.endswith(right))
    ts = [10.0, 20.0, 40.0, 80.0, 160.0]
    ladder = an.arc_pair_ratio(l1, l2, d, ts)
    assert all(b > a for a, b in zip(ladder[1:], ladder[2:]))


def test_glue_examples():
    sp = an.glue_certify(load("spiral.lne"))
    assert sp.verdict == an.LNE and 1 <= sp.constant <= 1.05 * SQ
    par = an.glue_certify(load("parabola.lne"))
    assert par.verdict == an.NOT_LNE and par.stage in ("directions", "end:0", "end:1")
    plus = an.glue_certify(load("gamma_plus.lne"))
    assert plus.verdict == an.LNE


def test_glue_disconnected_sample():
    two = sets.arc_network([arc(["t", "0"], (0, 1), "a"), arc(["t", "1"], (0, 1), "b")])
    rep = an.glue_certify(two, budget=200)
    assert rep.verdict == an.NOT_LNE and rep.stage == "global"
    assert rep.witness.infinite


def test_report_serialization():
    rep = an.lne_at_infinity(load("parabola.lne"))
    out = rep.to_dict()
    assert out["verdict"] == an.NOT_LNE
    assert out["constant_is_lower_estimate"] is True
    assert len(out["ladder"]) == 4 and len(out["trend"]) == 3
    assert set(out["witness"]) >= {"points", "provenance", "outer", "inner", "ratio", "infinite"}


# ---- auxiliary measurements


def test_cone_constant_examples():
    assert an.cone_constant(load("ray.lne")) == pytest.approx(1, abs=1e-6)
    th = 0.3
    rays = sets.arc_network(
        [arc([f"t*cos({th})", f"t*sin({th})"], (0, 1), "r1"), arc([f"t*cos({th})", f"-t*sin({th})"], (0, 1), "r2")],
        [("o", np.zeros(2))])
    assert an.cone_constant(rays) == pytest.approx(1, abs=1e-6)
    c = an.cone_constant(load("cusp.lne"))
    assert 1 <= c <= 1.2
    # oracle: branch length over radius at the far end
    assert c == pytest.approx(oracles.cusp_length(1.0) / math.sqrt(2), rel=1e-3)


def test_cone_constant_unreachable():
    two = sets.arc_network([arc(["t", "0"], (0, 1), "a"), arc(["t", "1"], (0, 1), "b")])
    with pytest.raises(Unreachable):
        an.cone_constant(two)


def test_arc_pair_ratio_examples():
    th = 0.25
    rays = sets.arc_network(
        [arc([f"t*cos({th})", f"t*sin({th})"], label="r1"), arc([f"t*cos({th})", f"-t*sin({th})"], label="r2")],
        [("o", np.zeros(2))])
    ts = [1.0, 10.0, 100.0, 1000.0]
    lad = an.arc_pair_ratio("r1", "r2", rays, ts)
    tau = 2 * th
    assert max(lad) <= 4 / math.sin(tau)
    assert max(lad) / min(lad) < 1 + 1e-9
    par = load("parabola.lne")
    lad = an.arc_pair_ratio("left", "right", par, [10.0, 20.0, 40.0, 80.0])
    for t, r in zip([10.0, 20.0, 40.0, 80.0], lad):
        assert r == pytest.approx(oracles.parabola_length(t) / t, rel=1e-9)
        assert r / t == pytest.approx(1, rel=0.02)
    shifted = an.arc_pair_ratio("r1", ("r1", lambda t: 2 * t), rays, ts)
    assert all(r == pytest.approx(1) for r in shifted)
