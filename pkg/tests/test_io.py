import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lnecheck import expr, io, sets
from lnecheck.errors import DescriptorError, EvalError
from lnecheck.geometry import AmbientMetric


def test_expression_whitelist():
    f, df = expr.compile_component("t^2 + sin(t)")
    t = np.array([0.0, 1.0, 2.0])
    np.testing.assert_allclose(f(t), t**2 + np.sin(t))
    np.testing.assert_allclose(df(t), 2 * t + np.cos(t))
    for bad in ("__import__('os')", "t.real", "open('x')", "lambda: 1", "t; t", "[t]"):
        with pytest.raises(EvalError):
            expr.parse(bad)
    with pytest.raises(EvalError):
        expr.parse("u + 1")


def test_expression_constant_broadcasts():
    f, df = expr.compile_component("3")
    assert f(np.zeros(4)).shape == (4,)
    np.testing.assert_allclose(df(np.zeros(4)), 0)


def test_descriptor_round_trip():
    d = io.parse_descriptor("""
[set]
name = demo
dim = 2

[arc up]
x = t
y = t^2
domain = 0, inf

[arc down]
x = -t
y = t^2
domain = 0, inf

[junction o]
at = 0, 0
""")
    assert d.name == "demo" and d.dim == 2 and len(d.arcs) == 2
    np.testing.assert_allclose(d.arc("up")(np.array([3.0])), [[3, 9]])
    assert not d.bounded


def test_descriptor_errors_name_the_line():
    text = "[set]\nname = bad\ndim = 2\n\n[arc a]\nx = t\ny = frobnicate(t)\n"
    with pytest.raises(DescriptorError) as info:
        io.parse_descriptor(text, "bad.lne")
    assert str(info.value).startswith("bad.lne:7:")
    text = "[set]\ndim = 2\n[arc a]\nx = t\ny = t\n[junction j]\nat = 5, 0\n"
    with pytest.raises(DescriptorError) as info:
        io.parse_descriptor(text, "j.lne")
    assert "j.lne:7:" in str(info.value)
    with pytest.raises(DescriptorError):
        io.parse_descriptor("[arc a]\nx = t\n", "noset.lne")
    with pytest.raises(DescriptorError):
        io.parse_descriptor("[set]\ndim = 2\n[wat]\nx = 1\n")
    with pytest.raises(DescriptorError):
        io.load_descriptor("/nonexistent/file.lne")


def test_implicit_descriptor():
    d = io.parse_descriptor("[set]\ndim = 2\n[implicit]\nbound = 2\nf1 = 1@2,0; 1@0,2; -1@0,0\n")
    assert d.kind == sets.IMPLICIT
    np.testing.assert_allclose(d.implicit.residual(np.array([[1.0, 0.0]])), [[0.0]])
    with pytest.raises(DescriptorError):
        io.parse_descriptor("[set]\ndim = 2\n[implicit]\nbound = 2\nf1 = 1@2\n")
    with pytest.raises(DescriptorError):
        io.parse_descriptor("[set]\ndim = 2\n[implicit]\nbound = -1\nf1 = 1@2,0\n")


def test_cloud_descriptor(tmp_path):
    (tmp_path / "pts.csv").write_text("# dim=2 metric=euclidean\n0,0\n1,0\n2,0\n")
    (tmp_path / "c.lne").write_text("[set]\nname = c\npoints = pts.csv\n")
    d = io.load_descriptor(tmp_path / "c.lne")
    assert d.kind == sets.CLOUD and d.cloud.shape == (3, 2)


def test_csv_errors():
    with pytest.raises(DescriptorError) as info:
        io.parse_csv("0,0\n1,x\n", "p.csv")
    assert str(info.value).startswith("p.csv:2:")
    with pytest.raises(DescriptorError):
        io.parse_csv("0,0\n1,0,0\n")
    with pytest.raises(DescriptorError):
        io.parse_csv("# dim=3\n0,0\n")
    with pytest.raises(DescriptorError):
        io.parse_csv("# metric=hyperbolic\n0,0\n")
    with pytest.raises(DescriptorError):
        io.parse_csv("")


@settings(max_examples=100, deadline=None)
@given(pts=arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 4)),
                  elements=st.floats(-1e12, 1e12, allow_nan=False)))
def test_csv_round_trip(pts):
    m = AmbientMetric.euclidean(pts.shape[1])
    back, metric = io.parse_csv(io.format_csv(pts, m))
    assert metric == m
    np.testing.assert_array_equal(back, pts)


def test_csv_sphere_metric():
    y = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    back, m = io.parse_csv(io.format_csv(y, AmbientMetric.sphere(2)))
    assert m == AmbientMetric.sphere(2)


def test_corpus_file():
    cases, inversion = io.load_corpus(io.data_path("corpus.ini"))
    assert len(cases) == 10
    assert len(inversion) == 4
    names = [c.name for c in cases]
    assert len(set(names)) == 10
    spiral = next(c for c in cases if c.name == "spiral")
    assert spiral.bound == pytest.approx(1.05 * math.sqrt(1 + 4 * math.pi**2))
    cusp = next(c for c in cases if c.name == "cusp")
    assert cusp.anchor == (0.0, 0.0)


def test_corpus_errors(tmp_path):
    (tmp_path / "c.ini").write_text("[case a]\ndescriptor = missing.lne\nexpected = LNE\n")
    with pytest.raises(DescriptorError) as info:
        io.load_corpus(tmp_path / "c.ini")
    assert ":2:" in str(info.value)


def test_config_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nbudget = 2000\npair-budget = 100  # trailing\n")
    assert io.read_config(p) == {"budget": "2000", "pair_budget": "100"}
    p.write_text("budget\n")
    with pytest.raises(DescriptorError):
        io.read_config(p)


def test_dumps_is_deterministic():
    obj = {"b": np.float64(np.inf), "a": [np.int64(1), np.nan, np.array([1.5])], "c": np.bool_(True)}
    text = io.dumps(obj)
    assert text == io.dumps(dict(reversed(list(obj.items()))))
    assert '"inf"' in text and '"nan"' in text
    assert text.index('"a"') < text.index('"b"')


def test_eval_error_on_bad_arc():
    arc = sets.ParamArc.from_expressions("a", ["1/t", "t"], (-1, 1))
    with pytest.raises(EvalError):
        sets.sample_descriptor(sets.arc_network([arc]), 50, (0.1, 10))


def test_csv_extra_columns_are_skipped():
    pts = np.array([[1.0, 2.0], [3.0, 4.0]])
    text = io.format_csv(pts, AmbientMetric.euclidean(2), {"label": np.array(["a", "b"]),
                                                           "param": np.array([np.nan, 1.0])})
    back, _ = io.parse_csv(text)
    np.testing.assert_array_equal(back, pts)
