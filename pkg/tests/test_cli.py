import json
import subprocess
import sys

import pytest

from lnecheck import cli
from lnecheck.io import data_path

OSC_QUARTER = "[set]\nname = osc-q\ndim = 2\n\n[arc graph]\nx = t\ny = t^(0.25)*sin(t)\ndomain = 1, inf\n"


def run(argv):
    return cli.main([str(a) for a in argv])


def test_estimate_spiral(tmp_path, capsys):
    code = run(["estimate", data_path("spiral.lne"), "--global", "--out", tmp_path])
    assert code == 0
    out = json.loads((tmp_path / "spiral.global.json").read_text())
    assert out["report"]["verdict"] == "LNE"
    assert out["tool"] == "lnecheck" and out["version"]
    assert out["config"]["budget"] == 5000 and out["seed"] == 0
    assert (tmp_path / "spiral.global.ladder.csv").read_text().startswith("scale,K\n")
    assert (tmp_path / "spiral.global.ladder.svg").read_text().lstrip().startswith("<?xml")
    assert "verdict: LNE" in capsys.readouterr().out


def test_estimate_at_point(tmp_path):
    assert run(["estimate", data_path("cusp.lne"), "--at-point", "0,0", "--out", tmp_path]) == 0
    out = json.loads((tmp_path / "cusp.point.json").read_text())
    assert out["report"]["verdict"] == "NOT_LNE"
    assert out["report"]["witness"]["points"]


def test_estimate_output_is_byte_stable(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(["estimate", data_path("parabola.lne"), "--at-infinity", "--out", d]) == 0
    for name in ("parabola.infinity.json", "parabola.infinity.ladder.csv", "parabola.infinity.ladder.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_malformed_descriptor_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.lne"
    bad.write_text("[set]\nname = bad\ndim = 2\n\n[arc a]\nx = t\ny = nope(t)\n")
    assert run(["estimate", bad, "--global", "--out", tmp_path]) == 2
    assert "bad.lne:7:" in capsys.readouterr().err


def test_missing_file_exit_2(tmp_path):
    assert run(["estimate", tmp_path / "nothing.lne", "--global", "--out", tmp_path]) == 2


def test_usage_errors_exit_1(tmp_path):
    with pytest.raises(SystemExit) as info:
        run(["estimate", data_path("spiral.lne")])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        run(["frobnicate"])
    assert info.value.code == 1
    assert run(["estimate", data_path("spiral.lne"), "--global", "--budget", "-5", "--out", tmp_path]) == 1
    assert run(["estimate", data_path("spiral.lne"), "--global", "--rungs", "3", "--out", tmp_path]) == 1
    assert run(["estimate", data_path("spiral.lne"), "--at-point", "a,b", "--out", tmp_path]) == 1


def test_point_dimension_mismatch_exit_2(tmp_path):
    assert run(["estimate", data_path("cusp.lne"), "--at-point", "0,0,0", "--out", tmp_path]) == 2


def test_inconclusive_exit_3(tmp_path):
    f = tmp_path / "oscq.lne"
    f.write_text(OSC_QUARTER)
    assert run(["estimate", f, "--at-infinity", "--out", tmp_path]) == 3
    assert json.loads((tmp_path / "osc-q.infinity.json").read_text())["report"]["verdict"] == "INCONCLUSIVE"


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("budget = 3000\nseed = 7\n")
    assert run(["estimate", data_path("spiral.lne"), "--global", "--config", cfg, "--budget", "4000",
                "--out", tmp_path]) == 0
    out = json.loads((tmp_path / "spiral.global.json").read_text())
    assert out["config"]["budget"] == 4000 and out["seed"] == 7
    cfg.write_text("colour = blue\n")
    assert run(["estimate", data_path("spiral.lne"), "--global", "--config", cfg, "--out", tmp_path]) == 1


def test_sample_to_csv(tmp_path):
    dest = tmp_path / "p.csv"
    assert run(["sample", data_path("parabola.lne"), "--budget", "300", "--range", "0.1", "100", "-o", dest]) == 0
    lines = dest.read_text().splitlines()
    assert lines[0] == "# dim=2 metric=euclidean"
    assert len([ln for ln in lines if not ln.startswith("#")]) == 300


def test_estimate_on_cloud(tmp_path):
    dest = tmp_path / "c.csv"
    assert run(["sample", data_path("circle.lne"), "--budget", "500", "-o", dest]) == 0
    assert run(["estimate", dest, "--global", "--out", tmp_path]) == 0


def test_compactify_outputs(tmp_path):
    assert run(["compactify", data_path("parabola.lne"), "--out", tmp_path]) == 0
    rep = json.loads((tmp_path / "parabola.compactify.json").read_text())["report"]
    assert rep["agree"] is True
    svg = (tmp_path / "parabola.compactify.svg").read_text()
    assert "north pole" in svg


def test_invert_outputs(tmp_path):
    assert run(["invert", data_path("ray.lne"), "--out", tmp_path]) == 0
    rep = json.loads((tmp_path / "ray.invert.json").read_text())["report"]
    assert rep["left"]["verdict"] == rep["right"]["verdict"] == "LNE"


def test_links_outputs(tmp_path):
    assert run(["links", data_path("spiral.lne"), "--band", "0.05", "--out", tmp_path]) == 0
    rows = (tmp_path / "spiral.links.csv").read_text().splitlines()
    assert rows[0] == "radius,component,K,cross_component_infinite"
    assert len(rows) >= 5


def test_corpus_mismatch_exit_4(tmp_path):
    corpus = tmp_path / "c.ini"
    corpus.write_text(f"[case wrong]\ndescriptor = {data_path('parabola.lne')}\nlocus = infinity\nexpected = LNE\n")
    assert run(["corpus", corpus, "--out", tmp_path]) == 4
    res = json.loads((tmp_path / "corpus.json").read_text())["results"]
    assert res[0]["passed"] is False


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lnecheck", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "lnecheck" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "lnecheck", "estimate", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "--at-infinity" in proc.stdout
