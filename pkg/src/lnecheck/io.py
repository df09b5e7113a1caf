"""Reading and writing descriptor files, point clouds, corpora and configs.

Descriptor and corpus files are INI-style text.  A descriptor looks like::

    [set]
    name = parabola
    dim = 2

    [arc right]
    x = t
    y = t^2
    domain = 0, inf

    [junction vertex]
    at = 0, 0

Coordinates are ``x, y, z`` (or a ``coords`` list split by ``;`` in any
dimension); optional derivatives use ``dx, dy, dz`` or ``dcoords``.  An
implicit set uses an ``[implicit]`` section with ``bound`` and one key per
component (``f1``, ``f2``, ...) holding ``coef@e1,e2,...`` monomials split
by ``;``.  A cloud descriptor names a CSV file with ``points = file.csv``.
"""
from __future__ import annotations

import configparser
import io
import json
import math
import re
from pathlib import Path

import numpy as np

from . import expr, sets
from .errors import DescriptorError, LneError
from .geometry import METRIC_KINDS, AmbientMetric
from .sets import SetDescriptor

_AXES = ("x", "y", "z")


class _Source:
    """Parsed INI text that can point back at the line of any key."""

    def __init__(self, text: str, path: str | None):
        self.path = path
        self.lines = text.splitlines()
        self.parser = configparser.ConfigParser(interpolation=None, strict=True,
                                                inline_comment_prefixes=("#",))
        self.parser.optionxform = str
        try:
            self.parser.read_string(text, source=path or "<string>")
        except configparser.ParsingError as exc:
            line = exc.errors[0][0] if exc.errors else None
            raise DescriptorError("malformed line", line, path) from None
        except configparser.MissingSectionHeaderError as exc:
            raise DescriptorError("content before the first [section]", exc.lineno, path) from None
        except configparser.DuplicateSectionError as exc:
            raise DescriptorError(f"duplicate section [{exc.section}]", exc.lineno, path) from None
        except configparser.DuplicateOptionError as exc:
            raise DescriptorError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno, path) from None
        except configparser.Error as exc:
            raise DescriptorError(str(exc).splitlines()[0], None, path) from None

    def line_of(self, section: str, key: str | None = None) -> int | None:
        current = None
        header = re.compile(r"^\s*\[(.+?)\]\s*$")
        for n, raw in enumerate(self.lines, 1):
            m = header.match(raw)
            if m:
                current = m.group(1).strip()
                if key is None and current == section:
                    return n
                continue
            if current == section and key is not None and re.match(rf"^\s*{re.escape(key)}\s*[=:]", raw):
                return n
        return None

    def error(self, message: str, section: str, key: str | None = None) -> DescriptorError:
        return DescriptorError(message, self.line_of(section, key), self.path)

    def number(self, section: str, key: str, default=None) -> float:
        raw = self.parser[section].get(key)
        if raw is None:
            if default is None:
                raise self.error(f"missing key {key!r}", section)
            return default
        return self._eval(raw, section, key)

    def _eval(self, raw: str, section: str, key: str) -> float:
        raw = raw.strip()
        if raw.lower() in ("inf", "+inf", "infinity"):
            return math.inf
        if raw.lower() in ("-inf", "-infinity"):
            return -math.inf
        try:
            return float(raw)
        except ValueError:
            pass
        try:
            value = float(expr.parse(raw, ()))
        except (LneError, TypeError, ValueError):
            raise self.error(f"{key} must be a number, got {raw!r}", section, key) from None
        return value

    def vector(self, section: str, key: str) -> list[float]:
        raw = self.parser[section].get(key)
        if raw is None:
            raise self.error(f"missing key {key!r}", section)
        return [self._eval(v, section, key) for v in raw.split(",")]


def _parse_arc(src: _Source, section: str, label: str, dim: int | None) -> sets.ParamArc:
    sec = src.parser[section]
    if "coords" in sec:
        coords = [c.strip() for c in sec["coords"].split(";")]
        derivs = [c.strip() for c in sec["dcoords"].split(";")] if "dcoords" in sec else None
    else:
        q = dim or sum(1 for a in _AXES if a in sec)
        if q == 0 or q > len(_AXES):
            raise src.error(f"arc {label!r} needs coordinates x, y (, z) or a coords list", section)
        missing = [a for a in _AXES[:q] if a not in sec]
        if missing:
            raise src.error(f"arc {label!r} is missing coordinate {missing[0]!r}", section)
        coords = [sec[a] for a in _AXES[:q]]
        derivs = [sec.get("d" + a) for a in _AXES[:q]]
        if not any(derivs):
            derivs = None
    if dim is not None and len(coords) != dim:
        raise src.error(f"arc {label!r} has {len(coords)} coordinates, expected {dim}", section)
    domain = src.vector(section, "domain") if "domain" in sec else [0.0, math.inf]
    if len(domain) != 2:
        raise src.error("domain must be 'a, b'", section, "domain")
    t_mono = src.number(section, "t_mono") if "t_mono" in sec else None
    for key in ("coords", *_AXES):
        if key in sec:
            for piece in sec[key].split(";"):
                try:
                    expr.parse(piece.strip())
                except LneError as exc:
                    raise src.error(str(exc), section, key) from None
    try:
        return sets.ParamArc.from_expressions(label, coords, domain, derivs, t_mono)
    except LneError as exc:
        raise src.error(str(exc), section) from None


def _parse_implicit(src: _Source, section: str, dim: int) -> sets.ImplicitSet:
    sec = src.parser[section]
    bound = src.number(section, "bound")
    terms = []
    keys = sorted((k for k in sec if re.fullmatch(r"f\d+", k)), key=lambda k: int(k[1:]))
    if not keys:
        raise src.error("an implicit set needs components f1, f2, ...", section)
    for key in keys:
        comp = []
        for tok in sec[key].split(";"):
            tok = tok.strip()
            m = re.fullmatch(r"([-+0-9.eE]+)\s*@\s*([0-9,\s]+)", tok)
            if not m:
                raise src.error(f"bad monomial {tok!r}; expected coef@e1,e2,...", section, key)
            exps = [int(e) for e in m.group(2).split(",")]
            if len(exps) != dim:
                raise src.error(f"monomial {tok!r} needs {dim} exponents", section, key)
            comp.append((float(m.group(1)), tuple(exps)))
        terms.append(comp)
    try:
        return sets.ImplicitSet.polynomial(terms, dim, bound)
    except LneError as exc:
        raise src.error(str(exc), section, "bound") from None


def parse_descriptor(text: str, path: str | None = None, base: Path | None = None) -> SetDescriptor:
    src = _Source(text, path)
    p = src.parser
    if "set" not in p:
        raise DescriptorError("missing [set] section", 1, path)
    name = p["set"].get("name", Path(path).stem if path else "set")
    dim = int(src.number("set", "dim")) if "dim" in p["set"] else None
    if dim is not None and dim < 1:
        raise src.error("dim must be >= 1", "set", "dim")
    if "points" in p["set"]:
        file = Path(p["set"]["points"])
        if base is not None and not file.is_absolute():
            file = base / file
        pts, metric = read_csv(file)
        return sets.point_cloud(pts, name, metric)
    if "implicit" in p:
        if dim is None:
            raise src.error("an implicit set needs dim", "set")
        return sets.implicit_set(_parse_implicit(src, "implicit", dim), name)
    arcs, junctions = [], []
    for section in p.sections():
        kind, _, label = section.partition(" ")
        if kind == "arc":
            arcs.append(_parse_arc(src, section, label.strip() or f"arc{len(arcs)}", dim))
        elif kind == "junction":
            junctions.append((section, label.strip() or f"j{len(junctions)}", src.vector(section, "at")))
        elif section != "set":
            raise src.error(f"unknown section [{section}]", section)
    if not arcs:
        raise DescriptorError("no [arc ...] sections", None, path)
    try:
        return sets.arc_network(arcs, [(nm, at) for _, nm, at in junctions], name)
    except DescriptorError as exc:
        for section, nm, _ in junctions:
            if repr(nm) in str(exc):
                raise src.error(str(exc), section, "at") from None
        raise DescriptorError(str(exc), None, path) from None


def load_descriptor(path) -> SetDescriptor:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DescriptorError(f"cannot read descriptor: {exc.strerror}", None, str(path)) from None
    return parse_descriptor(text, str(path), path.parent)


# --------------------------------------------------------------------------
# point clouds


def read_csv(path) -> tuple[np.ndarray, AmbientMetric]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DescriptorError(f"cannot read point file: {exc.strerror}", None, str(path)) from None
    return parse_csv(text, str(path))


def parse_csv(text: str, path: str | None = None) -> tuple[np.ndarray, AmbientMetric]:
    dim, kind = None, "euclidean"
    keep = None
    rows = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = re.search(r"columns=(\S+)", line)
            if m:
                # only the coordinate columns x0, x1, ... are read back
                keep = [k for k, c in enumerate(m.group(1).split(",")) if re.fullmatch(r"x\d+", c)]
                continue
            for key, val in re.findall(r"(\w+)=(\w+)", line):
                if key == "dim":
                    dim = int(val)
                elif key == "metric":
                    if val not in METRIC_KINDS:
                        raise DescriptorError(f"unknown metric {val!r}", n, path)
                    kind = val
            continue
        cells = line.split(",")
        if keep is not None:
            cells = [cells[k] for k in keep if k < len(cells)]
        try:
            row = [float(v) for v in cells]
        except ValueError:
            raise DescriptorError(f"non-numeric row {line!r}", n, path) from None
        if not all(math.isfinite(v) for v in row):
            raise DescriptorError("non-finite coordinate", n, path)
        if rows and len(row) != len(rows[0]):
            raise DescriptorError("ragged row", n, path)
        rows.append(row)
    if not rows:
        raise DescriptorError("no points", None, path)
    pts = np.array(rows)
    q = pts.shape[1] if kind == "euclidean" else pts.shape[1] - 1
    if dim is not None and dim != q:
        raise DescriptorError(f"header says dim={dim} but rows describe dimension {q}", 1, path)
    return pts, AmbientMetric(kind, q)


def format_csv(points: np.ndarray, metric: AmbientMetric, extra: dict[str, np.ndarray] | None = None) -> str:
    buf = io.StringIO()
    cols = [f"x{k}" for k in range(points.shape[1])]
    extra = extra or {}
    buf.write(f"# dim={metric.dim} metric={metric.kind}\n")
    if extra:
        buf.write("# columns=" + ",".join(cols + list(extra)) + "\n")
    for i, p in enumerate(points):
        cells = [repr(float(v)) for v in p] + [_cell(extra[k][i]) for k in extra]
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "inf" if np.isinf(v) else ("nan" if np.isnan(v) else repr(float(v)))
    return str(v)


# --------------------------------------------------------------------------
# corpus


def parse_corpus(text: str, path: str | None = None, base: Path | None = None):
    """Returns ``(cases, inversion_descriptors)``."""
    from .verify import LOCI, CorpusCase

    src = _Source(text, path)
    base = base or Path(".")
    cases, inversion = [], []
    for section in src.parser.sections():
        kind, _, name = section.partition(" ")
        sec = src.parser[section]
        if kind == "case":
            if "descriptor" not in sec:
                raise src.error("missing key 'descriptor'", section)
            d = _load_relative(src, section, base, sec["descriptor"])
            locus = sec.get("locus", "global").strip()
            if locus not in LOCI:
                raise src.error(f"unknown locus {locus!r}", section, "locus")
            expected = sec.get("expected", "").strip()
            if expected not in ("LNE", "NOT_LNE"):
                raise src.error("expected must be LNE or NOT_LNE", section, "expected")
            bound = src.number(section, "bound") if "bound" in sec else None
            anchor = tuple(src.vector(section, "anchor")) if "anchor" in sec else None
            try:
                cases.append(CorpusCase(name.strip(), d, locus, expected, bound, sec.get("note", "").strip(),
                                        anchor))
            except ValueError as exc:
                raise src.error(str(exc), section) from None
        elif kind == "inversion":
            for item in sec.get("descriptors", "").split(","):
                if item.strip():
                    inversion.append(_load_relative(src, section, base, item.strip()))
        else:
            raise src.error(f"unknown section [{section}]", section)
    return cases, inversion


def _load_relative(src: _Source, section: str, base: Path, name: str) -> SetDescriptor:
    file = Path(name)
    if not file.is_absolute():
        file = base / file
    if not file.exists():
        raise src.error(f"descriptor file {name!r} not found", section, "descriptor")
    return load_descriptor(file)


def load_corpus(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DescriptorError(f"cannot read corpus: {exc.strerror}", None, str(path)) from None
    return parse_corpus(text, str(path), path.parent)


def data_path(name: str = "") -> Path:
    return Path(__file__).parent / "data" / name


# --------------------------------------------------------------------------
# config and JSON


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DescriptorError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DescriptorError("expected key = value", n, str(path))
        key, val = (s.strip() for s in line.split("=", 1))
        if not key:
            raise DescriptorError("empty key", n, str(path))
        out[key.replace("-", "_")] = val
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, non-finite numbers as strings."""
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"
