"""Command-line interface.

Exit codes: 0 success, 1 usage, 2 bad input, 3 inconclusive verdict,
4 corpus mismatch.  Human summaries go to stdout; machine output goes to
files under ``--out``.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis as an
from . import io as lio
from . import sets, verify
from .errors import DescriptorError, DimensionMismatch, DomainError, EvalError, LneError

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INCONCLUSIVE, EXIT_MISMATCH = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    budget: int = an.BUDGET
    eps: str = "auto"
    r0: float = an.R0_INF
    rungs: int = an.RUNGS_INF
    r0_point: float = an.R0_POINT
    rungs_point: int = an.RUNGS_POINT
    delta_bin: float = 2.0
    pair_budget: int = an.PAIR_BUDGET
    band: float = 0.05
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "eps":
                if value != "auto":
                    try:
                        ok = float(value) > 0
                    except ValueError:
                        ok = False
                    if not ok:
                        raise UsageError("eps must be 'auto' or a positive number")
                continue
            if f.name == "seed":
                if value < 0:
                    raise UsageError("seed must be nonnegative")
                continue
            if not value > 0:
                raise UsageError(f"{f.name} must be positive")
        if self.rungs < 4 or self.rungs_point < 4:
            raise UsageError("ladders need at least 4 rungs")
        if self.budget < 2:
            raise UsageError("budget must be at least 2")

    @property
    def eps_value(self) -> float | None:
        return None if self.eps == "auto" else float(self.eps)

    @property
    def ladder(self) -> list[float]:
        return an.dyadic(self.r0, self.rungs)

    @property
    def point_ladder(self) -> list[float]:
        return an.dyadic(self.r0_point, self.rungs_point, 0.5)

    @classmethod
    def build(cls, file_values: dict[str, str], overrides: dict) -> "RunConfig":
        kinds = {f.name: f.type for f in fields(cls)}
        values = {}
        for key, raw in file_values.items():
            if key not in kinds:
                raise UsageError(f"unknown config key {key!r}")
            values[key] = raw
        values.update({k: v for k, v in overrides.items() if v is not None and k in kinds})
        out = {}
        for key, raw in values.items():
            kind = kinds[key]
            try:
                if kind in ("int", int):
                    out[key] = int(float(raw))
                elif kind in ("float", float):
                    out[key] = float(raw)
                else:
                    out[key] = str(raw)
            except ValueError:
                raise UsageError(f"config value for {key!r} is not a number: {raw!r}") from None
        return cls(**out)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration")
    g.add_argument("--config", help="flat key = value file; flags override it")
    g.add_argument("--budget", type=int, help="sample size (default 5000)")
    g.add_argument("--eps", help="graph scale for point clouds, or 'auto'")
    g.add_argument("--r0", type=float, help="first radius of the ladder at infinity (default 16)")
    g.add_argument("--rungs", type=int, help="rungs of the ladder at infinity (default 4)")
    g.add_argument("--r0-point", type=float, help="first radius of the ladder at a point (default 0.5)")
    g.add_argument("--rungs-point", type=int, help="rungs of the ladder at a point (default 6)")
    g.add_argument("--delta-bin", type=float, help="angular bin for asymptotic directions, degrees (default 2)")
    g.add_argument("--pair-budget", type=int, help="pair evaluations per ratio sup (default 4e6)")
    g.add_argument("--seed", type=int, help="seed for randomized sampling (default 0)")
    g.add_argument("--threads", type=int, help="worker cap (default 1)")
    p.add_argument("--out", default=".", help="directory for output files (default .)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lnecheck", description="Inner/outer metric distortion and LNE checks.")
    parser.add_argument("--version", action="version", version=f"lnecheck {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sample", help="sample a descriptor to CSV")
    p.add_argument("descriptor")
    p.add_argument("--range", nargs=2, type=float, metavar=("RMIN", "RMAX"), default=None)
    p.add_argument("--center", default=None, help="densification center, e.g. 0,0")
    p.add_argument("-o", "--output", help="CSV path (default stdout)")
    _common(p)

    p = sub.add_parser("estimate", help="LNE verdict globally, at a point or at infinity")
    p.add_argument("input", help="descriptor file or CSV point cloud")
    loc = p.add_mutually_exclusive_group(required=True)
    loc.add_argument("--global", dest="locus", action="store_const", const="global")
    loc.add_argument("--at-point", dest="point", metavar="X0")
    loc.add_argument("--at-infinity", dest="locus", action="store_const", const="infinity")
    _common(p)

    p = sub.add_parser("compactify", help="compare verdicts in the plane and on the sphere")
    p.add_argument("descriptor")
    _common(p)

    p = sub.add_parser("invert", help="compare LNE at 0 with LNE at infinity of the inverted set")
    p.add_argument("descriptor")
    _common(p)

    p = sub.add_parser("links", help="link constants along the ladder at infinity")
    p.add_argument("descriptor")
    p.add_argument("--band", type=float, help="relative half-width of the link band (default 0.05)")
    _common(p)

    p = sub.add_parser("corpus", help="run the example corpus against its expected verdicts")
    p.add_argument("corpus", nargs="?", default=None, help="corpus file (default: bundled)")
    _common(p)
    return parser


def _config(args) -> RunConfig:
    file_values = lio.read_config(args.config) if getattr(args, "config", None) else {}
    overrides = {f.name: getattr(args, f.name, None) for f in fields(RunConfig)}
    return RunConfig.build(file_values, overrides)


def _point(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise UsageError(f"cannot read point {text!r}; expected comma-separated numbers") from None


def _load_input(path: str, cfg: RunConfig):
    if path.lower().endswith(".csv"):
        pts, metric = lio.read_csv(path)
        return sets.point_cloud(pts, Path(path).stem, metric)
    return lio.load_descriptor(path)


def _envelope(command: str, name: str, cfg: RunConfig, payload: dict) -> dict:
    return {"tool": "lnecheck", "version": __version__, "command": command, "input": name,
            "seed": cfg.seed, "config": asdict(cfg), **payload}


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text)


def _ladder_csv(ladder) -> str:
    lines = ["scale,K"]
    for s, k in ladder:
        lines.append(f"{s!r},{'inf' if not math.isfinite(k) else repr(float(k))}")
    return "\n".join(lines) + "\n"


def _summary(rep: an.LneReport) -> str:
    parts = [f"verdict: {rep.verdict}"]
    if rep.constant is not None:
        parts.append(f"K_est = {rep.constant:.6g} (lower estimate)")
    if rep.stage:
        parts.append(f"stage: {rep.stage}")
    if rep.reason:
        parts.append(rep.reason)
    return "; ".join(parts)


# --------------------------------------------------------------------------
# commands


def cmd_sample(args, cfg: RunConfig) -> int:
    d = _load_input(args.descriptor, cfg)
    rng = tuple(args.range) if args.range else (1e-3, 1e3)
    center = _point(args.center) if args.center else None
    s = sets.sample_descriptor(d, cfg.budget, rng, center=center, seed=cfg.seed)
    text = lio.format_csv(s.points, s.metric, {"label": s.labels, "param": s.params})
    if args.output:
        _write(Path(args.output), text)
        print(f"{len(s)} points written to {args.output}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _prepared(d, cfg: RunConfig, center=None, rng=None):
    """Implicit sets and clouds are sampled here so the seed applies."""
    if d.kind == sets.ARCS:
        return d
    return sets.sample_descriptor(d, cfg.budget, rng or (1e-3, 1e6), center=center, seed=cfg.seed)


def cmd_estimate(args, cfg: RunConfig) -> int:
    from .plotting import plot_ladder

    d = _load_input(args.input, cfg)
    eps = cfg.eps_value
    if args.point is not None:
        x0 = _point(args.point)
        if len(x0) != d.dim:
            raise DimensionMismatch(f"point has {len(x0)} coordinates, the set lives in dimension {d.dim}")
        rep = an.lne_at_point(_prepared(d, cfg, x0), x0, cfg.point_ladder, cfg.budget, eps, cfg.pair_budget,
                              cfg.threads)
        locus = "point"
    elif args.locus == "infinity":
        rep = an.lne_at_infinity(_prepared(d, cfg), cfg.ladder, cfg.budget, eps, cfg.pair_budget, cfg.threads)
        locus = "infinity"
    else:
        rep = an.glue_certify(_prepared(d, cfg), cfg.r0, cfg.budget, cfg.ladder, cfg.point_ladder, eps=eps,
                              delta_bin=math.radians(cfg.delta_bin), pair_budget=cfg.pair_budget,
                              threads=cfg.threads)
        locus = "global"
    out = _outdir(args)
    stem = f"{d.name}.{locus}"
    _write(out / f"{stem}.json", lio.dumps(_envelope("estimate", args.input, cfg, {"report": rep.to_dict()})))
    _write(out / f"{stem}.ladder.csv", _ladder_csv(rep.ladder))
    if rep.ladder:
        plot_ladder(rep.ladder, out / f"{stem}.ladder.svg", f"{d.name} ({locus})")
    print(f"{d.name} [{locus}] {_summary(rep)}")
    return EXIT_INCONCLUSIVE if rep.verdict == an.INCONCLUSIVE else EXIT_OK


def _equivalence_exit(rep: verify.EquivalenceReport) -> int:
    return EXIT_INCONCLUSIVE if rep.flagged else EXIT_OK


def cmd_compactify(args, cfg: RunConfig) -> int:
    from .plotting import plot_compactification

    d = _load_input(args.descriptor, cfg)
    if d.kind != sets.ARCS:
        raise DescriptorError("compactify needs an arc network descriptor", None, args.descriptor)
    rep = verify.verify_compactification(d, cfg.budget, cfg.r0, cfg.ladder, cfg.point_ladder,
                                         pair_budget=cfg.pair_budget, threads=cfg.threads)
    out = _outdir(args)
    _write(out / f"{d.name}.compactify.json",
           lio.dumps(_envelope("compactify", args.descriptor, cfg, {"report": rep.to_dict()})))
    s = sets.sample_descriptor(d, cfg.budget, (cfg.r0 / 16, 8 * cfg.ladder[-1]))
    plot_compactification(s.points, verify.to_sphere(s).points, out / f"{d.name}.compactify.svg", d.name)
    print(f"{d.name}: plane {rep.left.verdict}, sphere {rep.right.verdict}, agree = {rep.agree}")
    return _equivalence_exit(rep)


def cmd_invert(args, cfg: RunConfig) -> int:
    d = _load_input(args.descriptor, cfg)
    if d.kind != sets.ARCS:
        raise DescriptorError("invert needs an arc network descriptor", None, args.descriptor)
    rep = verify.verify_inversion(d, cfg.budget, cfg.point_ladder, cfg.pair_budget, cfg.threads)
    out = _outdir(args)
    _write(out / f"{d.name}.invert.json",
           lio.dumps(_envelope("invert", args.descriptor, cfg, {"report": rep.to_dict()})))
    print(f"{d.name}: at 0 {rep.left.verdict}, inverted at infinity {rep.right.verdict}, agree = {rep.agree}")
    return _equivalence_exit(rep)


def cmd_links(args, cfg: RunConfig) -> int:
    from .plotting import plot_links

    d = _load_input(args.descriptor, cfg)
    rep = verify.verify_link_criterion(d, cfg.ladder, cfg.band, cfg.budget, cfg.pair_budget, cfg.threads)
    out = _outdir(args)
    lines = ["radius,component,K,cross_component_infinite"]
    for r in rep.rungs:
        for k, K in enumerate(r.constants):
            lines.append(f"{r.radius!r},{k},{K!r},{int(r.cross_infinite)}")
    _write(out / f"{d.name}.links.csv", "\n".join(lines) + "\n")
    _write(out / f"{d.name}.links.json", lio.dumps(_envelope("links", args.descriptor, cfg, {"report": rep.to_dict()})))
    plot_links(rep.rungs, out / f"{d.name}.links.svg", d.name)
    for r in rep.rungs:
        flag = "  (components at infinite inner distance)" if r.cross_infinite else ""
        print(f"R = {r.radius:g}: " + ", ".join(f"{k:.4g}" for k in r.constants) + flag)
    print(f"links uniform: {rep.uniform}; at infinity: {rep.at_infinity.verdict}; consistent: {rep.consistent}")
    return EXIT_OK


def cmd_corpus(args, cfg: RunConfig) -> int:
    path = args.corpus or str(lio.data_path("corpus.ini"))
    cases, _ = lio.load_corpus(path)
    results = verify.run_corpus(cases, cfg.budget, cfg.threads)
    out = _outdir(args)
    shown = args.corpus or "bundled corpus"
    _write(out / "corpus.json", lio.dumps(_envelope("corpus", shown, cfg,
                                                    {"results": [r.to_dict() for r in results]})))
    width = max([len(r.name) for r in results] + [4])
    print(f"{'case':<{width}}  {'locus':<10}  {'expected':<8}  {'verdict':<12}  {'K_est':>9}  result")
    for r in results:
        k = "-" if r.constant is None else f"{r.constant:.4g}"
        print(f"{r.name:<{width}}  {r.locus:<10}  {r.expected:<8}  {r.verdict:<12}  {k:>9}  "
              f"{'pass' if r.passed else 'FAIL'}")
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} cases pass")
    return EXIT_MISMATCH if failed else EXIT_OK


COMMANDS = {"sample": cmd_sample, "estimate": cmd_estimate, "compactify": cmd_compactify,
            "invert": cmd_invert, "links": cmd_links, "corpus": cmd_corpus}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"lnecheck: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DescriptorError, EvalError, DimensionMismatch, DomainError) as exc:
        print(f"lnecheck: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except LneError as exc:
        print(f"lnecheck: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE


if __name__ == "__main__":
    sys.exit(main())
