"""hajlasz-lab command line: generate spaces, measure them, run the pipelines.

Every command writes one JSON report (stdout unless --json is given) that
embeds the parsed configuration, its sha256 and the space content hash, so
the same invocation always produces byte-identical output.

Exit codes: 0 success, 2 invalid input or parameters, 3 a verified mass
bound failed (an implementation bug on valid input).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import re
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import corpus
from .constructions import bump, construction1, construction2
from .embeddings import KINDS, InequalityCase, chaining_trace, estimate_constant, to_json
from .errors import ConstructionImpossible, LabError, ValidationError, VerificationFailed
from .extraction import CASES, PipelineParams, candidate_balls, pipeline_verify
from .geometry import analyze, auto_resolution, lower_mass_constant
from .hajlasz import minimal_gradient
from .mmspace import Ball, MetricMeasureSpace, load_space, save_space

log = logging.getLogger("hajlasz_lab")

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 2, 3
_CALL = re.compile(r"^\s*([a-z_]+)\((.*)\)\s*$")


def space_from_name(text: str) -> MetricMeasureSpace:
    """Rebuild a corpus space from its generator name, e.g. ``snowflake(cantor(5),0.7)``."""
    m = _CALL.match(text)
    if not m:
        raise ValidationError(f"not a generator expression: {text!r}")
    name, args = m.groups()
    if name == "snowflake":
        inner, alpha = args.rsplit(",", 1)
        return corpus.snowflake(space_from_name(inner), float(alpha))
    parts = [a.strip() for a in args.split(",")]
    try:
        if name == "grid":
            return corpus.grid(int(parts[0]), int(parts[1]))
        if name == "cantor":
            return corpus.cantor(int(parts[0]))
        if name == "vanishing_density":
            return corpus.vanishing_density(int(parts[0]), float(parts[1]))
        if name == "random_space":
            return corpus.random_space(int(parts[0]), int(parts[1]))
    except (IndexError, ValueError) as exc:
        raise ValidationError(f"bad arguments in {text!r}: {exc}") from exc
    raise ValidationError(f"unknown generator {name!r}")


def open_space(source: str) -> MetricMeasureSpace:
    if Path(source).exists():
        try:
            return load_space(source)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{source}: not valid JSON ({exc})") from exc
    return space_from_name(source)


def _resolution(text: str, space: MetricMeasureSpace) -> float:
    return auto_resolution(space) if text == "auto" else float(text)


def _floats(text: str) -> np.ndarray:
    return np.array([float(t) for t in text.split(",")], dtype=float)


# ------------------------------------------------------------------ commands


def cmd_gen(args) -> tuple[Any, MetricMeasureSpace]:
    if args.grid:
        space = corpus.grid(*args.grid)
    elif args.cantor is not None:
        space = corpus.cantor(args.cantor)
    elif args.vanishing:
        space = corpus.vanishing_density(int(args.vanishing[0]), args.vanishing[1])
    elif args.random:
        space = corpus.random_space(*args.random)
    else:
        space = open_space(args.base)
    if args.snowflake is not None:
        space = corpus.snowflake(space, args.snowflake)
    if args.out:
        save_space(space, args.out)
        return {"name": space.name, "points": space.n, "path": args.out}, space
    return space.to_dict(), space


def cmd_analyze(args):
    space = open_space(args.space)
    return analyze(space, args.s, _resolution(args.resolution, space)), space


def cmd_gradient(args):
    space = open_space(args.space)
    if args.u is not None:
        u = _floats(args.u)
    else:
        u, _ = bump(space, args.bump_center, 0.0, args.bump_radius)
    if len(u) != space.n:
        raise ValidationError(f"u has {len(u)} values, space has {space.n} points")
    return minimal_gradient(space, u, args.p, method=args.method), space


def cmd_constants(args):
    space = open_space(args.space)
    p = args.p if args.p is not None else args.s / 2
    case = InequalityCase(args.kind, args.s, p, args.sigma, args.C1, args.gamma)
    res = _resolution(args.resolution, space)
    balls = candidate_balls(space, res)

    def family(ball: Ball):
        try:
            if args.family == "c2":
                fam = construction2(space, ball, args.lam, args.j_max)
            else:
                fam = construction1(space, ball, args.j_max)
        except ConstructionImpossible:
            return []
        return [(m.u, m.g) for m in fam.members]

    return estimate_constant(space, case, family, balls), space


def _pipeline_params(args) -> PipelineParams:
    res = None if args.resolution == "auto" else float(args.resolution)
    return PipelineParams(s=args.s, p=args.p, sigma=args.sigma, resolution=res, C1=args.C1,
                          gamma=args.gamma, beta=args.beta, j_max=args.j_max, lam=args.lam)


def cmd_extract(args):
    space = open_space(args.space)
    return pipeline_verify(space, args.case, _pipeline_params(args), strict=True), space


def cmd_verify(args):
    """Every pipeline case plus the cross-check against the exact lower mass constant."""
    space = open_space(args.space)
    params = _pipeline_params(args)
    cases = args.cases.split(",") if args.cases else list(CASES)
    summary: dict[str, Any] = {}
    failed = []
    for case in cases:
        rep = pipeline_verify(space, case, params, strict=False)
        summary[case] = {k: v for k, v in rep.to_dict().items() if k not in ("rows", "skipped")}
        if not rep.verdict:
            failed.append(case)
    res = params.resolution if params.resolution is not None else auto_resolution(space)
    kappa, witness = lower_mass_constant(space, args.s, res)
    summary["lower_mass_constant"] = {"kappa": kappa, "witness": witness.to_dict()}
    if failed:
        raise VerificationFailed(f"cases failed: {', '.join(failed)}", {"cases": failed, "summary": summary})
    return summary, space


def cmd_trace(args):
    space = open_space(args.space)
    B0 = Ball(args.center, args.radius)
    if args.b is not None:
        b = args.b
    else:
        kappa, _ = lower_mass_constant(space, args.s, space.min_distance)
        b = kappa * args.sigma ** -args.s
    u, g = bump(space, args.bump_center, 0.0, args.bump_radius)
    return chaining_trace(space, B0, args.sigma, args.s, args.p, b, u, g), space


# ------------------------------------------------------------------ parser


def _add_space(sp):
    sp.add_argument("space", help="JSON space file or generator expression such as 'cantor(5)'")


def _add_pipeline(sp, with_case: bool):
    _add_space(sp)
    if with_case:
        sp.add_argument("--case", required=True, choices=CASES)
    else:
        sp.add_argument("--cases", help="comma separated subset of cases (default: all)")
    sp.add_argument("--s", type=float, required=True)
    sp.add_argument("--p", type=float, help="default depends on the case")
    sp.add_argument("--sigma", type=float, default=2.0)
    sp.add_argument("--C1", type=float, default=1.0)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--beta", type=float, default=2.0)
    sp.add_argument("--lam", type=float, help="override the measured uniform perfectness constant")
    sp.add_argument("--resolution", default="auto")
    sp.add_argument("--j-max", type=int, default=64)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hajlasz-lab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log skipped balls and solver details")
    sub = ap.add_subparsers(dest="command", required=True)

    def output(sp, csv: bool = False):
        sp.add_argument("--json", dest="json_out", help="write the report here instead of stdout")
        if csv:
            sp.add_argument("--csv", dest="csv_out", help="also write the per-ball table as CSV")

    sp = sub.add_parser("gen", help="generate a corpus space")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--grid", nargs=2, type=int, metavar=("DIM", "N"))
    src.add_argument("--cantor", type=int, metavar="LEVEL")
    src.add_argument("--vanishing", nargs=2, type=float, metavar=("N", "BETA"))
    src.add_argument("--random", nargs=2, type=int, metavar=("N", "SEED"))
    src.add_argument("--base", help="existing space file or generator expression")
    sp.add_argument("--snowflake", type=float, metavar="ALPHA", help="apply d -> d^alpha afterwards")
    sp.add_argument("--out", help="write the space JSON here")
    sp.set_defaults(run=cmd_gen, json_out=None)

    sp = sub.add_parser("analyze", help="geometric constants of a space")
    _add_space(sp)
    sp.add_argument("--s", type=float, required=True)
    sp.add_argument("--resolution", default="auto")
    output(sp)
    sp.set_defaults(run=cmd_analyze)

    sp = sub.add_parser("gradient", help="minimal generalized gradient of a function")
    _add_space(sp)
    sp.add_argument("--p", type=float, required=True)
    grp = sp.add_mutually_exclusive_group(required=True)
    grp.add_argument("--u", help="comma separated values, one per point")
    grp.add_argument("--bump-center", type=int)
    sp.add_argument("--bump-radius", type=float, default=0.5)
    sp.add_argument("--method", choices=("exact-lp", "convex-descent", "vertex-enumeration", "heuristic"))
    output(sp)
    sp.set_defaults(run=cmd_gradient)

    sp = sub.add_parser("constants", help="empirical embedding constant over construction families")
    _add_space(sp)
    sp.add_argument("--kind", choices=KINDS, default="sobolev")
    sp.add_argument("--s", type=float, required=True)
    sp.add_argument("--p", type=float)
    sp.add_argument("--sigma", type=float, default=2.0)
    sp.add_argument("--C1", type=float, default=1.0)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--family", choices=("c1", "c2"), default="c1")
    sp.add_argument("--lam", type=float, default=0.19)
    sp.add_argument("--resolution", default="auto")
    sp.add_argument("--j-max", type=int, default=64)
    output(sp, csv=True)
    sp.set_defaults(run=cmd_constants)

    sp = sub.add_parser("extract", help="run one reverse-direction pipeline")
    _add_pipeline(sp, with_case=True)
    output(sp, csv=True)
    sp.set_defaults(run=cmd_extract)

    sp = sub.add_parser("verify", help="run every pipeline case and summarize")
    _add_pipeline(sp, with_case=False)
    output(sp)
    sp.set_defaults(run=cmd_verify)

    sp = sub.add_parser("trace", help="log the chaining argument for one bump")
    _add_space(sp)
    sp.add_argument("--center", type=int, required=True)
    sp.add_argument("--radius", type=float, required=True)
    sp.add_argument("--sigma", type=float, default=5.0)
    sp.add_argument("--s", type=float, required=True)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--b", type=float, help="default: measured lower mass constant over sigma^s")
    sp.add_argument("--bump-center", type=int, required=True)
    sp.add_argument("--bump-radius", type=float, required=True)
    output(sp)
    sp.set_defaults(run=cmd_trace)
    return ap


def config_of(args) -> dict[str, Any]:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("run", "json_out", "csv_out", "verbose")}


def config_hash(config: dict[str, Any]) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    config = config_of(args)
    envelope = {"command": args.command, "config": config, "config_hash": config_hash(config)}
    try:
        result, space = args.run(args)
    except VerificationFailed as exc:
        print(f"FAILED: {exc}", file=sys.stderr)
        report = getattr(exc, "report", None)
        envelope.update({"status": "failed", "witness": exc.witness,
                         "result": report.to_dict() if report is not None else None})
        _emit(to_json(envelope) + "\n", getattr(args, "json_out", None))
        return EXIT_FAILED
    except (LabError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    envelope.update({"status": "ok", "space": space.name, "space_hash": space.content_hash(),
                     "result": result.to_dict() if hasattr(result, "to_dict") else result})
    if args.command == "gen" and not args.out:
        _emit(json.dumps(result, sort_keys=True) + "\n", None)
        return EXIT_OK
    _emit(to_json(envelope) + "\n", args.json_out)
    csv_out = getattr(args, "csv_out", None)
    if csv_out and hasattr(result, "to_csv"):
        Path(csv_out).write_text(result.to_csv())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
