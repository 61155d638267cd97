"""Command-line front end.

Exit codes: 0 success, 1 domain error, 2 input/output error (including
malformed JSON), 3 a probe returned a "violated" verdict.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from reachlab.barycenter import METHODS, ProjectConfig, project
from reachlab.diagrams import bottleneck, embed, midpoint_diagram, wasserstein_diagram
from reachlab.errors import DomainError, InputError
from reachlab.orlicz import orlicz_distance_dirac, orlicz_project_two_point
from reachlab.probes import PROBES, run_probe
from reachlab.report import ProbeReport, Verdict
from reachlab.serialize import (
    diagram_from_json,
    dumps,
    embedding_from_json,
    gauge_from_json,
    loads,
    measure_from_json,
    read_json,
    space_from_json,
    write_text,
)
from reachlab.transport import DiscreteMeasure, wasserstein_p

EXIT_OK, EXIT_DOMAIN, EXIT_IO, EXIT_VIOLATED = 0, 1, 2, 3
SEED_ENV = "REACHLAB_SEED"


def _json_arg(text: str, what: str) -> Any:
    """A file path, or an inline JSON literal (anything starting with {, [, a quote, a digit or a sign)."""
    stripped = text.strip()
    if stripped[:1] in "{[\"-+.0123456789" or stripped in ("true", "false", "null"):
        return loads(stripped, f"<{what}>")
    return read_json(text)


def _space(args):
    if args.space is None:
        raise DomainError("--space is required")
    return space_from_json(_json_arg(args.space, "space"))


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise DomainError(f"{SEED_ENV} must be an integer, got {raw!r}") from exc


def _emit(args, payload: Any) -> None:
    text = dumps(payload)
    if getattr(args, "out", None):
        write_text(args.out, text)
    else:
        sys.stdout.write(text)


def _measure(args, attr: str, space=None) -> DiscreteMeasure:
    raw = getattr(args, attr)
    if raw is None:
        raise DomainError(f"--{attr} is required")
    return measure_from_json(_json_arg(raw, attr), space)


# --- subcommands ------------------------------------------------------------------------


def cmd_distance(args) -> int:
    space = _space(args) if args.space else None
    mu = _measure(args, "mu", space)
    nu = _measure(args, "nu", space or mu.space)
    value, plan = wasserstein_p(mu, nu, args.p)
    _emit(
        args,
        {
            "value": value,
            "p": args.p,
            "plan": plan.matrix.tolist(),
            "certificate": plan.certificate,
        },
    )
    return EXIT_OK


def cmd_barycenter(args) -> int:
    space = _space(args) if args.space else None
    mu = _measure(args, "mu", space)
    cfg = ProjectConfig(force_method=args.method, tol_mult=args.tol, cluster_sep=args.cluster_sep)
    _emit(args, project(mu, args.p, cfg).to_dict())
    return EXIT_OK


def cmd_orlicz(args) -> int:
    space = _space(args)
    gauge = gauge_from_json(_json_arg(args.gauge, "gauge"))
    x = space.point_from_json(_json_arg(args.x, "x"))
    if args.mu is not None:
        mu = _measure(args, "mu", space)
        _emit(args, {"value": orlicz_distance_dirac(x, mu, gauge), "gauge": gauge.descriptor()})
        return EXIT_OK
    if args.y is None or args.lam is None:
        raise DomainError("orlicz needs either --mu, or --y together with --lambda")
    y = space.point_from_json(_json_arg(args.y, "y"))
    res = orlicz_project_two_point(x, y, args.lam, gauge, space, rng_seed=args.seed)
    _emit(args, res.to_dict())
    return EXIT_OK


def cmd_dgm_bottleneck(args) -> int:
    D1 = diagram_from_json(_json_arg(args.d1, "d1"))
    D2 = diagram_from_json(_json_arg(args.d2, "d2"))
    if args.p is None:
        value, m = bottleneck(D1, D2)
    else:
        value, m = wasserstein_diagram(D1, D2, args.p)
    _emit(args, {"value": value, "matching": m.to_json()})
    return EXIT_OK


def cmd_dgm_embed(args) -> int:
    space = _space(args)
    spec = embedding_from_json(_json_arg(args.embedding, "embedding"), space)
    x = space.point_from_json(_json_arg(args.x, "x"))
    if args.y is None:
        D = embed(x, spec)
    else:
        D = midpoint_diagram(x, space.point_from_json(_json_arg(args.y, "y")), spec)
    _emit(args, D.to_json())
    return EXIT_OK


def _probe_params(args, space) -> dict:
    q: dict = {}
    for name in ("x", "y"):
        raw = getattr(args, name)
        if raw is not None:
            q[name] = _json_arg(raw, name)
    if args.eps is not None:
        q["eps_list"] = args.eps
    if args.lambdas is not None:
        q["lambda_grid"] = args.lambdas
    if args.t is not None:
        q["t_grid"] = args.t
    if args.p is not None:
        q["p"] = args.p
    if args.gauge is not None:
        q["gauge"] = _json_arg(args.gauge, "gauge")
    if args.mu is not None:
        q["mu"] = _json_arg(args.mu, "mu")
    if args.embedding is not None:
        q["embedding"] = _json_arg(args.embedding, "embedding")
    if args.n is not None:
        q["n_measures" if args.name == "unique-barycenters" else "n_triples" if args.name == "convexity" else "n_samples"] = args.n
    if args.r is not None:
        q["r"] = args.r
    q["rng_seed"] = args.seed
    return q


def _report_csv(reports: Sequence[ProbeReport]) -> str:
    from reachlab.suite import aggregate_csv

    return aggregate_csv(list(reports))


def cmd_probe(args) -> int:
    space = _space(args)
    report = run_probe(args.name, space, _probe_params(args, space))
    if args.format == "csv":
        text = _report_csv([report])
        if args.out:
            write_text(args.out, text)
        else:
            sys.stdout.write(text)
    else:
        _emit(args, report.to_dict())
    return EXIT_VIOLATED if report.verdict is Verdict.VIOLATED else EXIT_OK


def cmd_probe_suite(args) -> int:
    from reachlab.suite import CRITERIA, run_suite

    only = args.only or None
    if only:
        unknown = [k for k in only if k not in CRITERIA]
        if unknown:
            raise DomainError(f"unknown criteria {unknown}; choose from {list(CRITERIA)}")
    if args.workers < 1:
        raise DomainError("--workers must be at least 1")
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create {out}: {exc.strerror or exc}") from exc
    reports = run_suite(args.seed, args.workers, only)
    for r in reports:
        write_text(out / f"{r.name}.json", dumps(r.to_dict()))
    write_text(out / "summary.csv", _report_csv(reports))
    for r in reports:
        sys.stdout.write(f"{r.name}: {r.verdict.value}\n")
    return EXIT_VIOLATED if any(r.verdict is Verdict.VIOLATED for r in reports) else EXIT_OK


# --- parser -----------------------------------------------------------------------------


def _positive(kind):
    def parse(text):
        v = kind(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v

    return parse


def _p_value(text):
    v = float(text)
    if not v >= 1:
        raise argparse.ArgumentTypeError(f"p must be >= 1, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="reachlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    seed = _default_seed()

    def common(p, space=True):
        if space:
            p.add_argument("--space", help="space descriptor file or inline JSON")
        p.add_argument("--out", help="write the result here instead of stdout")
        return p

    p = common(sub.add_parser("distance", help="exact W_p between two measures"))
    p.add_argument("--mu", required=True)
    p.add_argument("--nu", required=True)
    p.add_argument("--p", type=_p_value, default=2.0)
    p.set_defaults(func=cmd_distance)

    p = common(sub.add_parser("barycenter", help="all barycenters of a measure"))
    p.add_argument("--mu", required=True)
    p.add_argument("--p", type=_p_value, default=2.0)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--tol", type=_positive(float), default=1e-7)
    p.add_argument("--cluster-sep", type=_positive(float), default=1e-4)
    p.set_defaults(func=cmd_barycenter)

    p = common(sub.add_parser("orlicz", help="Orlicz-Wasserstein distance or two-point projection"))
    p.add_argument("--gauge", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--mu")
    p.add_argument("--y")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--seed", type=int, default=seed)
    p.set_defaults(func=cmd_orlicz)

    p = common(sub.add_parser("dgm-bottleneck", help="bottleneck (or --p Wasserstein) diagram distance"), space=False)
    p.add_argument("--d1", required=True)
    p.add_argument("--d2", required=True)
    p.add_argument("--p", type=_p_value)
    p.set_defaults(func=cmd_dgm_bottleneck)

    p = common(sub.add_parser("dgm-embed", help="diagram of a point, or midpoint diagram with --y"))
    p.add_argument("--embedding", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y")
    p.set_defaults(func=cmd_dgm_embed)

    p = common(sub.add_parser("probe", help="run one reach probe"))
    p.add_argument("--name", required=True, choices=list(PROBES))
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--eps", type=_positive(float), nargs="+")
    p.add_argument("--lambdas", type=float, nargs="+")
    p.add_argument("--t", type=float, nargs="+")
    p.add_argument("--p", type=_p_value)
    p.add_argument("--gauge")
    p.add_argument("--mu")
    p.add_argument("--embedding")
    p.add_argument("--n", type=_positive(int))
    p.add_argument("--r", type=_positive(float))
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("probe-suite", help="run the acceptance battery")
    p.add_argument("--out-dir", default="reachlab-suite")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--only", nargs="+", help="criterion numbers to run")
    p.set_defaults(func=cmd_probe_suite)
    return ap


def run(argv: Sequence[str] | None = None) -> int:
    try:
        parser = build_parser()
    except DomainError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DOMAIN
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InputError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_IO
    except DomainError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DOMAIN


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
