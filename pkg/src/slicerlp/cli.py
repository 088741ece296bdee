"""Command line: ``slicerlp gen | solve | suite``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from . import __version__
from .bench import (ALGORITHMS, SuiteConfig, normalize_algorithm, run_algorithm, run_suite,
                    write_rows)
from .generator import GeneratorConfig, generate_instance
from .lp import BACKENDS, use_backend
from .model import InstanceFormatError, InvalidInstanceError, load_instance, save_instance
from .oracle import OracleLimits


def _gen(args) -> int:
    doc = yaml.safe_load(Path(args.config).read_text()) if args.config else {}
    doc = doc or {}
    count = int(doc.pop("count", 1))
    if "generator" in doc:  # a suite config works too
        doc = doc["generator"] or {}
    cfg = GeneratorConfig.from_dict(doc)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.services is not None:
        cfg = replace(cfg, num_services=args.services)
    count = args.count if args.count is not None else count
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        path = out / f"instance_s{cfg.seed}_k{cfg.num_services}_{i:03d}.json"
        save_instance(generate_instance(cfg, i), path)
        print(path)
    return 0


def _solve(args) -> int:
    inst = load_instance(args.instance)
    changes = {}
    if args.sigma is not None:
        changes["sigma"] = args.sigma
    if args.p is not None:
        changes["path_budget"] = args.p
    if changes:
        inst = inst.replace(**changes)
    report = run_algorithm(args.algo, inst, OracleLimits(), rho=args.rho, iter_max=args.itermax)
    row = report.row(Path(args.instance).stem, len(inst.services), "")
    if args.out:
        write_rows([row], args.out)
    line = f"{report.algorithm}: {report.status}"
    if report.feasible:
        line += (f", {report.activated_nodes} nodes, total delay {report.total_delay:g},"
                 f" objective {report.objective:.6g}, {report.lp_solves} LP solves")
        if report.paths_exceed_budget:
            line += f", {len(report.paths_exceed_budget)} segments use more than P paths"
    elif report.failure:
        line += f" ({report.failure})"
    print(line)
    return 0


def _suite(args) -> int:
    cfg = SuiteConfig.load(args.config) if args.config else SuiteConfig()
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    algos = [a for a in args.algos.split(",") if a.strip()] if args.algos else []
    result = run_suite(cfg, algos, args.out)
    print(f"{len(result.rows)} rows written to {args.out}")
    if result.check_failures:
        print(f"{len(result.check_failures)} feasible rows failed verification", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slicerlp", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--backend", choices=BACKENDS, default="highs", help="LP solver")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate random instances")
    gen.add_argument("--config", help="YAML generator options")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--services", type=int, help="override the service count")
    gen.add_argument("--count", type=int, help="number of instances (default 1)")
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=_gen)

    solve = sub.add_parser("solve", help="solve one instance file")
    solve.add_argument("--instance", required=True)
    solve.add_argument("--algo", default="lpdrr", type=normalize_algorithm,
                       help="|".join(ALGORITHMS))
    solve.add_argument("--sigma", type=float)
    solve.add_argument("--p", type=int, help="path budget P")
    solve.add_argument("--rho", type=float, default=5.0)
    solve.add_argument("--itermax", type=int, default=10)
    solve.add_argument("--out", help="CSV file for the result row")
    solve.set_defaults(func=_solve)

    suite = sub.add_parser("suite", help="run algorithms over a generated suite")
    suite.add_argument("--config", help="YAML suite options")
    suite.add_argument("--algos", default="lpdrr,lpsrr,lpr,lprr-lp1",
                       help="comma-separated list; empty for a header-only CSV")
    suite.add_argument("--workers", type=int)
    suite.add_argument("--out", required=True, help="CSV path; summary goes next to it")
    suite.set_defaults(func=_suite)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with use_backend(args.backend):
            return args.func(args)
    except (InstanceFormatError, InvalidInstanceError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
