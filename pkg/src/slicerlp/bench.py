"""Experiment runner: generated suites, every algorithm per instance, CSV output."""
from __future__ import annotations

import csv
import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable

import yaml

from . import baselines, lpdrr
from .generator import GeneratorConfig, generate_instance
from .model import Instance
from .oracle import OracleLimitError, OracleLimits, solve_exact
from .report import CSV_COLUMNS, ERROR, FEASIBLE, SolveReport
from .verify import check_report

log = logging.getLogger(__name__)

SKIPPED = "Skipped"  # exact oracle refused: instance over its limits

SUMMARY_COLUMNS = (
    "num_services",
    "algorithm",
    "instances",
    "feasible",
    "common_feasible",
    "mean_activated_common",
    "mean_delay_common",
    "mean_wall_time_ms",
)


SOLVERS: dict[str, Callable[..., SolveReport]] = {
    "lpdrr": lpdrr.solve,
    "lpsrr": baselines.lpsrr_round,
    "lpr": baselines.lpr_round,
    "lprr-lp1": baselines.lprr_lp1,
}
ALGORITHMS = (*SOLVERS, "exact")


def normalize_algorithm(name: str) -> str:
    key = name.strip().lower().replace("_", "-")
    if key not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}")
    return key


def run_algorithm(name: str, inst: Instance, limits: OracleLimits | None = None,
                  rho: float = lpdrr.RHO, iter_max: int = lpdrr.ITER_MAX) -> SolveReport:
    """Run one algorithm; oracle refusals become Skipped, other crashes Error."""
    name = normalize_algorithm(name)
    limits = limits or OracleLimits()
    try:
        if name == "exact":
            return solve_exact(inst, limits)
        return SOLVERS[name](inst, rho=rho, iter_max=iter_max)
    except OracleLimitError as exc:
        return SolveReport(name, SKIPPED, failure=str(exc))
    except Exception as exc:  # one bad row must not stop the suite
        log.error("%s failed: %s", name, traceback.format_exc())
        return SolveReport(name, ERROR, failure=f"{type(exc).__name__}: {exc}")


@dataclass
class SuiteConfig:
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    service_counts: tuple = (1, 2, 3, 4, 5)
    instances: int = 20  # per service count
    workers: int = 1
    oracle: OracleLimits = field(default_factory=OracleLimits)
    rho: float = lpdrr.RHO
    iter_max: int = lpdrr.ITER_MAX

    @classmethod
    def from_dict(cls, doc: dict) -> "SuiteConfig":
        doc = dict(doc or {})
        gen = GeneratorConfig.from_dict(doc.pop("generator", {}) or {})
        oracle = OracleLimits(**(doc.pop("oracle", {}) or {}))
        if "service_counts" in doc:
            doc["service_counts"] = tuple(doc["service_counts"])
        return cls(generator=gen, oracle=oracle, **doc)

    @classmethod
    def load(cls, path) -> "SuiteConfig":
        return cls.from_dict(yaml.safe_load(Path(path).read_text()))


@dataclass
class SuiteResult:
    rows: list[dict]
    reports: dict  # (instance id, algorithm) -> SolveReport
    instances: dict  # instance id -> Instance
    check_failures: list  # (instance id, algorithm, violations)


def suite_instances(cfg: SuiteConfig) -> Iterable[tuple[str, int, Instance]]:
    for n in cfg.service_counts:
        gen = replace(cfg.generator, num_services=n)
        for i in range(cfg.instances):
            yield f"K{n:02d}-{i:03d}", gen.seed, generate_instance(gen, i)


def _run_instance(args):
    inst_id, inst, algorithms, limits, rho, iter_max = args
    out = []
    for name in algorithms:
        rep = run_algorithm(name, inst, limits, rho, iter_max)
        bad = check_report(inst, rep) if rep.status == FEASIBLE else []
        out.append((name, rep, bad))
    return inst_id, out


def run_suite(cfg: SuiteConfig, algorithms: Iterable[str], out=None) -> SuiteResult:
    """Run every algorithm on every suite instance; write the CSV and its summary.

    Rows are ordered by (instance, algorithm) regardless of worker count.
    """
    algorithms = sorted({normalize_algorithm(a) for a in algorithms})
    instances = {}
    jobs = []
    for inst_id, seed, inst in suite_instances(cfg):
        instances[inst_id] = (seed, inst)
        jobs.append((inst_id, inst, algorithms, cfg.oracle, cfg.rho, cfg.iter_max))
    if not algorithms:
        jobs = []
    if cfg.workers > 1 and jobs:
        with ProcessPoolExecutor(cfg.workers) as pool:
            done = list(pool.map(_run_instance, jobs))
    else:
        done = [_run_instance(job) for job in jobs]

    rows, reports, failures = [], {}, []
    for inst_id, results in sorted(done, key=lambda r: r[0]):
        seed, inst = instances[inst_id]
        for name, rep, bad in results:
            reports[(inst_id, name)] = rep
            rows.append(rep.row(inst_id, len(inst.services), seed))
            if bad:
                log.error("%s/%s failed verification: %s", inst_id, name, bad[:3])
                failures.append((inst_id, name, bad))
    if out is not None:
        write_rows(rows, out)
        write_summary(summarize(rows), summary_path(out))
    return SuiteResult(rows, reports, {k: v[1] for k, v in instances.items()}, failures)


def write_rows(rows: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)


def read_rows(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def summary_path(path) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}_summary{path.suffix or '.csv'}")


def _mean(xs: list) -> float:
    return sum(xs) / len(xs) if xs else math.nan


def summarize(rows: list[dict]) -> list[dict]:
    """Per (service count, algorithm) aggregates.

    Activated-node and delay means are taken over the instances of that
    service count on which every algorithm in the suite was feasible.
    """
    by_group: dict = {}
    for r in rows:
        by_group.setdefault(int(r["num_services"]), []).append(r)
    out = []
    for n in sorted(by_group):
        group = by_group[n]
        algos = sorted({r["algorithm"] for r in group})
        feasible = {a: {r["instance"] for r in group if r["algorithm"] == a and r["status"] == FEASIBLE}
                    for a in algos}
        common = set.intersection(*feasible.values()) if feasible else set()
        for a in algos:
            mine = [r for r in group if r["algorithm"] == a]
            shared = [r for r in mine if r["instance"] in common]
            out.append({
                "num_services": n,
                "algorithm": a,
                "instances": len(mine),
                "feasible": len(feasible[a]),
                "common_feasible": len(common),
                "mean_activated_common": _fmt(_mean([float(r["activated_nodes"]) for r in shared])),
                "mean_delay_common": _fmt(_mean([float(r["total_delay"]) for r in shared])),
                "mean_wall_time_ms": _fmt(_mean([float(r["wall_time_ms"]) for r in mine])),
            })
    return out


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else f"{x:.6g}"


def write_summary(summary: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        writer.writerows(summary)
