import csv
import statistics
from dataclasses import replace

import pytest

from helpers import tiny_config
from slicerlp import bench
from slicerlp.bench import (SKIPPED, SuiteConfig, read_rows, run_algorithm, run_suite,
                            summarize, summary_path)
from slicerlp.generator import GeneratorConfig, generate_instance
from slicerlp.oracle import OracleLimits
from slicerlp.report import CSV_COLUMNS, ERROR, FEASIBLE


def tiny_suite(**kw) -> SuiteConfig:
    return SuiteConfig(generator=tiny_config(5, 2), service_counts=(1, 2), instances=5, **kw)


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("suite") / "rows.csv"
    return out, run_suite(tiny_suite(), ["lpdrr", "exact"], out)


def test_heuristic_never_beats_exact_feasibility(tiny_run):
    _, res = tiny_run
    assert len(res.instances) == 10
    by = {a: {i for (i, name), r in res.reports.items() if name == a and r.status == FEASIBLE}
          for a in ("lpdrr", "exact")}
    assert by["lpdrr"] <= by["exact"]
    for inst_id in by["lpdrr"]:
        assert res.reports[(inst_id, "exact")].objective <= res.reports[(inst_id, "lpdrr")].objective + 1e-6
    assert res.check_failures == []


def test_rows_ordered_and_columns_fixed(tiny_run):
    out, res = tiny_run
    with open(out, newline="") as fh:
        header = next(csv.reader(fh))
    assert tuple(header) == CSV_COLUMNS
    rows = read_rows(out)
    keys = [(r["instance"], r["algorithm"]) for r in rows]
    assert keys == sorted(keys)
    assert len(rows) == 20
    assert {r["instance"] for r in rows} == {f"K{n:02d}-{i:03d}" for n in (1, 2) for i in range(5)}


def test_summary_recomputed_independently(tiny_run):
    out, _ = tiny_run
    rows = read_rows(out)
    with open(summary_path(out), newline="") as fh:
        summary = {(int(r["num_services"]), r["algorithm"]): r for r in csv.DictReader(fh)}
    for n in (1, 2):
        group = [r for r in rows if int(r["num_services"]) == n]
        ok = {a: {r["instance"] for r in group if r["algorithm"] == a and r["status"] == "Feasible"}
              for a in ("lpdrr", "exact")}
        common = ok["lpdrr"] & ok["exact"]
        for a in ("lpdrr", "exact"):
            got = summary[(n, a)]
            assert int(got["feasible"]) == len(ok[a])
            assert int(got["common_feasible"]) == len(common)
            if common:
                acts = [int(r["activated_nodes"]) for r in group
                        if r["algorithm"] == a and r["instance"] in common]
                assert float(got["mean_activated_common"]) == pytest.approx(statistics.mean(acts), rel=1e-5)
            times = [float(r["wall_time_ms"]) for r in group if r["algorithm"] == a]
            assert float(got["mean_wall_time_ms"]) == pytest.approx(statistics.mean(times), rel=1e-5)


def test_empty_algorithm_list(tmp_path):
    out = tmp_path / "empty.csv"
    res = run_suite(tiny_suite(), [], out)
    assert res.rows == []
    assert out.read_text().strip() == ",".join(CSV_COLUMNS)


def test_worker_count_does_not_change_results(tmp_path):
    cfg = replace(tiny_suite(), service_counts=(2,), instances=4)
    one = run_suite(cfg, ["lpdrr", "lpr"])
    two = run_suite(replace(cfg, workers=2), ["lpdrr", "lpr"])
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_time_ms"} for r in rows]
    assert strip(one.rows) == strip(two.rows)


def test_same_config_same_rows():
    cfg = replace(tiny_suite(), service_counts=(1,), instances=3)
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_time_ms"} for r in rows]
    assert strip(run_suite(cfg, ["lpsrr"]).rows) == strip(run_suite(cfg, ["lpsrr"]).rows)


def test_crash_becomes_error_row(monkeypatch):
    def boom(inst, **kw):
        raise RuntimeError("kaput")

    monkeypatch.setitem(bench.SOLVERS, "lpr", boom)
    res = run_suite(replace(tiny_suite(), service_counts=(1,), instances=2), ["lpr", "lpdrr"])
    errs = [r for r in res.rows if r["algorithm"] == "lpr"]
    assert [r["status"] for r in errs] == [ERROR, ERROR]
    assert "kaput" in res.reports[(errs[0]["instance"], "lpr")].failure
    assert all(r["status"] != ERROR for r in res.rows if r["algorithm"] == "lpdrr")


def test_oracle_refusal_is_skipped():
    inst = generate_instance(GeneratorConfig(num_services=4, seed=0))
    rep = run_algorithm("exact", inst, OracleLimits(max_placements=1000))
    assert rep.status == SKIPPED


def test_algorithm_names_are_normalized():
    assert bench.normalize_algorithm("LPRR_LP1") == "lprr-lp1"
    with pytest.raises(ValueError):
        bench.normalize_algorithm("greedy")


def test_summary_of_no_rows():
    assert summarize([]) == []


def test_suite_config_from_yaml(tmp_path):
    path = tmp_path / "suite.yaml"
    path.write_text("generator:\n  seed: 4\n  grid_rows: 3\nservice_counts: [2, 3]\n"
                    "instances: 7\noracle:\n  max_placements: 50\n")
    cfg = SuiteConfig.load(path)
    assert cfg.generator.seed == 4 and cfg.generator.grid_rows == 3
    assert cfg.service_counts == (2, 3) and cfg.instances == 7
    assert cfg.oracle.max_placements == 50
