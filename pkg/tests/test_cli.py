import csv
import json

import pytest

from slicerlp import __version__
from slicerlp.cli import main
from slicerlp.model import two_link_instance, load_instance, save_instance
from slicerlp.report import CSV_COLUMNS


def test_gen_writes_valid_instances(tmp_path, capsys):
    assert main(["gen", "--seed", "3", "--services", "2", "--count", "3", "--out", str(tmp_path)]) == 0
    files = sorted(tmp_path.glob("*.json"))
    assert len(files) == 3
    assert all(len(load_instance(f).services) == 2 for f in files)
    assert str(files[0]) in capsys.readouterr().out


def test_gen_from_yaml(tmp_path):
    cfg = tmp_path / "gen.yaml"
    cfg.write_text("grid_rows: 3\ngrid_cols: 3\nnum_cloud: 3\nnum_services: 1\ncount: 2\n")
    out = tmp_path / "out"
    assert main(["gen", "--config", str(cfg), "--out", str(out)]) == 0
    files = list(out.glob("*.json"))
    assert len(files) == 2
    assert len(load_instance(files[0]).network.nodes) == 9


def test_solve_writes_one_row(tmp_path, capsys):
    inst = tmp_path / "two_link.json"
    save_instance(two_link_instance(), inst)
    out = tmp_path / "row.csv"
    assert main(["solve", "--instance", str(inst), "--algo", "lpdrr", "--out", str(out)]) == 0
    assert "Feasible" in capsys.readouterr().out
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    row = dict(zip(rows[0], rows[1]))
    assert row["algorithm"] == "lpdrr" and float(row["total_delay"]) == 2.0


@pytest.mark.parametrize("algo", ["lpr", "LPsRR", "lprr-lp1", "exact"])
def test_solve_other_algorithms(tmp_path, capsys, algo):
    inst = tmp_path / "two_link.json"
    save_instance(two_link_instance(), inst)
    assert main(["--backend", "simplex", "solve", "--instance", str(inst), "--algo", algo,
                 "--p", "1"]) == 0
    out = capsys.readouterr().out
    assert "Feasible" in out and "more than P paths" in out


def test_suite_writes_rows_and_summary(tmp_path):
    cfg = tmp_path / "suite.yaml"
    cfg.write_text("generator:\n  grid_rows: 3\n  grid_cols: 3\n  num_cloud: 3\n  chain_length: 2\n"
                   "service_counts: [1]\ninstances: 2\n")
    out = tmp_path / "rows.csv"
    assert main(["suite", "--config", str(cfg), "--algos", "lpdrr,lpr", "--out", str(out)]) == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    assert (tmp_path / "rows_summary.csv").exists()


def test_suite_with_no_algorithms(tmp_path):
    out = tmp_path / "rows.csv"
    assert main(["suite", "--algos", "", "--out", str(out)]) == 0
    assert out.read_text().strip() == ",".join(CSV_COLUMNS)


def test_bad_input_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"network": {}}))
    assert main(["solve", "--instance", str(bad)]) == 2
    assert main(["solve", "--instance", str(tmp_path / "missing.json")]) == 2
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["solve", "--instance", str(bad), "--algo", "greedy"])


def test_version(capsys):
    with pytest.raises(SystemExit):
        main(["--version"])
    assert __version__ in capsys.readouterr().out
