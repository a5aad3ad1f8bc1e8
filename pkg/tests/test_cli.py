import json

import pytest

from poissonlab import svgplot
from poissonlab.cli import main


def run(tmp_path, *argv):
    import os

    old = os.getcwd()
    os.chdir(tmp_path)
    try:
        return main(list(argv))
    finally:
        os.chdir(old)


def test_sample_deterministic_bytes(tmp_path):
    assert run(tmp_path, "sample", "--fixture", "poisson-square", "--seed", "5",
               "-o", "a.csv") == 0
    assert run(tmp_path, "sample", "--fixture", "poisson-square", "--seed", "5",
               "-o", "b.csv") == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert run(tmp_path, "sample", "--fixture", "poisson-square", "--seed", "6",
               "-o", "c.csv") == 0
    assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "c.csv").read_bytes()


def test_unknown_fixture_errors(tmp_path):
    assert run(tmp_path, "sample", "--fixture", "no-such-thing") == 2


def test_perc_scan_and_plot(tmp_path):
    assert run(
        tmp_path, "perc", "scan", "--model", "boolean-k1", "--grid", "0.25:0.55:4",
        "--n", "6", "--samples", "40", "--seed", "1", "-o", "scan.csv",
    ) == 0
    text = (tmp_path / "scan.csv").read_text()
    rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    assert rows[0] == "param,n,estimate,se,samples,seed"
    assert len(rows) == 5
    assert run(tmp_path, "plot", "--csv", str(tmp_path / "scan.csv"),
               "--kind", "threshold", "-o", "scan.svg") == 0
    svg = (tmp_path / "scan.svg").read_text()
    assert svg.startswith("<svg") and "polyline" in svg


def test_plot_empty_csv_errors(tmp_path):
    (tmp_path / "empty.csv").write_text("param,estimate,se\n")
    with pytest.raises(SystemExit):
        run(tmp_path, "plot", "--csv", str(tmp_path / "empty.csv"),
            "--kind", "threshold", "-o", "x.svg")


def test_stopping_audit_cli(tmp_path):
    assert run(
        tmp_path, "stopping", "audit", "--fixture", "nonattainable",
        "--trials", "300", "--seed", "2", "-o", "na.json",
    ) == 0
    rep = json.loads((tmp_path / "na.json").read_text())
    assert rep["axiom"]["passed"]


def test_chaos_audit_cli(tmp_path):
    assert run(
        tmp_path, "chaos", "audit", "--fixture", "chaos-3cell-exact",
        "-o", "c.json",
    ) == 0
    rep = json.loads((tmp_path / "c.json").read_text())
    assert rep["exact"] and len(rep["weights"]) == 8


def test_dynamics_cli(tmp_path):
    assert run(tmp_path, "dynamics", "run", "--fixture", "birth-death-small",
               "--seed", "3", "-o", "path.csv") == 0
    rows = [
        ln for ln in (tmp_path / "path.csv").read_text().splitlines()
        if ln and not ln.startswith("#")
    ]
    assert rows[0] == "time,kind,point_id,x0,x1"
    assert run(tmp_path, "dynamics", "exceptional", "--fixture",
               "crossing-exceptional", "--seed", "3", "-o", "exc.csv") == 0


def test_perc_duality_cli(tmp_path):
    assert run(tmp_path, "perc", "duality", "--n", "5", "--samples", "25",
               "--seed", "4", "-o", "d.json") == 0
    rep = json.loads((tmp_path / "d.json").read_text())
    assert rep["xor_violations"] == 0


def test_run_config_and_schema_errors(tmp_path):
    cfg = {
        "version": 1,
        "experiment": "sample",
        "seed": 7,
        "params": {"fixture": "poisson-square", "output": "out.csv"},
    }
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    assert run(tmp_path, "run", "--config", str(tmp_path / "cfg.json")) == 0
    assert (tmp_path / "out.csv").exists()
    (tmp_path / "bad.json").write_text(json.dumps({"experiment": "sample"}))
    with pytest.raises(SystemExit):
        run(tmp_path, "run", "--config", str(tmp_path / "bad.json"))


def test_acceptance_single_criterion(tmp_path):
    assert run(tmp_path, "acceptance", "3", "-o", "acc.json") == 0
    rep = json.loads((tmp_path / "acc.json").read_text())
    assert rep["passed"] and len(rep["criteria"]) == 1


def test_acceptance_unknown_name(tmp_path):
    with pytest.raises(SystemExit):
        run(tmp_path, "acceptance", "nope")


def test_outdir_env(tmp_path, monkeypatch):
    monkeypatch.setenv("POISSONLAB_OUTDIR", str(tmp_path / "outs"))
    assert run(tmp_path, "sample", "--seed", "1", "-o", "s.csv") == 0
    assert (tmp_path / "outs" / "s.csv").exists()


def test_svgplot_validation():
    with pytest.raises(ValueError):
        svgplot.line_plot([{"x": [], "y": []}], "x", "y")
    svg = svgplot.line_plot(
        [{"x": [1, 2, 3], "y": [0.1, 0.01, 0.001], "label": "decay"}],
        "s", "theta", log_y=True,
    )
    assert "</svg>" in svg
