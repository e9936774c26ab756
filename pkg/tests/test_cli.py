import csv
from pathlib import Path

import numpy as np
import pytest

from wpsn import csvio
from wpsn.cli import main
from wpsn.config import load_config

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_region_schema(tmp_path, capsys):
    cfg = tmp_path / "r.toml"
    cfg.write_text("[nodes]\nradius_m = [2.0, 2.0]\nazimuth_deg = [0.0, 10.0]\n"
                   "[run]\nsamples = 1000\nalpha_points = 20\noracle_restarts = 4\n")
    assert main(["region", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = read(tmp_path / "region.csv")
    assert list(rows[0]) == ["sample_id", "r1_w", "r2_w", "kind"]
    assert len(rows) >= 1000 + 20
    assert {r["kind"] for r in rows} == {"random", "pareto", "ts"}
    assert "region:" in capsys.readouterr().out


def test_gain_sweep_18_rows(tmp_path):
    cfg = tmp_path / "g.toml"
    cfg.write_text((SCENARIOS / "gain2.toml").read_text() + "\n[run]\noracle_restarts = 4\n")
    assert main(["gain", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = read(tmp_path / "gain.csv")
    assert len(rows) == 18
    assert [float(r["azimuth_deg"]) for r in rows] == list(np.arange(10.0, 181.0, 10.0))
    assert all(float(r["gamma"]) >= 1 - 1e-9 for r in rows)


def test_gain_reports_degenerate_rows(tmp_path):
    cfg = tmp_path / "g.toml"
    cfg.write_text("[nodes]\nradius_m = [2.0, 2.0, 2.0]\nazimuth_deg = [0.0, 1.0, 2.0]\n"
                   '[sweep]\ngain_layout = "spread"\nazimuth_deg = [90.0, 180.0]\n'
                   "[run]\noracle_restarts = 2\n")
    assert main(["gain", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = read(tmp_path / "gain.csv")
    assert [r["status"] for r in rows] == ["ok", "degenerate"]


def test_simulate_rows_and_summary(tmp_path, capsys):
    args = ["simulate", "--config", str(SCENARIOS / "node_move.toml"), "--out", str(tmp_path),
            "--frames", "400", "--seed", "3"]
    assert main(args) == 0
    line = capsys.readouterr().out
    assert "min-energy node" in line and "avg sum utility" in line
    header, rows = csvio.read_rows(tmp_path / "timeseries.csv")
    assert len(rows) == 400
    assert header[:3] == ["frame", "time_s", "beam_index"]
    assert "w8_phase_deg" in header and "alive3" in header
    summary = {r["key"]: float(r["value"]) for r in read(tmp_path / "summary.csv")}
    again = csvio.summary_from_csv(tmp_path / "timeseries.csv", int(summary["warmup_frames"]))
    assert again["avg_sum_utility"] == pytest.approx(summary["avg_sum_utility"], abs=1e-9)
    assert again["avg_sum_deficiency_j"] == pytest.approx(summary["avg_sum_deficiency_j"], abs=1e-9)


def test_simulate_deterministic_and_ts_flag(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    base = ["simulate", "--config", str(SCENARIOS / "node_move.toml"), "--frames", "100", "--seed", "9"]
    assert main(base + ["--out", str(a)]) == 0
    assert main(base + ["--out", str(b)]) == 0
    assert (a / "timeseries.csv").read_bytes() == (b / "timeseries.csv").read_bytes()
    assert main(base + ["--out", str(c), "--ts"]) == 0
    _, rows = csvio.read_rows(c / "timeseries.csv")
    assert all(int(r[2]) >= 0 for r in rows)


def test_sweep_static_and_bounds(tmp_path, capsys):
    cfg = tmp_path / "s.toml"
    cfg.write_text((SCENARIOS / "trends.toml").read_text().replace(
        "[5e-7, 5e-6, 5e-5]", "[5e-6]").replace("[0.0, 0.25, 0.5, 0.75]", "[0.5]"))
    out = tmp_path / "o"
    assert main(["sweep", "--config", str(cfg), "--frames", "200", "--out", str(out)]) == 0
    assert len(read(out / "sweep.csv")) == 4
    assert main(["static-opt", "--config", str(cfg), "--out", str(out)]) == 0
    assert len(read(out / "static_opt.csv")) == 3
    assert main(["bounds", "--config", str(cfg), "--frames", "300", "--out", str(out)]) == 0
    keys = {r["key"] for r in read(out / "bounds.csv")}
    assert {"u_star", "upsilon_j2", "utility_lower_bound", "deficiency_upper_bound_j"} <= keys


def test_check_config_emit(capsys):
    assert main(["check-config", "--config", str(SCENARIOS / "node_move.toml"), "--emit"]) == 0
    assert "[budget]" in capsys.readouterr().out


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[budget]\np_tot_w = -1\n")
    assert main(["simulate", "--config", str(bad)]) == 3
    assert "budget.p_tot_w" in capsys.readouterr().err
    assert main(["simulate", "--config", str(tmp_path / "missing.toml")]) == 7
    assert str(tmp_path / "missing.toml") in capsys.readouterr().err
    far = tmp_path / "far.toml"
    far.write_text("[nodes]\nradius_m = [50.0]\nazimuth_deg = [0.0]\n"
                   "[controller]\nneutrality_margin_j = 1.0\n")
    assert main(["static-opt", "--config", str(far), "--out", str(tmp_path)]) == 6
    assert "node 1" in capsys.readouterr().err
    co = tmp_path / "co.toml"
    co.write_text("[nodes]\nradius_m = [2.0, 2.0]\nazimuth_deg = [5.0, 5.0]\n[sweep]\nazimuth_deg = []\n")
    # co-located nodes become degenerate rows, not a failure
    assert main(["gain", "--config", str(co), "--out", str(tmp_path)]) == 0


def test_seed_and_config_are_parsed_together():
    assert load_config(SCENARIOS / "minimal.toml").seed == 0
