import csv
import json

import pytest

from superradiance_mf.cli import main
from superradiance_mf.config import ConfigError, SweepConfig, load_config
from superradiance_mf.driver import boundary_estimates, run, zero_crossings
from superradiance_mf.diagnostics import PhasePoint


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def test_defaults_and_grid():
    cfg = SweepConfig()
    assert cfg.delta_over_kappa == 0.5
    assert cfg.grid("w")[0] == 0.25 and cfg.grid("w")[-1] == 8.0
    assert len(cfg.grid("temp")) == cfg.temp_count


@pytest.mark.parametrize("bad", [dict(w_count=0), dict(mode="nope"), dict(lam=-1.0), dict(dt=-1e-3),
                                 dict(n_max=0), dict(lam_max=0.5, lam_min=1.0)])
def test_invalid_config(bad):
    with pytest.raises(ConfigError):
        SweepConfig(**bad)


def test_load_precedence(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"n_max": 9, "lam": 3.0}))
    cfg = load_config(path, preset="smoke", lam=5.0)
    assert cfg.n_max == 9  # file beats preset
    assert cfg.lam == 5.0  # explicit beats file
    assert cfg.t_end == 500.0  # from preset


def test_unknown_field(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(ConfigError, match="bogus"):
        load_config(path)


def test_workers_env(monkeypatch):
    monkeypatch.setenv("SRMF_WORKERS", "3")
    assert SweepConfig().effective_workers() == 3
    monkeypatch.setenv("SRMF_WORKERS", "zero")
    with pytest.raises(ConfigError):
        SweepConfig().effective_workers()


def test_cli_config_error_exit_code(tmp_path, capsys):
    assert main(["phase-diagram", "--set", "w_count=0", "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["steady", "--config", str(bad), "--out", str(tmp_path)]) == 2


def thermal_args(out, workers):
    return ["thermal-map", "--lambda", "10", "--out", str(out), "--workers", str(workers),
            "--set", "w_over_lambda_count=4", "--set", "temp_count=5", "--set", "temp_max=0.25"]


def test_thermal_map_deterministic_across_workers(tmp_path):
    assert main(thermal_args(tmp_path / "a", 1)) == 0
    assert main(thermal_args(tmp_path / "b", 2)) == 0
    a = (tmp_path / "a" / "thermal_map.csv").read_text().splitlines()
    b = (tmp_path / "b" / "thermal_map.csv").read_text().splitlines()
    # headers differ only in the recorded output path and worker count
    assert a[2:] == b[2:]
    assert a[0].startswith("# superradiance_mf")
    rows = read_rows(tmp_path / "a" / "thermal_map.csv")
    assert list(rows[0])[:4] == ["w_over_lambda", "temp_scaled", "re_gamma", "im_gamma"]
    cold = [r for r in rows if float(r["temp_scaled"]) < 0.01 and float(r["w_over_lambda"]) == 0.0]
    assert float(cold[0]["re_gamma"]) > 0
    hot_pump = [r for r in rows if float(r["w_over_lambda"]) == 0.6]
    assert all(float(r["re_gamma"]) <= 0 for r in hot_pump)


def test_single_cell_phase_diagram(tmp_path):
    cfg = SweepConfig(mode="phase-diagram", w_min=2.5, w_max=2.5, w_count=1, lam_min=15.0, lam_max=15.0,
                      lam_count=1, out=str(tmp_path))
    res = run(cfg)
    rows = read_rows(tmp_path / "phase_diagram.csv")
    assert len(rows) == 1
    assert rows[0]["label"] == "coherent"
    assert list(rows[0]) == ["w", "lambda", "label", "abs_X_st", "re_gamma", "im_gamma", "lambda_min", "flags"]
    summary = json.loads((tmp_path / "phase_diagram_summary.json").read_text())
    assert summary["counts"]["coherent"] == 1
    assert res.failed_fraction == 0


def test_zero_crossings():
    assert zero_crossings([0.0, 1.0, 2.0], [1.0, 0.5, -0.5]) == [1.5]
    assert zero_crossings([0.0, 1.0], [1.0, 2.0]) == []


def test_boundary_estimates():
    pts = [PhasePoint(w, 1.0, lab) for w, lab in [(0.0, "coherent"), (1.0, "coherent"), (2.0, "normal")]]
    found = boundary_estimates(pts, [0.0, 1.0, 2.0], [1.0])
    assert found == [{"lambda": 1.0, "w": 1.5, "between": ["coherent", "normal"]}]


def test_steady_mode_writes_json(tmp_path):
    assert main(["steady", "--lambda", "9", "--w", "2.25", "--n-max", "6", "--out", str(tmp_path)]) == 0
    data = json.loads(next(tmp_path.glob("steady_*.json")).read_text())
    assert data["converged"] and data["abs_X_st"] > 0.1
    assert data["lambda_min"] < 0
    assert "_header" in data
