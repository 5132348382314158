import csv
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from onchip_hom.analysis import ScanDataset, hom_model, write_scan_csv
from onchip_hom.cli import main
from onchip_hom.config import load_config
from onchip_hom.pipeline import build_experiment

FAST_SCAN = """[scan]
start_um = -1200.0
stop_um = 1200.0
step_um = 200.0
"""


def _small_config(tmp_path, duration_s=20.0, name="small.toml"):
    text = resources.files("onchip_hom.presets").joinpath("paper_fig4a.toml").read_text()
    text = text.replace("duration_s = 50.0", f"duration_s = {duration_s!r}")
    text = text[:text.index("[scan]")] + FAST_SCAN
    path = tmp_path / name
    path.write_text(text)
    return path


def _run(*argv):
    return main([str(a) for a in argv])


def _files(root: Path):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def _report(path):
    with open(path) as fh:
        return {row["parameter"]: float(row["value"]) for row in csv.DictReader(fh)}


@pytest.fixture(scope="module")
def small(tmp_path_factory):
    return _small_config(tmp_path_factory.mktemp("cfg"))


def test_simulate_writes_outputs(tmp_path, small, capsys):
    assert _run("simulate", "--config", small, "--out", tmp_path) == 0
    assert {"scan.csv", "fit_report.csv", "summary.txt", "curve.csv"} <= {p.name for p in tmp_path.iterdir()}
    assert (tmp_path / "scan.csv").read_text().splitlines()[0] == "delay_um,rate_hz,err_hz"
    assert "visibility V" in capsys.readouterr().out


def test_simulate_deterministic(tmp_path, small):
    for d in ("a", "b"):
        assert _run("simulate", "--config", small, "--out", tmp_path / d) == 0
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_seed_changes_output(tmp_path, small):
    _run("simulate", "--config", small, "--out", tmp_path / "a")
    _run("simulate", "--config", small, "--seed", 7, "--out", tmp_path / "b")
    assert (tmp_path / "a" / "scan.csv").read_bytes() != (tmp_path / "b" / "scan.csv").read_bytes()


def test_parallel_equals_sequential(tmp_path, small):
    _run("simulate", "--config", small, "--out", tmp_path / "seq")
    _run("--parallel", 2, "simulate", "--config", small, "--out", tmp_path / "par")
    assert _files(tmp_path / "seq") == _files(tmp_path / "par")


def test_analyze_reproduces_simulate_fit(tmp_path):
    cfg = _small_config(tmp_path, duration_s=4.0)
    sim = tmp_path / "sim"
    assert _run("simulate", "--config", cfg, "--write-tags", "--out", sim) == 0
    assert _run("analyze", sim / "tags" / "index.csv", "--out", tmp_path / "ana") == 0
    assert (tmp_path / "ana" / "fit_report.csv").read_bytes() == (sim / "fit_report.csv").read_bytes()
    assert _run("analyze", sim / "scan.csv", "--out", tmp_path / "ana2") == 0
    assert (tmp_path / "ana2" / "fit_report.csv").read_bytes() == (sim / "fit_report.csv").read_bytes()


def test_analyze_noiseless_scan(tmp_path, capsys):
    truth = np.array([4.2, 0.97, 0.0, 220.0])
    pos = np.arange(-1200.0, 1201.0, 100.0)
    rates = hom_model(pos, truth)
    write_scan_csv(tmp_path / "scan.csv", ScanDataset(pos, rates, np.sqrt(rates / 50.0)))
    assert _run("analyze", tmp_path / "scan.csv", "--out", tmp_path / "fit") == 0
    rep = _report(tmp_path / "fit" / "fit_report.csv")
    assert rep["c_n_hz"] == pytest.approx(4.2, rel=1e-6)
    assert rep["visibility"] == pytest.approx(0.97, rel=1e-6)
    assert abs(rep["d0_um"]) < 1e-6
    assert rep["sigma_um"] == pytest.approx(220.0, rel=1e-6)
    assert "FWHM" in capsys.readouterr().out


def test_analyze_corrupted_tag_file(tmp_path, capsys):
    cfg = _small_config(tmp_path, duration_s=1.0)
    sim = tmp_path / "sim"
    _run("simulate", "--config", cfg, "--write-tags", "--out", sim)
    victim = sim / "tags" / "point_003.ptag"
    data = victim.read_bytes()
    victim.write_bytes(data[:-5])
    capsys.readouterr()
    assert _run("analyze", sim, "--out", tmp_path / "ana") == 1
    err = capsys.readouterr().err
    assert "point_003.ptag" in err and f"byte offset {len(data) - 16}" in err


def test_invalid_config_exits_nonzero(tmp_path, small, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text(small.read_text().replace("efficiency = 0.115", "efficiency = 0.115\nefficency = 0.115", 1))
    assert _run("simulate", "--config", bad, "--out", tmp_path / "o") == 1
    captured = capsys.readouterr()
    assert "detectors[0].efficency: unknown field" in captured.err
    assert captured.out == ""
    assert not (tmp_path / "o" / "scan.csv").exists()


def test_malformed_scan_reports_line(tmp_path, capsys):
    (tmp_path / "scan.csv").write_text("delay_um,rate_hz,err_hz\n0,1,1\n5,oops,1\n")
    assert _run("analyze", tmp_path / "scan.csv") == 1
    assert "scan.csv:3:" in capsys.readouterr().err


def test_missing_seed(tmp_path, small, capsys):
    path = tmp_path / "noseed.toml"
    path.write_text(small.read_text().replace("seed = 20170401", ""))
    assert _run("simulate", "--config", path, "--out", tmp_path) == 1
    assert "seed" in capsys.readouterr().err


def test_error_bars_halve_with_four_times_duration(tmp_path):
    short = _small_config(tmp_path, 10.0, "short.toml")
    long = _small_config(tmp_path, 40.0, "long.toml")
    ratios = []
    for seed in range(4):
        errs = []
        for cfg, tag in ((short, "s"), (long, "l")):
            out = tmp_path / f"{tag}{seed}"
            _run("simulate", "--config", cfg, "--seed", seed, "--out", out)
            with open(out / "scan.csv") as fh:
                errs.append(np.mean([float(r["err_hz"]) for r in csv.DictReader(fh)]))
        ratios.append(errs[1] / errs[0])
    assert np.mean(ratios) == pytest.approx(0.5, rel=0.20)


def test_sweep_pump_preset_grid(tmp_path):
    assert _run("sweep-pump", "--out", tmp_path) == 0
    with open(tmp_path / "sweep_pump.csv") as fh:
        rows = {float(r["pump_nm"]): float(r["predicted_v"]) for r in csv.DictReader(fh)}
    reported = {775.0: 0.58, 775.5: 0.71, 776.0: 0.83, 776.5: 0.94, 777.1: 0.97, 777.6: 0.93}
    assert set(rows) == set(reported)
    for lam, v in reported.items():
        assert rows[lam] == pytest.approx(v, abs=0.10)
    assert "V > 0.9 over" in (tmp_path / "sweep_pump_summary.txt").read_text()


def test_sweep_pump_single_wavelength_is_maximum(tmp_path):
    exp = build_experiment(load_config("paper_fig4b"))
    grid = np.linspace(774.0, 780.0, 601)
    best = max(exp.predicted_visibility(l) for l in grid)
    assert _run("sweep-pump", "--wavelengths", 777.1, "--out", tmp_path) == 0
    with open(tmp_path / "sweep_pump.csv") as fh:
        (row,) = list(csv.DictReader(fh))
    assert float(row["predicted_v"]) == pytest.approx(best, abs=1e-12)


def test_sweep_pump_prediction_matches_monte_carlo(tmp_path, small):
    assert _run("sweep-pump", "--config", small, "--wavelengths", 776.0, 777.1, "--simulate",
                "--out", tmp_path) == 0
    with open(tmp_path / "sweep_pump.csv") as fh:
        for row in csv.DictReader(fh):
            pred, sim, err = (float(row[k]) for k in ("predicted_v", "simulated_v", "simulated_v_err"))
            assert abs(sim - pred) <= 3 * err


def test_sweep_power_small(tmp_path, small):
    assert _run("sweep-power", "--config", small, "--powers", 10.5, 3.5, "--out", tmp_path) == 0
    with open(tmp_path / "sweep_power.csv") as fh:
        rows = list(csv.DictReader(fh))
    mu = [float(r["mu"]) for r in rows]
    assert mu[1] / mu[0] == pytest.approx(3.5 / 10.5, rel=1e-12)
    assert (tmp_path / "scan_10.5mW.csv").exists() and (tmp_path / "scan_3.5mW.csv").exists()
    assert "delta V (3.5 mW - 10.5 mW)" in (tmp_path / "sweep_power_summary.txt").read_text()


def test_calibrate_coupler(tmp_path, capsys):
    assert _run("calibrate-coupler", "--anchor", "370:28", "--anchor", "400:32", "--gaps", 370, 400,
                "--out", tmp_path) == 0
    with open(tmp_path / "coupler.csv") as fh:
        rows = {float(r["gap_nm"]): float(r["half_split_length_um"]) for r in csv.DictReader(fh)}
    assert rows[370.0] == pytest.approx(28.0, abs=1.5)
    assert rows[400.0] == pytest.approx(32.0, abs=1.5)
    assert "gap decay" in capsys.readouterr().out


def test_calibrate_coupler_degenerate(capsys):
    assert _run("calibrate-coupler", "--anchor", "400:32", "--anchor", "400:32") == 1
    assert "degenerate" in capsys.readouterr().err
    assert _run("calibrate-coupler", "--anchor", "400:32") == 1
    assert "at least two" in capsys.readouterr().err
