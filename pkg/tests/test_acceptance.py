"""Acceptance criteria A1 to A11; each test records one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they
happen; they are also repeated in the terminal summary.
"""

import csv
import math
import time
from importlib import resources

import numpy as np
import pytest
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from onchip_hom.analysis import (ScanDataset, derive_quantities, fit_hom_dip, fit_visibility_curve,
                                 hom_model, rate_error)
from onchip_hom.circuit import CouplerGeometry, bs_matrix, calibrate_coupler, splitting_ratio
from onchip_hom.cli import main
from onchip_hom.config import load_config
from onchip_hom.interference import (accidental_rate, coincidence_probability, splitter_visibility,
                                     visibility_prediction)
from onchip_hom.pipeline import build_experiment
from onchip_hom.source import pair_number_distribution
from onchip_hom.tcspc import count_coincidences, sorted_uniform

REPORTED_SWEEP = {775.0: 0.58, 775.5: 0.71, 776.0: 0.83, 776.5: 0.94, 777.1: 0.97, 777.6: 0.93}


def _run(*argv):
    return main([str(a) for a in argv])


def _report(path):
    with open(path) as fh:
        return {r["parameter"]: (float(r["value"]), float(r["uncertainty"])) for r in csv.DictReader(fh)}


@pytest.fixture(scope="module")
def power_sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("power")
    assert _run("--config", "paper_supp_power", "sweep-power", "--out", out) == 0
    with open(out / "sweep_power.csv") as fh:
        return {float(r["power_mw"]): r for r in csv.DictReader(fh)}


def test_a1_hom_dip_reproduction(tmp_path, criterion):
    criterion("A1 HOM dip reproduction")
    cfg = load_config("paper_fig4a")
    assert len(cfg.scan.positions_um) <= 25 and cfg.acquisition.duration_s <= 200
    start = time.perf_counter()
    assert _run("simulate", "--config", "paper_fig4a", "--out", tmp_path / "sim") == 0
    assert _run("analyze", tmp_path / "sim", "--out", tmp_path / "fit") == 0
    elapsed = time.perf_counter() - start
    rep = _report(tmp_path / "fit" / "fit_report.csv")
    v, w, c_n = rep["visibility"][0], rep["fwhm_um"][0], rep["c_n_hz"][0]
    print(f"\n  V = {v:.4f} ± {rep['visibility'][1]:.4f}, w = {w:.1f} ± {rep['fwhm_um'][1]:.1f} um, "
          f"C_n = {c_n:.3f} ± {rep['c_n_hz'][1]:.3f} Hz, {elapsed:.1f} s")
    assert 0.94 <= v <= 1.00
    assert 440 <= w <= 595
    assert 3.9 <= c_n <= 4.5
    assert elapsed < 300


def test_a2_pump_wavelength_sweep(criterion):
    criterion("A2 pump-wavelength sweep")
    exp = build_experiment(load_config("paper_fig4b"))
    predicted = {lam: exp.predicted_visibility(lam) for lam in REPORTED_SWEEP}
    for lam in (775.5, 776.0, 776.5, 777.6):
        assert predicted[lam] == pytest.approx(REPORTED_SWEEP[lam], abs=0.10)
    lams = list(predicted)
    peak = fit_visibility_curve(lams, [predicted[l] for l in lams], [0.03] * len(lams))
    print(f"\n  predicted {[round(predicted[l], 3) for l in lams]}, "
          f"V > 0.9 span {peak.span_above_threshold:.3f} nm")
    assert peak.span_above_threshold == pytest.approx(1.5, abs=0.4)


@pytest.mark.slow
def test_a3_power_independence(power_sweep, criterion):
    criterion("A3 power independence")
    v_hi = float(power_sweep[10.5]["fitted_v"])
    v_lo = float(power_sweep[3.5]["fitted_v"])
    print(f"\n  V(10.5 mW) = {v_hi:.4f}, V(3.5 mW) = {v_lo:.4f}, delta {v_lo - v_hi:+.4f}")
    assert abs(v_lo - v_hi) <= 0.01


def test_a4_multipair_distribution(criterion):
    criterion("A4 multi-pair distribution")
    assert pair_number_distribution(0.1, 50)[1] == pytest.approx(0.0863838, abs=1e-6)
    deficits = {mu: 1.0 - pair_number_distribution(mu, 50).sum() for mu in (0.0, 0.01, 0.1, 1.0, 5.0)}
    print("\n  1 - sum_{n<=50} P_n: " + ", ".join(f"mu={m:g}: {d:.3e}" for m, d in deficits.items()))
    for mu, d in deficits.items():
        assert abs(d) <= 1e-9, f"mu = {mu}: truncated sum misses {d:.3e}"


def test_a5_accidentals(criterion):
    criterion("A5 accidentals")
    analytic = accidental_rate(1e4, 1e4, 256.0)
    assert analytic == pytest.approx(0.0256, rel=1e-12)
    rng = np.random.default_rng(2024)
    total, chunk_s, count = 1e4, 100.0, 0
    for k in range(int(total / chunk_s)):
        span = chunk_s * 1e12
        a = np.rint(sorted_uniform(rng.poisson(1e4 * chunk_s), span, rng)).astype(np.int64)
        b = np.rint(sorted_uniform(rng.poisson(1e4 * chunk_s), span, rng)).astype(np.int64)
        count += count_coincidences(a, b, 256.0).count
    expected = analytic * total
    print(f"\n  simulated {count} coincidences, expected {expected:.0f} ± {math.sqrt(expected):.0f}")
    assert abs(count - expected) <= 3 * math.sqrt(expected)
    assert 0.5 <= analytic / 0.02 <= 2.0


def _exhaustive_matching(a, b, window):
    if a.size == 0 or b.size == 0:
        return 0
    adj = csr_matrix((2 * np.abs(a[:, None] - b[None, :]) <= window).astype(np.int8))
    return int(np.sum(maximum_bipartite_matching(adj, perm_type="column") >= 0))


def test_a6_correlator_oracle(criterion):
    criterion("A6 correlator oracle")
    rng = np.random.default_rng(6)
    for _ in range(100):
        na, nb = rng.integers(0, 1001, 2)
        span = int(rng.integers(1, 2000)) * max(na, nb, 1)
        a = np.sort(rng.integers(0, span, na))
        b = np.sort(rng.integers(0, span, nb))
        window = float(rng.integers(0, 2000))
        assert count_coincidences(a, b, window).count == _exhaustive_matching(a, b, window)


def test_a7_fit_correctness(criterion):
    criterion("A7 fit correctness")
    truth = np.array([4.2, 0.97, 0.0, 220.0])
    pos = np.arange(-1200.0, 1201.0, 100.0)
    rates = hom_model(pos, truth)
    fit = fit_hom_dip(ScanDataset(pos, rates, np.sqrt(rates / 50.0)))
    assert np.allclose(fit.params[[0, 1, 3]], truth[[0, 1, 3]], rtol=1e-6, atol=0)
    assert abs(fit.d0_um) <= 1e-6 * truth[3]
    hits = 0
    for seed in range(100):
        counts = np.random.default_rng(seed).poisson(rates * 50.0)
        errs = [rate_error(max(int(k), 1), 50.0) for k in counts]
        lo, hi = fit_hom_dip(ScanDataset(pos, counts / 50.0, errs)).confidence_interval("visibility")
        hits += lo <= truth[1] <= hi
    print(f"\n  coverage {hits}/100")
    assert hits >= 90


def test_a8_beam_splitter_algebra(criterion):
    criterion("A8 beam-splitter algebra")
    rng = np.random.default_rng(8)
    for t in rng.random(100):
        u = bs_matrix(t, 1 - t).matrix
        assert np.max(np.abs(u.conj().T @ u - np.eye(2))) < 1e-12
        a = visibility_prediction(bs_matrix(t, 1 - t), 0.9, 1e-3)
        b = visibility_prediction(bs_matrix(1 - t, t), 0.9, 1e-3)
        assert a == pytest.approx(b, abs=1e-12)
        assert splitter_visibility(bs_matrix(t, 1 - t)) == pytest.approx(
            splitter_visibility(bs_matrix(1 - t, t)), abs=1e-12)
    assert coincidence_probability(bs_matrix(0.5, 0.5), 1.0) == 0.0


def test_a9_time_bandwidth(criterion):
    criterion("A9 time-bandwidth consistency")
    sigma = 518.0 / (2 * math.sqrt(2 * math.log(2)))
    pos = np.linspace(-4000.0, 4000.0, 41)
    rates = hom_model(pos, np.array([4.2, 0.97, 0.0, sigma]))
    dq = derive_quantities(fit_hom_dip(ScanDataset(pos, rates, np.full(pos.size, 0.1))), 1550.0)
    print(f"\n  w = {dq.fwhm_um:.3f} um, tau_c = {dq.coherence_time_ps:.4f} ps, bandwidth {dq.bandwidth_nm:.4f} nm")
    assert dq.fwhm_um == pytest.approx(518.0, rel=1e-6)
    assert dq.coherence_time_ps == pytest.approx(1.728, abs=5e-4)
    assert dq.bandwidth_nm == pytest.approx(2.05, abs=5e-3)
    assert 1.9 <= dq.bandwidth_nm <= 2.3


def test_a10_coupler_calibration(criterion):
    criterion("A10 coupler calibration")
    model = calibrate_coupler([(370.0, 28.0), (400.0, 32.0)])
    assert abs(model.half_split_length(370.0) - 28.0) <= 1.5
    assert abs(model.half_split_length(400.0) - 32.0) <= 1.5
    for gap in np.linspace(150.0, 700.0, 23):
        assert splitting_ratio(CouplerGeometry(gap, model.half_split_length(gap)), model) == (0.5, 0.5)


def _files(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_a11_determinism(tmp_path, criterion):
    criterion("A11 determinism")
    text = resources.files("onchip_hom.presets").joinpath("paper_fig4a.toml").read_text()
    text = text.replace("duration_s = 50.0", "duration_s = 5.0")
    text = text[:text.index("[scan]")] + "[scan]\nstart_um = -1200.0\nstop_um = 1200.0\nstep_um = 200.0\n"
    cfg = tmp_path / "small.toml"
    cfg.write_text(text)
    commands = {
        "simulate": ("simulate", "--config", cfg, "--write-tags"),
        "sweep-pump": ("sweep-pump", "--config", "paper_fig4b", "--wavelengths", 776.0, 777.1, "--simulate",
                       "--seed", 3),
        "sweep-power": ("sweep-power", "--config", cfg, "--powers", 10.5, 3.5),
        "calibrate-coupler": ("calibrate-coupler", "--anchor", "370:28", "--anchor", "400:32"),
    }
    for name, argv in commands.items():
        runs = []
        for rep in ("a", "b"):
            out = tmp_path / name / rep
            assert _run(*argv, "--out", out) == 0
            runs.append(_files(out))
        assert runs[0] and runs[0] == runs[1], name
    for rep in ("a", "b"):
        assert _run("analyze", tmp_path / "simulate" / "a", "--out", tmp_path / "analyze" / rep) == 0
    assert _files(tmp_path / "analyze" / "a") == _files(tmp_path / "analyze" / "b")


# supporting checks on the power preset beyond criterion A3

@pytest.mark.slow
def test_power_widths_statistically_consistent(power_sweep):
    (w1, e1), (w2, e2) = [(float(power_sweep[p]["fwhm_um"]), float(power_sweep[p]["fwhm_err_um"]))
                          for p in (10.5, 3.5)]
    assert abs(w1 - w2) <= 3 * math.hypot(e1, e2)
    assert all(abs(w - 518.0) <= 41.0 for w in (w1, w2))


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="default seed draws a 2.2 combined-sigma width fluctuation; see notes")
def test_power_widths_within_each_others_one_sigma(power_sweep):
    (w1, e1), (w2, e2) = [(float(power_sweep[p]["fwhm_um"]), float(power_sweep[p]["fwhm_err_um"]))
                          for p in (10.5, 3.5)]
    assert abs(w1 - w2) <= e1 + e2


@pytest.mark.slow
def test_power_mu_linear(power_sweep):
    mu = {p: float(r["mu"]) for p, r in power_sweep.items()}
    assert mu[3.5] / mu[10.5] == pytest.approx(3.5 / 10.5, rel=1e-12)
