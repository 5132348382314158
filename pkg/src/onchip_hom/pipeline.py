"""Monte Carlo delay scans: pairs -> coupler -> detectors -> coincidences."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .analysis import ScanDataset, rate_error
from .circuit import (BeamSplitter, CouplerGeometry, CouplerModel, LossBudget, bs_matrix,
                      calibrate_coupler, splitting_ratio)
from .config import ExperimentConfig
from .interference import (RateBudget, calibrate_detuning_slope, delay_ps, hom_curve,
                           outcome_probabilities, overlap_vs_delay, predicted_visibility_at,
                           DelayScan)
from .source import (PairStatistics, SourceSpectralModel, phase_matched_crystal,
                     detuning_slope_from_dispersion, load_sellmeier, sample_pair_stream,
                     sigma_from_bandwidth)
from .tcspc import DetectorConfig, TagStream, count_coincidences, simulate_detection


@dataclass(frozen=True)
class Experiment:
    """Fully resolved simulation inputs (calibrations already applied)."""

    model: SourceSpectralModel
    stats: PairStatistics
    coupler: CouplerModel
    splitter: BeamSplitter
    budget: RateBudget
    detectors: tuple
    positions_um: tuple
    duration_s: float
    window_ps: float
    pump_power_mw: float
    center_wavelength_nm: float

    @property
    def mu(self) -> float:
        return self.stats.mu

    def at(self, pump_power_mw=None, pump_wavelength_nm=None, duration_s=None) -> "Experiment":
        exp = self
        if pump_power_mw is not None:
            stats = self.stats.at_power(pump_power_mw)
            exp = replace(exp, stats=stats, pump_power_mw=pump_power_mw,
                          budget=replace(exp.budget, pair_rate_hz=stats.pair_rate))
        if pump_wavelength_nm is not None:
            exp = replace(exp, model=exp.model.at_pump(pump_wavelength_nm))
        if duration_s is not None:
            exp = replace(exp, duration_s=duration_s)
        return exp

    def predicted_visibility(self, pump_wavelength_nm=None) -> float:
        lam = self.model.pump_wavelength_nm if pump_wavelength_nm is None else pump_wavelength_nm
        return predicted_visibility_at(self.model, lam, self.splitter, self.mu, self.budget)

    def expected_rates(self) -> np.ndarray:
        return hom_curve(self.model, self.splitter, DelayScan(self.positions_um), self.budget)


@dataclass(frozen=True)
class ScanResult:
    dataset: ScanDataset
    counts: tuple
    tags: tuple = ()


def _arm_transmission(cfg: ExperimentConfig) -> float:
    c = cfg.circuit
    return LossBudget(c.facet_db, c.tap_db, c.propagation_db, c.offchip_db).transmission()


def _budget(cfg: ExperimentConfig, pair_rate_hz: float) -> RateBudget:
    a = _arm_transmission(cfg)
    return RateBudget(
        pair_rate_hz=pair_rate_hz,
        arm_transmission=(a, a),
        detector_efficiency=tuple(d.efficiency for d in cfg.detectors),
        dark_rate_hz=tuple(d.dark_rate_hz for d in cfg.detectors),
        window_ps=cfg.acquisition.window_ps,
    )


def calibrate_pair_rate(model: SourceSpectralModel, splitter: BeamSplitter, budget: RateBudget,
                        baseline_hz: float) -> float:
    """Pair rate (Hz) whose far-from-dip coincidence rate, accidentals included, is ``baseline_hz``."""
    far = DelayScan((1e9,))

    def excess(rate):
        return float(hom_curve(model, splitter, far, replace(budget, pair_rate_hz=rate))[0]) - baseline_hz

    if excess(0.0) >= 0:
        raise ValueError("dark-count accidentals alone exceed the requested baseline")
    hi = 1.0
    while excess(hi) < 0:
        hi *= 10
        if hi > 1e15:
            raise ValueError("baseline unreachable with this loss budget")
    return brentq(excess, 0.0, hi, xtol=1e-12, rtol=1e-14)


def build_experiment(cfg: ExperimentConfig) -> Experiment:
    src = cfg.source
    sigma = sigma_from_bandwidth(src.bandwidth_nm, src.center_wavelength_nm)
    if src.detuning_slope_rad_per_s_nm is not None:
        slope = src.detuning_slope_rad_per_s_nm
    else:
        crystal = phase_matched_crystal(src.degeneracy_pump_nm, src.crystal_length_mm,
                                        src.crystal_temperature_c, load_sellmeier())
        slope = detuning_slope_from_dispersion(crystal, src.degeneracy_pump_nm)
    model = SourceSpectralModel(src.pump_wavelength_nm, src.degeneracy_pump_nm, sigma, slope,
                                src.spectral_kind)
    if src.slope_calibration:
        model = replace(model, detuning_slope=calibrate_detuning_slope(model, *src.slope_calibration))

    cc = cfg.circuit
    coupler = calibrate_coupler(cc.anchors, cc.wavelength_nm)
    geom = CouplerGeometry(cc.gap_nm, cc.length_um, wavelength_nm=cc.wavelength_nm,
                           coupling_factor=cc.coupling_factor)
    splitter = bs_matrix(*splitting_ratio(geom, coupler))

    interval = src.interval_ps
    if src.mu_per_mw is not None:
        stats = PairStatistics(power_calibration=src.mu_per_mw, interval_ps=interval)
    else:
        cal_power = src.calibration_power_mw or src.pump_power_mw
        rate = calibrate_pair_rate(model, splitter, _budget(cfg, 0.0), src.calibration_baseline_hz)
        mu = rate * interval * 1e-12
        stats = PairStatistics(power_calibration=mu / cal_power, interval_ps=interval)
    stats = stats.at_power(src.pump_power_mw)

    detectors = tuple(DetectorConfig(d.efficiency, d.dark_rate_hz, d.jitter_fwhm_ps, d.dead_time_ns)
                      for d in cfg.detectors)
    return Experiment(
        model=model,
        stats=stats,
        coupler=coupler,
        splitter=splitter,
        budget=_budget(cfg, stats.pair_rate),
        detectors=detectors,
        positions_um=cfg.scan.positions_um,
        duration_s=cfg.acquisition.duration_s,
        window_ps=cfg.acquisition.window_ps,
        pump_power_mw=src.pump_power_mw,
        center_wavelength_nm=src.center_wavelength_nm,
    )


def simulate_point(exp: Experiment, position_um: float, seed) -> tuple[np.ndarray, np.ndarray]:
    """Detector tags (two int64 arrays, ps) for one delay-line position."""
    rng = np.random.default_rng(seed)
    tau = float(delay_ps(position_um))
    overlap = overlap_vs_delay(exp.model, tau)
    bs = exp.splitter
    a0, a1 = exp.budget.arm_transmission
    e0, e1 = exp.budget.detector_efficiency
    rate = exp.stats.pair_rate

    pairs = sample_pair_stream(exp.model, exp.stats, exp.duration_s, seed=rng, keep_fraction=a0 * a1)
    n = len(pairs)
    split, both0, _ = outcome_probabilities(bs, overlap)
    u = rng.random(n)
    is_split = u < split
    to0 = ~is_split & (u < split + both0)
    to1 = ~is_split & ~to0
    t_sq, r_sq = bs.T ** 2, bs.R ** 2
    straight = rng.random(n) < t_sq / (t_sq + r_sq)

    t_sig = pairs.creation_time
    t_idl = pairs.creation_time + tau
    arr0 = np.concatenate([
        t_sig[is_split & straight], t_idl[is_split & ~straight], t_sig[to0], t_idl[to0]])
    arr1 = np.concatenate([
        t_idl[is_split & straight], t_sig[is_split & ~straight], t_sig[to1], t_idl[to1]])
    arr0.sort(kind="stable")
    arr1.sort(kind="stable")

    # photons whose partner was lost before the coupler click independently
    only0 = rate * a0 * (1 - a1)
    only1 = rate * a1 * (1 - a0)
    background = ((only0 * bs.T + only1 * bs.R) * e0, (only0 * bs.R + only1 * bs.T) * e1)
    return simulate_detection((arr0, arr1), exp.detectors, exp.duration_s, seed=rng,
                              background_hz=background)


def _point_job(args):
    exp, position, seed, keep = args
    tags0, tags1 = simulate_point(exp, position, seed)
    count = count_coincidences(tags0, tags1, exp.window_ps, exp.duration_s).count
    return count, (TagStream.from_channels(tags0, tags1) if keep else None)


def run_scan(exp: Experiment, seed, parallel: int = 1, keep_tags: bool = False) -> ScanResult:
    """Simulate every delay position; per-point seeds are spawned from ``seed``.

    The result does not depend on ``parallel``.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seeds = ss.spawn(len(exp.positions_um))
    jobs = [(exp, p, s, keep_tags) for p, s in zip(exp.positions_um, seeds)]
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_point_job, jobs))
    else:
        results = [_point_job(j) for j in jobs]
    counts = tuple(int(c) for c, _ in results)
    rates = np.array(counts, dtype=float) / exp.duration_s
    errs = np.array([rate_error(max(c, 1), exp.duration_s) for c in counts])
    data = ScanDataset(np.asarray(exp.positions_um, dtype=float), rates, errs)
    tags = tuple(t for _, t in results) if keep_tags else ()
    return ScanResult(data, counts, tags)
