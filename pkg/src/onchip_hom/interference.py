"""Two-photon interference at the coupler and the resulting coincidence rates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c
from scipy.optimize import brentq

from .circuit import BeamSplitter
from .source.spectra import GAUSSIAN, SourceSpectralModel, spectral_overlap, two_photon_overlap
from .source.statistics import multipair_factor


@dataclass(frozen=True)
class DelayScan:
    """Free-space delay positions in um; the delay time is position / c."""

    positions_um: tuple

    def __post_init__(self):
        pos = np.asarray(self.positions_um, dtype=float)
        if pos.ndim != 1 or pos.size == 0:
            raise ValueError("delay scan needs at least one position")
        if np.any(np.diff(pos) <= 0):
            raise ValueError("delay positions must be strictly increasing")

    @property
    def delays_ps(self) -> np.ndarray:
        return delay_ps(np.asarray(self.positions_um, dtype=float))


@dataclass(frozen=True)
class RateBudget:
    """Pair flux and everything between the source and the two detectors.

    ``arm_transmission`` is the optical transmission of each input arm up to the
    coupler; detector efficiencies apply at the two coupler outputs.
    """

    pair_rate_hz: float
    arm_transmission: tuple = (1.0, 1.0)
    detector_efficiency: tuple = (1.0, 1.0)
    dark_rate_hz: tuple = (0.0, 0.0)
    window_ps: float = 256.0

    def __post_init__(self):
        if self.pair_rate_hz < 0 or self.window_ps < 0:
            raise ValueError("rates and window must be non-negative")
        for name in ("arm_transmission", "detector_efficiency"):
            if any(not 0 <= x <= 1 for x in getattr(self, name)):
                raise ValueError(f"{name} entries must lie in [0, 1]")
        if any(d < 0 for d in self.dark_rate_hz):
            raise ValueError("dark rates must be non-negative")


def delay_ps(position_um):
    return np.asarray(position_um, dtype=float) * 1e-6 / c * 1e12


def overlap_vs_delay(model: SourceSpectralModel, tau_ps):
    """Two-photon overlap O(tau) = integral f_s(W) f_i*(W) exp(2 i W tau) dW.

    O(0) equals the spectral overlap of the two marginals.
    """
    out = two_photon_overlap(model, np.asarray(tau_ps, dtype=float) * 1e-12) + 0j
    return out if out.ndim else complex(out)


def outcome_probabilities(bs: BeamSplitter, overlap):
    """(split, both at output 0, both at output 1) per pair reaching the coupler."""
    overlap = np.asarray(overlap)
    if np.any(np.abs(overlap) > 1 + 1e-12):
        raise ValueError("overlap modulus must not exceed 1")
    T, R = bs.T, bs.R
    re = np.real(overlap)
    split = T * T + R * R - 2 * T * R * re
    bunched = T * R * (1 + re)
    return split, bunched, bunched


def coincidence_probability(bs: BeamSplitter, overlap):
    """P_cc = T^2 + R^2 - 2 T R Re(O)."""
    split, _, _ = outcome_probabilities(bs, overlap)
    return split if np.ndim(split) else float(split)


def splitter_visibility(bs: BeamSplitter) -> float:
    """2 T R / (T^2 + R^2), the dip depth for identical photons."""
    T, R = bs.T, bs.R
    return 2 * T * R / (T * T + R * R)


def accidental_rate(r1: float, r2: float, window_ps: float) -> float:
    """Uncorrelated coincidences for a full acceptance window ``window_ps``."""
    if r1 < 0 or r2 < 0:
        raise ValueError("rates must be non-negative")
    return r1 * r2 * window_ps * 1e-12


def singles_rates(bs: BeamSplitter, overlap, budget: RateBudget):
    """Expected click rates at the two detectors, dark counts included."""
    a0, a1 = budget.arm_transmission
    e0, e1 = budget.detector_efficiency
    both = budget.pair_rate_hz * a0 * a1
    only0 = budget.pair_rate_hz * a0 * (1 - a1)
    only1 = budget.pair_rate_hz * a1 * (1 - a0)
    split, b0, b1 = outcome_probabilities(bs, overlap)
    T, R = bs.T, bs.R
    s0 = both * (split * e0 + b0 * (1 - (1 - e0) ** 2)) + (only0 * T + only1 * R) * e0
    s1 = both * (split * e1 + b1 * (1 - (1 - e1) ** 2)) + (only0 * R + only1 * T) * e1
    return s0 + budget.dark_rate_hz[0], s1 + budget.dark_rate_hz[1]


def true_coincidence_rate(bs: BeamSplitter, overlap, budget: RateBudget):
    a0, a1 = budget.arm_transmission
    e0, e1 = budget.detector_efficiency
    return budget.pair_rate_hz * a0 * a1 * e0 * e1 * coincidence_probability(bs, overlap)


def hom_curve(model: SourceSpectralModel, bs: BeamSplitter, scan: DelayScan, budget: RateBudget) -> np.ndarray:
    """Expected coincidence rate (Hz) at each delay position, accidentals included."""
    overlap = overlap_vs_delay(model, scan.delays_ps)
    s0, s1 = singles_rates(bs, overlap, budget)
    return true_coincidence_rate(bs, overlap, budget) + s0 * s1 * budget.window_ps * 1e-12


def visibility_prediction(bs: BeamSplitter, spectral: float, mu: float, budget: RateBudget | None = None) -> float:
    """V = [2TR/(T^2+R^2)] O_spec F_mp(mu) F_acc.

    F_mp covers coincidences between photons of different pairs; F_acc the
    remaining accidentals that involve at least one dark count.
    """
    if not 0 <= spectral <= 1:
        raise ValueError("spectral overlap must lie in [0, 1]")
    v = splitter_visibility(bs) * spectral * multipair_factor(mu)
    if budget is not None and any(budget.dark_rate_hz):
        photon_budget = RateBudget(budget.pair_rate_hz, budget.arm_transmission,
                                   budget.detector_efficiency, (0.0, 0.0), budget.window_ps)
        p0, p1 = singles_rates(bs, 0.0, photon_budget)
        d0, d1 = budget.dark_rate_hz
        dark_acc = (d0 * p1 + d1 * p0 + d0 * d1) * budget.window_ps * 1e-12
        true = true_coincidence_rate(bs, 0.0, budget)
        v *= true / (true + dark_acc) if true + dark_acc > 0 else 0.0
    return float(v)


def predicted_visibility_at(model: SourceSpectralModel, pump_nm: float, bs: BeamSplitter,
                            mu: float, budget: RateBudget | None = None) -> float:
    return visibility_prediction(bs, spectral_overlap(model.at_pump(pump_nm)), mu, budget)


def calibrate_detuning_slope(model: SourceSpectralModel, point_a, point_b) -> float:
    """Detuning slope reproducing the visibility ratio of two (pump_nm, V) points.

    Everything except the spectral overlap is independent of pump wavelength,
    so V_a / V_b = O(a) / O(b) fixes the slope for the model's degeneracy point.
    """
    (lam_a, v_a), (lam_b, v_b) = point_a, point_b
    da = abs(lam_a - model.degeneracy_pump_nm)
    db = abs(lam_b - model.degeneracy_pump_nm)
    if da == db:
        raise ValueError("calibration points are equidistant from degeneracy")
    if da < db:
        (lam_a, v_a), (lam_b, v_b) = (lam_b, v_b), (lam_a, v_a)
    target = v_a / v_b
    if not 0 < target < 1:
        raise ValueError("the point farther from degeneracy must have the lower visibility")

    def ratio(slope):
        m = SourceSpectralModel(model.pump_wavelength_nm, model.degeneracy_pump_nm,
                                model.sigma_s, slope, model.kind)
        return spectral_overlap(m.at_pump(lam_a)) / spectral_overlap(m.at_pump(lam_b)) - target

    if model.kind == GAUSSIAN:
        # ln O = -(slope d)^2 / (4 sigma^2) for each point
        far = abs(lam_a - model.degeneracy_pump_nm)
        near = abs(lam_b - model.degeneracy_pump_nm)
        return 2 * model.sigma_s * math.sqrt(-math.log(target) / (far**2 - near**2))
    hi = model.sigma_s
    while ratio(hi) > 0:
        hi *= 2
    return brentq(ratio, 0.0, hi, xtol=1e-6 * model.sigma_s)
