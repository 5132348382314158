"""Single-photon detector model: efficiency, dark counts, timing jitter, dead time."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

FWHM_PER_SIGMA = 2 * math.sqrt(2 * math.log(2))


@dataclass(frozen=True)
class DetectorConfig:
    efficiency: float = 0.115
    dark_rate_hz: float = 0.0
    jitter_fwhm_ps: float = 50.0
    dead_time_ns: float = 10.0

    def __post_init__(self):
        if not 0 <= self.efficiency <= 1:
            raise ValueError("efficiency must lie in [0, 1]")
        for name in ("dark_rate_hz", "jitter_fwhm_ps", "dead_time_ns"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@numba.njit(cache=True)
def _dead_time_mask(t, dead):
    keep = np.zeros(t.size, dtype=np.bool_)
    last = np.int64(0)
    have = False
    for k in range(t.size):
        if not have or t[k] - last >= dead:
            keep[k] = True
            last = t[k]
            have = True
    return keep


def apply_dead_time(timestamps: np.ndarray, dead_time_ps: int) -> np.ndarray:
    """Drop tags closer than ``dead_time_ps`` to the previously accepted tag."""
    if timestamps.size < 2:
        return timestamps
    diffs = np.diff(timestamps)
    if dead_time_ps <= 0:
        # coincident timestamps would break strict ordering
        return timestamps[np.concatenate([[True], diffs > 0])]
    if diffs.min() >= dead_time_ps:
        return timestamps
    return timestamps[_dead_time_mask(timestamps, np.int64(dead_time_ps))]


def detect_channel(arrivals_ps, cfg: DetectorConfig, duration_s: float, rng: np.random.Generator,
                   background_hz: float = 0.0) -> np.ndarray:
    """Integer-picosecond click times for one detector.

    ``arrivals_ps`` are photon arrival times (sorted). ``background_hz`` adds
    uncorrelated clicks on top of the dark counts, e.g. detected photons whose
    partner never reached the chip; it is a click rate, efficiency already applied.
    """
    arrivals = np.asarray(arrivals_ps, dtype=float)
    if arrivals.size and np.any(np.diff(arrivals) < 0):
        raise ValueError("arrival times must be sorted")
    span_ps = duration_s * 1e12
    kept = arrivals[rng.random(arrivals.size) < cfg.efficiency]
    if cfg.jitter_fwhm_ps > 0:
        kept = kept + rng.normal(0.0, cfg.jitter_fwhm_ps / FWHM_PER_SIGMA, kept.size)
    kept = np.rint(kept[(kept >= 0) & (kept < span_ps)]).astype(np.int64)
    kept.sort(kind="stable")
    n_extra = int(rng.poisson((cfg.dark_rate_hz + background_hz) * duration_s))
    extra = sorted_uniform(n_extra, span_ps, rng)
    np.rint(extra, out=extra)
    extra = extra.astype(np.int64)
    extra = extra[extra < span_ps]
    times = np.insert(extra, np.searchsorted(extra, kept, side="right"), kept)
    return apply_dead_time(times, int(round(cfg.dead_time_ns * 1e3)))


def sorted_uniform(n: int, span: float, rng: np.random.Generator) -> np.ndarray:
    """n sorted uniform draws on [0, span) without sorting.

    Partial sums of n + 1 unit exponentials, divided by their total, are
    distributed as the order statistics of n uniforms.
    """
    if n == 0:
        return np.zeros(0)
    s = rng.standard_exponential(n + 1)
    np.cumsum(s, out=s)
    s *= span / s[-1]
    return s[:-1]


def simulate_detection(arrivals, detectors, duration_s: float, seed=None, background_hz=(0.0, 0.0)):
    """Turn photon arrivals on two channels into two sorted tag sequences.

    ``arrivals`` holds one sorted array of arrival times (ps) per channel and
    ``detectors`` one :class:`DetectorConfig` per channel.
    """
    rng = np.random.default_rng(seed)
    return tuple(
        detect_channel(a, cfg, duration_s, rng, bg)
        for a, cfg, bg in zip(arrivals, detectors, background_hz)
    )
