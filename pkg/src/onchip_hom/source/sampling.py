"""Monte Carlo realisation of the CW pair source."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c

from .spectra import GAUSSIAN, SourceSpectralModel, marginal_spectrum
from .statistics import PairStatistics


@dataclass(frozen=True)
class PairEvent:
    creation_time: float  # ps
    signal_detuning: float  # rad/s from the degenerate frequency
    idler_detuning: float
    pair_group_id: int


@dataclass(frozen=True)
class PairStream:
    """Column-wise pair events, sorted by creation time."""

    creation_time: np.ndarray
    signal_detuning: np.ndarray
    idler_detuning: np.ndarray
    pair_group_id: np.ndarray

    def __len__(self):
        return len(self.creation_time)

    def __getitem__(self, i) -> PairEvent:
        return PairEvent(
            float(self.creation_time[i]),
            float(self.signal_detuning[i]),
            float(self.idler_detuning[i]),
            int(self.pair_group_id[i]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def pump_detuning(model: SourceSpectralModel) -> float:
    """omega_p - 2 omega_0 in rad/s."""
    return 2 * math.pi * c * (1 / (model.pump_wavelength_nm * 1e-9) - 1 / (model.degeneracy_pump_nm * 1e-9))


def sample_signal_detuning(model: SourceSpectralModel, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw signal detunings (rad/s, relative to half the pump frequency) from |f_s|^2."""
    if model.kind == GAUSSIAN:
        # |f|^2 = exp(-(W - W0)^2 / sigma^2) is a normal law with std sigma / sqrt(2)
        return rng.normal(model.signal_offset, model.sigma_s / math.sqrt(2), size)
    grid, amp = marginal_spectrum(model, arm="signal")
    density = np.abs(amp) ** 2
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    return np.interp(rng.random(size), cdf, grid)


def sample_pair_stream(model: SourceSpectralModel, stats: PairStatistics, duration_s: float,
                       seed=None, keep_fraction: float = 1.0) -> PairStream:
    """Poisson pair arrivals over ``duration_s`` at ``stats.pair_rate``.

    ``keep_fraction`` thins the process (for example to pairs whose photons
    both survive the optical path), which leaves it Poisson.
    """
    if not duration_s > 0:
        raise ValueError("duration must be positive")
    if not 0 <= keep_fraction <= 1:
        raise ValueError("keep_fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    n = int(rng.poisson(stats.pair_rate * keep_fraction * duration_s))
    t = np.sort(rng.random(n)) * (duration_s * 1e12)
    x = sample_signal_detuning(model, n, rng)
    common = 0.5 * pump_detuning(model)
    return PairStream(t, common + x, common - x, np.arange(n, dtype=np.int64))
