"""Photon-pair number statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class PairStatistics:
    """Pair-generation strength.

    ``mu`` is the mean pair number per counting interval ``interval_ps``;
    ``power_calibration`` is mu per mW of pump power.
    """

    mu: float = 0.0
    power_calibration: float = 0.0
    interval_ps: float = 256.0

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mean pair number must be non-negative")
        if self.power_calibration < 0:
            raise ValueError("power_calibration must be non-negative")
        if not self.interval_ps > 0:
            raise ValueError("interval_ps must be positive")

    @property
    def chi_t(self) -> float:
        return squeezing_from_mu(self.mu)

    @property
    def pair_rate(self) -> float:
        """Pairs per second."""
        return self.mu / (self.interval_ps * 1e-12)

    def at_power(self, pump_power_mw: float) -> "PairStatistics":
        return replace(self, mu=mean_pair_number(pump_power_mw, self))


def mu_from_squeezing(chi_t: float) -> float:
    """mu = 2 sinh^2(chi t)."""
    return 2.0 * math.sinh(chi_t) ** 2


def squeezing_from_mu(mu: float) -> float:
    if mu < 0:
        raise ValueError("mean pair number must be non-negative")
    return math.asinh(math.sqrt(mu / 2.0))


def pair_number_distribution(mu: float, n_max: int) -> np.ndarray:
    """P_n = (1 + n) (mu/2)^n / (1 + mu/2)^(n + 2) for n = 0..n_max."""
    if mu < 0:
        raise ValueError("mean pair number must be non-negative")
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    n = np.arange(n_max + 1)
    half = mu / 2.0
    if half == 0:
        out = np.zeros(n_max + 1)
        out[0] = 1.0
        return out
    log_p = np.log1p(n) + n * math.log(half) - (n + 2) * math.log1p(half)
    return np.exp(log_p)


def mean_pair_number(pump_power_mw: float, stats: PairStatistics) -> float:
    """Low-gain mapping: mu grows linearly with pump power."""
    if pump_power_mw < 0:
        raise ValueError("pump power must be non-negative")
    return stats.power_calibration * pump_power_mw


def multipair_factor(mu: float, n_max: int = 60) -> float:
    """Fraction of in-window coincidences that come from a single pair.

    With n pairs in a counting interval and lossy bucket detectors, each pair
    contributes one own-pair coincidence at half weight (50:50 splitting) and
    every ordered pair of distinct pairs contributes an accidental one at unit
    weight, so the ratio is <n> / (<n> + 2 <n(n-1)>).
    """
    if mu == 0:
        return 1.0
    p = pair_number_distribution(mu, n_max)
    n = np.arange(n_max + 1)
    own = float(np.sum(p * n))
    cross = float(np.sum(p * n * (n - 1)))
    return own / (own + 2.0 * cross)
