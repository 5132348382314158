"""Directional-coupler beam splitter: coupled-mode splitting, calibration and losses."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

GAP_RANGE_NM = (150.0, 700.0)
EXTINCTION_CAP_DB = 80.0


@dataclass(frozen=True)
class CouplerGeometry:
    gap_nm: float
    length_um: float
    width_um: float = 1.0
    height_nm: float = 330.0
    wavelength_nm: float = 1550.0
    # as-fabricated multiplier on the coupling coefficient (process drift after calibration)
    coupling_factor: float = 1.0

    def __post_init__(self):
        for name in ("gap_nm", "width_um", "height_nm", "wavelength_nm", "coupling_factor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.length_um < 0:
            raise ValueError("length_um must be non-negative")


@dataclass(frozen=True)
class CouplerModel:
    """Exponential gap dependence of the supermode coupling coefficient.

    kappa(gap) = kappa0 * exp(-(gap - reference_gap) / gap_decay), in rad/um,
    at the calibration wavelength.
    """

    kappa0: float
    gap_decay_nm: float
    reference_gap_nm: float
    wavelength_nm: float = 1550.0

    def __post_init__(self):
        if not self.kappa0 > 0:
            raise ValueError("kappa0 must be positive")
        if not self.gap_decay_nm > 0:
            raise ValueError("gap_decay must be positive")

    def kappa(self, gap_nm: float) -> float:
        _check_gap(gap_nm)
        return self.kappa0 * math.exp(-(gap_nm - self.reference_gap_nm) / self.gap_decay_nm)

    def half_split_length(self, gap_nm: float) -> float:
        """Coupler length (um) giving 50:50 at ``gap_nm``."""
        return coupling_length(self.wavelength_nm, delta_n_from_gap(gap_nm, self))

    def half_split_gap(self, length_um: float) -> float:
        """Gap (nm) giving 50:50 at coupler length ``length_um``."""
        kappa = math.pi / (4 * length_um)
        return self.reference_gap_nm - self.gap_decay_nm * math.log(kappa / self.kappa0)


@dataclass(frozen=True)
class BeamSplitter:
    t: complex
    r: complex

    @property
    def T(self) -> float:
        return abs(self.t) ** 2

    @property
    def R(self) -> float:
        return abs(self.r) ** 2

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.t, self.r], [self.r, self.t]], dtype=complex)


@dataclass(frozen=True)
class LossBudget:
    """Insertion losses in dB along one input arm."""

    facet_db: float = 0.0
    tap_db: float = 0.0
    propagation_db: float = 0.0
    offchip_db: float = 0.0

    def __post_init__(self):
        for name in ("facet_db", "tap_db", "propagation_db", "offchip_db"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def total_db(self, path=None) -> float:
        names = ("facet", "tap", "propagation", "offchip") if path is None else path
        total = 0.0
        for name in names:
            try:
                total += getattr(self, f"{name}_db")
            except AttributeError:
                raise ValueError(f"unknown loss element {name!r}") from None
        return total

    def transmission(self, path=None) -> float:
        return 10 ** (-self.total_db(path) / 10)


def _check_gap(gap_nm):
    lo, hi = GAP_RANGE_NM
    if not lo <= gap_nm <= hi:
        raise DomainError(f"gap {gap_nm:g} nm outside calibrated range [{lo:g}, {hi:g}] nm")


def coupling_length(wavelength_nm: float, delta_n: float) -> float:
    """L_c = lambda / (4 delta_n), returned in um."""
    if not delta_n > 0:
        raise ValueError("index difference must be positive")
    return wavelength_nm / (4 * delta_n) * 1e-3


def delta_n_from_gap(gap_nm: float, model: CouplerModel) -> float:
    """Supermode index difference at ``gap_nm``: delta_n = lambda kappa / pi."""
    return model.wavelength_nm * 1e-3 * model.kappa(gap_nm) / math.pi


def splitting_ratio(geom: CouplerGeometry, model: CouplerModel) -> tuple[float, float]:
    """(T, R) power fractions; the cross-coupled fraction is R = sin^2(kappa L).

    Evaluated as 1/2 + 1/2 sin(pi/2 (L/L_c - 1)) so that L = L_c gives 0.5 exactly.
    """
    dn = delta_n_from_gap(geom.gap_nm, model) * geom.coupling_factor
    ratio = geom.length_um / coupling_length(geom.wavelength_nm, dn)
    cross = 0.5 + 0.5 * math.sin(0.5 * math.pi * (ratio - 1.0))
    return 1.0 - cross, cross


def bs_matrix(T: float, R: float) -> BeamSplitter:
    """Lossless splitter with t = sqrt(T) and r = i sqrt(R)."""
    if not (0 <= T <= 1 and 0 <= R <= 1) or abs(T + R - 1) > 1e-9:
        raise ValueError(f"splitting fractions must be in [0, 1] and sum to 1, got ({T}, {R})")
    return BeamSplitter(complex(math.sqrt(T)), 1j * math.sqrt(R))


def mz_extinction(c1, c2, cap_db: float = EXTINCTION_CAP_DB) -> float:
    """Fringe extinction (dB) at the bar output of a two-coupler Mach-Zehnder.

    The output amplitude is u2[0,0] u1[0,0] + u2[0,1] e^{i phi} u1[1,0]; its
    power swings between (a + b)^2 and (a - b)^2 as phi is scanned.
    """
    u1 = bs_matrix(*c1).matrix
    u2 = bs_matrix(*c2).matrix
    a = abs(u2[0, 0] * u1[0, 0])
    b = abs(u2[0, 1] * u1[1, 0])
    hi, lo = (a + b) ** 2, (a - b) ** 2
    if lo <= hi * 10 ** (-cap_db / 10):
        return cap_db
    return 10 * math.log10(hi / lo)


def apply_loss(value, budget: LossBudget, path=None):
    """Attenuate a rate or probability by the losses named in ``path`` (all by default)."""
    return value * budget.transmission(path)


def calibrate_coupler(anchors, wavelength_nm: float = 1550.0, reference_gap_nm: float | None = None) -> CouplerModel:
    """Fit the exponential coupling model to observed (gap_nm, 50:50 length_um) anchors.

    Two anchors determine the model exactly; more are fitted by least squares
    in log(kappa).
    """
    anchors = [(float(g), float(l)) for g, l in anchors]
    if len(anchors) < 2:
        raise ValueError("at least two (gap, length) anchors are required")
    gaps = np.array([g for g, _ in anchors])
    lengths = np.array([l for _, l in anchors])
    if np.any(lengths <= 0):
        raise ValueError("anchor lengths must be positive")
    for g in gaps:
        _check_gap(g)
    if np.ptp(gaps) == 0:
        raise ValueError("anchors are degenerate: all share the same gap")
    if reference_gap_nm is None:
        reference_gap_nm = float(gaps[0])
    log_kappa = np.log(np.pi / (4 * lengths))
    A = np.column_stack([np.ones_like(gaps), gaps - reference_gap_nm])
    (intercept, slope), *_ = np.linalg.lstsq(A, log_kappa, rcond=None)
    if slope >= 0:
        raise ValueError("anchors imply coupling that grows with gap; no decaying model fits")
    return CouplerModel(
        kappa0=float(np.exp(intercept)),
        gap_decay_nm=float(-1.0 / slope),
        reference_gap_nm=float(reference_gap_nm),
        wavelength_nm=wavelength_nm,
    )
