"""Phase-matching functions and the signal/idler spectra of a CW-pumped source.

With a monochromatic pump the joint spectrum collapses onto the line
omega_i = omega_p - omega_s, so each photon is described by a one-dimensional
amplitude over its detuning Omega (rad/s) from half the pump frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.constants import c

from .sellmeier import CrystalConfig, phase_mismatch

GAUSSIAN = "gaussian-approx"
SINC = "sinc"
KINDS = (GAUSSIAN, SINC)

# exp(-gamma x^2) has the same FWHM as sin(x)/x
SINC_GAUSS_GAMMA = 0.193


@dataclass(frozen=True)
class SourceSpectralModel:
    pump_wavelength_nm: float
    degeneracy_pump_nm: float
    sigma_s: float
    detuning_slope: float
    kind: str = GAUSSIAN

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"phase-matching kind must be one of {KINDS}, got {self.kind!r}")
        if not self.sigma_s > 0:
            raise ValueError("sigma_s must be positive")

    @property
    def signal_offset(self) -> float:
        """Centre of the signal spectrum (rad/s); the idler sits at the negative."""
        return 0.5 * self.detuning_slope * (self.pump_wavelength_nm - self.degeneracy_pump_nm)

    def at_pump(self, pump_wavelength_nm: float) -> "SourceSpectralModel":
        return replace(self, pump_wavelength_nm=pump_wavelength_nm)


def sigma_from_bandwidth(bandwidth_nm: float, center_nm: float) -> float:
    """Amplitude width sigma_s (rad/s) whose |f|^2 has the given FWHM in wavelength."""
    d_omega = 2 * math.pi * c * bandwidth_nm * 1e-9 / (center_nm * 1e-9) ** 2
    return d_omega / (2 * math.sqrt(math.log(2)))


def bandwidth_from_sigma(sigma_s: float, center_nm: float) -> float:
    d_omega = 2 * math.sqrt(math.log(2)) * sigma_s
    return d_omega * (center_nm * 1e-9) ** 2 / (2 * math.pi * c) * 1e9


def phase_matching_amplitude(dk, length_mm: float, kind: str = SINC):
    """Phase-matching amplitude for mismatch ``dk`` (rad/m) over ``length_mm``."""
    x = np.asarray(dk, dtype=float) * length_mm * 1e-3 / 2
    if kind == SINC:
        out = np.sinc(x / np.pi)
    elif kind == GAUSSIAN:
        out = np.exp(-SINC_GAUSS_GAMMA * x**2)
    else:
        raise ValueError(f"phase-matching kind must be one of {KINDS}, got {kind!r}")
    return out.astype(complex) if out.ndim else complex(out)


def _profile(omega, sigma_s, kind):
    if kind == GAUSSIAN:
        return np.exp(-(omega**2) / (2 * sigma_s**2))
    # sinc argument chosen so that the Gaussian kind is its gamma approximation
    x = omega / (sigma_s * math.sqrt(2 * SINC_GAUSS_GAMMA))
    return np.sinc(x / np.pi)


def detuning_grid(model: SourceSpectralModel, points: int = 4097, half_span_sigma: float | None = None):
    """Uniform detuning grid covering both spectra with generous margins."""
    if half_span_sigma is None:
        half_span_sigma = 10.0 if model.kind == GAUSSIAN else 200.0
    half = abs(model.signal_offset) + half_span_sigma * model.sigma_s
    return np.linspace(-half, half, points)


def _check_grid(grid, sigma_s):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or grid[-1] <= grid[0]:
        raise ValueError("detuning grid needs at least two increasing points")
    if grid.size < 256:
        raise ValueError(f"detuning grid has {grid.size} points, at least 256 required")
    if grid[-1] - grid[0] < 6 * sigma_s:
        raise ValueError("detuning grid must span at least 6 sigma_s")
    return grid


def marginal_spectrum(model: SourceSpectralModel, grid=None, arm: str = "signal"):
    """Unit-normalised amplitude of one photon sampled on ``grid``.

    Returns ``(grid, amplitude)`` with ``trapz(|amplitude|^2, grid) == 1``.
    """
    grid = detuning_grid(model) if grid is None else grid
    grid = _check_grid(grid, model.sigma_s)
    if arm == "signal":
        centre = model.signal_offset
    elif arm == "idler":
        centre = -model.signal_offset
    else:
        raise ValueError("arm must be 'signal' or 'idler'")
    amp = _profile(grid - centre, model.sigma_s, model.kind).astype(complex)
    norm = np.trapezoid(np.abs(amp) ** 2, grid)
    return grid, amp / math.sqrt(norm)


def two_photon_overlap(model: SourceSpectralModel, tau_s):
    """Closed-form O(tau) = integral f_s(W) f_i*(W) exp(2 i W tau) dW, tau in seconds.

    Both kinds give a real result. For sin(aW)/(aW) amplitudes each photon is a
    rectangle of half-length a in time, so the overlap vanishes for |tau| >= a.
    """
    tau = np.abs(np.asarray(tau_s, dtype=float))
    d = model.signal_offset
    if model.kind == GAUSSIAN:
        return np.exp(-(d / model.sigma_s) ** 2 - (model.sigma_s * tau) ** 2)
    a = 1.0 / (model.sigma_s * math.sqrt(2 * SINC_GAUSS_GAMMA))
    rest = np.clip(a - tau, 0.0, None)
    return rest / a * np.sinc(2 * d * rest / np.pi)


def spectral_overlap(model: SourceSpectralModel, grid=None) -> float:
    """Modulus of the signal/idler amplitude overlap, in [0, 1].

    This is the factor by which spectral distinguishability scales the
    two-photon interference visibility of an energy-anticorrelated pair.
    Exact unless a quadrature ``grid`` is given.
    """
    if grid is None:
        return float(min(1.0, abs(two_photon_overlap(model, 0.0))))
    grid, fs = marginal_spectrum(model, grid, "signal")
    _, fi = marginal_spectrum(model, grid, "idler")
    return float(min(1.0, abs(np.trapezoid(fs * np.conj(fi), grid))))


def shg_tuning_curve(fundamental_nm, crystal: CrystalConfig):
    """Second-harmonic efficiency vs. fundamental wavelength, 1 at perfect phase matching."""
    lam = np.asarray(fundamental_nm, dtype=float)
    dk = phase_mismatch(lam, lam, crystal)
    return np.abs(phase_matching_amplitude(dk, crystal.length_mm, SINC)) ** 2
