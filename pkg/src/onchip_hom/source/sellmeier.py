"""Refractive indices of the nonlinear crystal and the quasi-phase-matching condition."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.constants import c
from scipy.optimize import brentq

from ..errors import DomainError, FormatError

_TERMS = ("A", "B1", "C1", "B2", "C2", "D")
_THERMO = ("n1_a0", "n1_a1", "n1_a2", "n1_a3", "n2_b0", "n2_b1", "n2_b2", "n2_b3")


@dataclass(frozen=True)
class SellmeierSet:
    """Coefficients of one crystal axis.

    ``n^2 = A + B1/(1 - C1/l^2) + B2/(1 - C2/l^2) - D l^2`` with ``l`` in
    micrometres, plus a quadratic temperature correction about ``t_ref_c``.
    """

    A: float = 1.0
    B1: float = 0.0
    C1: float = 0.0
    B2: float = 0.0
    C2: float = 0.0
    D: float = 0.0
    n1: tuple = (0.0, 0.0, 0.0, 0.0)
    n2: tuple = (0.0, 0.0, 0.0, 0.0)
    t_ref_c: float = 25.0
    lambda_min_um: float = 0.0
    lambda_max_um: float = math.inf

    @classmethod
    def vacuum(cls) -> "SellmeierSet":
        return cls()


@dataclass(frozen=True)
class CrystalConfig:
    poling_period_um: float
    length_mm: float
    temperature_c: float
    axes: dict = field(default_factory=dict)
    pump_axis: str = "y"
    signal_axis: str = "y"
    idler_axis: str = "z"
    # sign of the grating harmonic: Delta k carries -qpm_order * 2 pi / Lambda
    qpm_order: int = 1

    def __post_init__(self):
        if not self.poling_period_um > 0:
            raise ValueError("poling period must be positive")
        if not self.length_mm > 0:
            raise ValueError("crystal length must be positive")
        if self.qpm_order not in (1, -1):
            raise ValueError("qpm_order must be +1 or -1")
        for role in (self.pump_axis, self.signal_axis, self.idler_axis):
            if role not in self.axes:
                raise ValueError(f"no Sellmeier set for axis {role!r}")


def parse_sellmeier_text(text: str, origin: str = "<string>") -> dict[str, SellmeierSet]:
    """Parse ``axis.key = value`` lines into one :class:`SellmeierSet` per axis."""
    raw: dict[str, dict[str, float]] = {}
    offset = 0
    for lineno, line in enumerate(text.splitlines(keepends=True), start=1):
        stripped = line.split("#", 1)[0].strip()
        start = offset
        offset += len(line.encode())
        if not stripped:
            continue
        key, sep, value = stripped.partition("=")
        axis, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise FormatError(f"{origin}:{lineno}: expected 'axis.name = value'", start)
        try:
            raw.setdefault(axis, {})[name.strip()] = float(value)
        except ValueError:
            raise FormatError(f"{origin}:{lineno}: {value.strip()!r} is not a number", start) from None

    sets = {}
    for axis, entries in raw.items():
        for required in ("lambda_min_um", "lambda_max_um"):
            if required not in entries:
                raise FormatError(f"{origin}: axis {axis!r} lacks {required}")
        unknown = set(entries) - set(_TERMS) - set(_THERMO) - {"t_ref_c", "lambda_min_um", "lambda_max_um"}
        if unknown:
            raise FormatError(f"{origin}: axis {axis!r} has unknown keys {sorted(unknown)}")
        sets[axis] = SellmeierSet(
            **{k: entries.get(k, 0.0) for k in _TERMS if k != "A"},
            A=entries.get("A", 1.0),
            n1=tuple(entries.get(f"n1_a{m}", 0.0) for m in range(4)),
            n2=tuple(entries.get(f"n2_b{m}", 0.0) for m in range(4)),
            t_ref_c=entries.get("t_ref_c", 25.0),
            lambda_min_um=entries["lambda_min_um"],
            lambda_max_um=entries["lambda_max_um"],
        )
    return sets


def load_sellmeier(path: str | Path | None = None) -> dict[str, SellmeierSet]:
    """Load a coefficient file; the bundled KTP set when ``path`` is None."""
    if path is None:
        text = resources.files(__package__).joinpath("data/ktp_sellmeier.txt").read_text()
        return parse_sellmeier_text(text, "ktp_sellmeier.txt")
    path = Path(path)
    return parse_sellmeier_text(path.read_text(), str(path))


def sellmeier_index(wavelength_nm, temperature_c, coeffs: SellmeierSet):
    """Refractive index at ``wavelength_nm`` (scalar or array) and temperature."""
    lam = np.asarray(wavelength_nm, dtype=float) * 1e-3
    if np.any(lam < coeffs.lambda_min_um) or np.any(lam > coeffs.lambda_max_um):
        raise DomainError(
            f"wavelength outside Sellmeier validity range "
            f"[{coeffs.lambda_min_um * 1e3:g}, {coeffs.lambda_max_um * 1e3:g}] nm"
        )
    l2 = lam**2
    n2 = coeffs.A - coeffs.D * l2
    if coeffs.B1:
        n2 = n2 + coeffs.B1 / (1.0 - coeffs.C1 / l2)
    if coeffs.B2:
        n2 = n2 + coeffs.B2 / (1.0 - coeffs.C2 / l2)
    n = np.sqrt(n2)
    dt = temperature_c - coeffs.t_ref_c
    if dt:
        inv = 1.0 / lam
        first = sum(a * inv**m for m, a in enumerate(coeffs.n1))
        second = sum(b * inv**m for m, b in enumerate(coeffs.n2))
        n = n + first * dt + second * dt**2
    return n if n.ndim else float(n)


def wavenumber(wavelength_nm, temperature_c, coeffs: SellmeierSet):
    """k = n omega / c in rad/m."""
    lam_m = np.asarray(wavelength_nm, dtype=float) * 1e-9
    return 2 * np.pi * sellmeier_index(wavelength_nm, temperature_c, coeffs) / lam_m


def phase_mismatch(signal_nm, idler_nm, crystal: CrystalConfig):
    """Delta k = k_p - k_s - k_i - 2 pi / Lambda in rad/m, pump fixed by energy conservation."""
    signal_nm = np.asarray(signal_nm, dtype=float)
    idler_nm = np.asarray(idler_nm, dtype=float)
    pump_nm = 1.0 / (1.0 / signal_nm + 1.0 / idler_nm)
    T = crystal.temperature_c
    ax = crystal.axes
    dk = (
        wavenumber(pump_nm, T, ax[crystal.pump_axis])
        - wavenumber(signal_nm, T, ax[crystal.signal_axis])
        - wavenumber(idler_nm, T, ax[crystal.idler_axis])
        - crystal.qpm_order * 2 * np.pi / (crystal.poling_period_um * 1e-6)
    )
    return dk if np.ndim(dk) else float(dk)


def phase_matched_crystal(degeneracy_pump_nm: float, length_mm: float, temperature_c: float,
                          axes: dict, pump_axis="y", signal_axis="y", idler_axis="z") -> CrystalConfig:
    """Crystal whose poling period phase matches degenerate conversion of ``degeneracy_pump_nm``."""
    s = 2.0 * degeneracy_pump_nm
    mismatch = (
        wavenumber(degeneracy_pump_nm, temperature_c, axes[pump_axis])
        - wavenumber(s, temperature_c, axes[signal_axis])
        - wavenumber(s, temperature_c, axes[idler_axis])
    )
    return CrystalConfig(
        poling_period_um=abs(2 * np.pi / mismatch) * 1e6,
        length_mm=length_mm,
        temperature_c=temperature_c,
        axes=dict(axes),
        pump_axis=pump_axis,
        signal_axis=signal_axis,
        idler_axis=idler_axis,
        qpm_order=1 if mismatch > 0 else -1,
    )


def group_index(wavelength_nm: float, temperature_c: float, coeffs: SellmeierSet, step_nm=0.01) -> float:
    """n_g = n - lambda dn/dlambda by central differences."""
    up = sellmeier_index(wavelength_nm + step_nm, temperature_c, coeffs)
    down = sellmeier_index(wavelength_nm - step_nm, temperature_c, coeffs)
    n = sellmeier_index(wavelength_nm, temperature_c, coeffs)
    return n - wavelength_nm * (up - down) / (2 * step_nm)


def detuning_slope_from_dispersion(crystal: CrystalConfig, degeneracy_pump_nm: float) -> float:
    """Signal-idler separation (rad/s) per nm of pump detuning from group indices.

    Linearising Delta k about the degenerate point with omega_p = omega_s + omega_i gives
    Omega_s - Omega_i = (2 k'_p - k'_s - k'_i) / (k'_s - k'_i) * Omega_p.
    """
    T = crystal.temperature_c
    ax = crystal.axes
    s = 2.0 * degeneracy_pump_nm
    kp = group_index(degeneracy_pump_nm, T, ax[crystal.pump_axis]) / c
    ks = group_index(s, T, ax[crystal.signal_axis]) / c
    ki = group_index(s, T, ax[crystal.idler_axis]) / c
    if ks == ki:
        raise DomainError("signal and idler group velocities coincide; separation is unbounded")
    omega_per_nm = 2 * np.pi * c / (degeneracy_pump_nm * 1e-9) ** 2 * 1e-9
    return abs((2 * kp - ks - ki) / (ks - ki)) * omega_per_nm


def phase_matched_wavelength(crystal: CrystalConfig, lo_nm: float, hi_nm: float) -> float:
    """Fundamental wavelength whose degenerate conversion is phase matched (root of Delta k)."""
    return brentq(lambda lam: phase_mismatch(lam, lam, crystal), lo_nm, hi_nm, xtol=1e-12)
