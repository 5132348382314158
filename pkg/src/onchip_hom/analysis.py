"""Dip fitting, derived coherence quantities and scan/report files."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.constants import c

from .errors import FitError, FormatError

FWHM_PER_SIGMA = 2 * math.sqrt(2 * math.log(2))
TIME_BANDWIDTH = 2 * math.log(2) / math.pi
V_SOFT_MAX = 1.05
SCAN_HEADER = ("delay_um", "rate_hz", "err_hz")

XTOL = 1e-9
MAX_ITER = 200


@dataclass(frozen=True)
class ScanDataset:
    positions_um: np.ndarray
    rates_hz: np.ndarray
    errors_hz: np.ndarray

    def __post_init__(self):
        for name in ("positions_um", "rates_hz", "errors_hz"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not self.positions_um.shape == self.rates_hz.shape == self.errors_hz.shape:
            raise ValueError("positions, rates and errors must have equal lengths")
        if self.positions_um.ndim != 1:
            raise ValueError("scan columns must be one-dimensional")
        if np.any(self.errors_hz < 0):
            raise ValueError("rate errors must be non-negative")

    def __len__(self):
        return self.positions_um.size


@dataclass(frozen=True)
class FitResult:
    c_n: float
    visibility: float
    d0_um: float
    sigma_um: float
    covariance: np.ndarray
    chi2_dof: float
    iterations: int = 0

    PARAMS = ("c_n", "visibility", "d0_um", "sigma_um")

    @property
    def params(self) -> np.ndarray:
        return np.array([self.c_n, self.visibility, self.d0_um, self.sigma_um])

    @property
    def errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))

    @property
    def visibility_flagged(self) -> bool:
        """True when V leaves the physically plausible range [0, 1.05]."""
        return not 0 <= self.visibility <= V_SOFT_MAX

    def confidence_interval(self, name: str, z: float = 1.959963984540054):
        k = self.PARAMS.index(name)
        value = self.params[k]
        return value - z * self.errors[k], value + z * self.errors[k]


@dataclass(frozen=True)
class DerivedQuantities:
    fwhm_um: float
    coherence_time_ps: float
    bandwidth_nm: float
    fwhm_err_um: float = 0.0
    coherence_time_err_ps: float = 0.0
    bandwidth_err_nm: float = 0.0


@dataclass(frozen=True)
class GaussianPeakFit:
    center: float
    width: float
    peak: float
    covariance: np.ndarray
    chi2_dof: float
    threshold: float = 0.9

    @property
    def errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))

    @property
    def span_above_threshold(self) -> float:
        """Full width of the region where the fitted curve exceeds ``threshold``."""
        if self.peak <= self.threshold:
            return 0.0
        return 2 * abs(self.width) * math.sqrt(2 * math.log(self.peak / self.threshold))

    def __call__(self, x):
        return _gauss_peak(np.asarray(x, dtype=float), np.array([self.peak, self.center, self.width]))


def rate_error(count: int, duration_s: float) -> float:
    """Poisson standard deviation of a rate estimated from ``count`` events."""
    if count < 0:
        raise ValueError("count must be non-negative")
    if not duration_s > 0:
        raise ValueError("duration must be positive")
    return math.sqrt(count) / duration_s


def hom_model(d, p):
    c_n, v, d0, s = p
    return c_n * (1 - v * np.exp(-((d - d0) ** 2) / (2 * s * s)))


def _hom_jacobian(d, p):
    c_n, v, d0, s = p
    u = d - d0
    g = np.exp(-u * u / (2 * s * s))
    return np.column_stack([
        1 - v * g,
        -c_n * g,
        -c_n * v * g * u / (s * s),
        -c_n * v * g * u * u / (s ** 3),
    ])


def _gauss_peak(x, p):
    a, x0, s = p
    return a * np.exp(-((x - x0) ** 2) / (2 * s * s))


def _gauss_peak_jacobian(x, p):
    a, x0, s = p
    u = x - x0
    g = np.exp(-u * u / (2 * s * s))
    return np.column_stack([g, a * g * u / (s * s), a * g * u * u / s ** 3])


def levenberg_marquardt(model, jacobian, p0, x, y, sigma, scale=None,
                        xtol: float = XTOL, max_iter: int = MAX_ITER):
    """Weighted least squares by damped Gauss-Newton.

    Minimises sum(((y - model(x, p)) / sigma)^2). The damping term is
    lambda * diag(J^T W J); lambda shrinks tenfold after an accepted step and
    grows tenfold after a rejected one. Converged when every component of the
    step is below ``xtol`` relative to max(|p_i|, scale_i). Returns
    (p, covariance, chi2, iterations); covariance is (J^T W J)^-1 at the optimum.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = 1.0 / np.asarray(sigma, dtype=float)
    p = np.array(p0, dtype=float)
    scale = np.zeros_like(p) if scale is None else np.abs(np.asarray(scale, dtype=float))

    def chi2_of(q):
        r = (y - model(x, q)) * w
        return float(r @ r)

    chi2 = chi2_of(p)
    if not np.isfinite(chi2):
        raise FitError("initial parameters give a non-finite residual", last=p)
    lam = 1e-3
    for it in range(1, max_iter + 1):
        jw = jacobian(x, p) * w[:, None]
        rw = (y - model(x, p)) * w
        a = jw.T @ jw
        g = jw.T @ rw
        diag = np.diag(a).copy()
        diag[diag == 0] = 1.0
        while True:
            try:
                step = np.linalg.solve(a + lam * np.diag(diag), g)
            except np.linalg.LinAlgError:
                step = None
            if step is not None:
                trial = p + step
                chi2_trial = chi2_of(trial)
                if np.isfinite(chi2_trial) and chi2_trial <= chi2:
                    break
            lam *= 10
            if lam > 1e16:
                # no downhill direction left: the current point is the optimum
                return p, _covariance(jacobian, x, p, w), chi2, it
        p, chi2 = trial, chi2_trial
        lam = max(lam / 10, 1e-12)
        if np.all(np.abs(step) <= xtol * np.maximum(np.abs(p), scale)):
            p, chi2 = _polish(model, jacobian, p, chi2, x, y, w, chi2_of)
            return p, _covariance(jacobian, x, p, w), chi2, it
    raise FitError(f"no convergence after {max_iter} iterations", last=p)


def _polish(model, jacobian, p, chi2, x, y, w, chi2_of, steps: int = 3):
    # a few undamped Gauss-Newton steps so the optimum does not depend on the path taken
    for _ in range(steps):
        jw = jacobian(x, p) * w[:, None]
        rw = (y - model(x, p)) * w
        try:
            trial = p + np.linalg.lstsq(jw, rw, rcond=None)[0]
        except np.linalg.LinAlgError:
            break
        chi2_trial = chi2_of(trial)
        # near the optimum chi2 is flat to rounding; the step itself is still informative
        if not chi2_trial <= chi2 * (1 + 1e-12) + 1e-300:
            break
        p, chi2 = trial, chi2_trial
    return p, chi2


def _covariance(jacobian, x, p, w):
    jw = jacobian(x, p) * w[:, None]
    cov = np.linalg.pinv(jw.T @ jw)
    return 0.5 * (cov + cov.T)


def initial_guess(data: ScanDataset) -> np.ndarray:
    """Starting point (C_n, V, d0, sigma) read off the raw scan."""
    order = np.argsort(data.positions_um)
    d = data.positions_um[order]
    r = data.rates_hz[order]
    n = d.size
    q = max(1, n // 4)
    c_n = float(np.median(np.concatenate([r[:q], r[-q:]])))
    k = int(np.argmin(r))
    depth = c_n - r[k]
    noise = data.errors_hz[order][k]
    if not c_n > 0 or depth <= max(3 * noise, 1e-12 * abs(c_n)):
        raise FitError("no dip detected", last=None)
    half = c_n - depth / 2
    left = _crossing(d[: k + 1][::-1], r[: k + 1][::-1], half)
    right = _crossing(d[k:], r[k:], half)
    if left is None and right is None:
        sigma = (d[-1] - d[0]) / 8
    elif left is None or right is None:
        sigma = abs((right if left is None else left) - d[k])
    else:
        sigma = 0.5 * (right - left)
    return np.array([c_n, 1 - r[k] / c_n, d[k], sigma])


def _crossing(d, r, level):
    # first point walking away from the minimum where the rate rises above level
    above = np.flatnonzero(r >= level)
    if above.size == 0 or above[0] == 0:
        return None
    j = above[0]
    t = (level - r[j - 1]) / (r[j] - r[j - 1])
    return d[j - 1] + t * (d[j] - d[j - 1])


def fit_hom_dip(data: ScanDataset, init=None) -> FitResult:
    """Weighted fit of C = C_n (1 - V exp(-(d - d0)^2 / (2 sigma^2)))."""
    if len(data) < 8:
        raise ValueError("at least 8 scan points are required")
    if np.any(data.errors_hz <= 0):
        raise ValueError("rate errors must be positive")
    p0 = initial_guess(data) if init is None else np.asarray(init, dtype=float)
    scale = np.array([abs(p0[0]), 1.0, abs(p0[3]), abs(p0[3])])
    p, cov, chi2, it = levenberg_marquardt(hom_model, _hom_jacobian, p0, data.positions_um,
                                           data.rates_hz, data.errors_hz, scale)
    dof = max(len(data) - 4, 1)
    return FitResult(float(p[0]), float(p[1]), float(p[2]), float(abs(p[3])), cov, chi2 / dof, it)


def derive_quantities(fit: FitResult, wavelength_nm: float) -> DerivedQuantities:
    """FWHM, coherence time and Gaussian-limited bandwidth from the fitted sigma."""
    if not fit.sigma_um > 0:
        raise ValueError("sigma must be positive")
    sigma_err = float(fit.errors[3])
    w = FWHM_PER_SIGMA * fit.sigma_um
    tau = w * 1e-6 / c * 1e12
    lam = wavelength_nm * 1e-9
    bw = TIME_BANDWIDTH * lam * lam / (c * tau * 1e-12) * 1e9
    rel = sigma_err / fit.sigma_um
    return DerivedQuantities(w, tau, bw, w * rel, tau * rel, bw * rel)


def fit_visibility_curve(pump_nm, visibilities, errors, threshold: float = 0.9) -> GaussianPeakFit:
    """Weighted fit of V(l) = V_max exp(-(l - l_c)^2 / (2 s^2))."""
    x = np.asarray(pump_nm, dtype=float)
    y = np.asarray(visibilities, dtype=float)
    e = np.asarray(errors, dtype=float)
    if x.size < 4 or not x.shape == y.shape == e.shape:
        raise ValueError("at least 4 points with matching errors are required")
    if np.any(e <= 0):
        raise ValueError("errors must be positive")
    k = int(np.argmax(y))
    wts = np.clip(y, 0, None)
    spread = math.sqrt(float(np.sum(wts * (x - x[k]) ** 2) / np.sum(wts))) or float(np.ptp(x)) / 2
    p0 = np.array([y[k], x[k], spread])
    scale = np.array([abs(y[k]), spread, spread])
    p, cov, chi2, _ = levenberg_marquardt(_gauss_peak, _gauss_peak_jacobian, p0, x, y, e, scale)
    return GaussianPeakFit(float(p[1]), float(abs(p[2])), float(p[0]),
                           cov, chi2 / max(x.size - 3, 1), threshold)


def write_scan_csv(path, data: ScanDataset) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(SCAN_HEADER) + "\n")
        for row in zip(data.positions_um, data.rates_hz, data.errors_hz):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_scan_csv(path) -> ScanDataset:
    text = Path(path).read_text()
    return parse_scan_csv(text, str(path))


def parse_scan_csv(text: str, origin: str = "<string>") -> ScanDataset:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(h.strip() for h in rows[0]) != SCAN_HEADER:
        raise FormatError(f"{origin}:1: header must be {','.join(SCAN_HEADER)}")
    cols = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not f.strip() for f in row):
            continue
        if len(row) != 3:
            raise FormatError(f"{origin}:{lineno}: expected 3 fields, got {len(row)}")
        try:
            vals = [float(f) for f in row]
        except ValueError:
            raise FormatError(f"{origin}:{lineno}: non-numeric field in {row}") from None
        if not all(math.isfinite(v) for v in vals) or vals[2] < 0:
            raise FormatError(f"{origin}:{lineno}: invalid values {row}")
        cols.append(vals)
    arr = np.array(cols, dtype=float).reshape(-1, 3)
    return ScanDataset(arr[:, 0], arr[:, 1], arr[:, 2])


def report_rows(fit: FitResult, derived: DerivedQuantities):
    e = fit.errors
    return [
        ("c_n_hz", fit.c_n, e[0]),
        ("visibility", fit.visibility, e[1]),
        ("d0_um", fit.d0_um, e[2]),
        ("sigma_um", fit.sigma_um, e[3]),
        ("fwhm_um", derived.fwhm_um, derived.fwhm_err_um),
        ("coherence_time_ps", derived.coherence_time_ps, derived.coherence_time_err_ps),
        ("bandwidth_nm", derived.bandwidth_nm, derived.bandwidth_err_nm),
        ("chi2_dof", fit.chi2_dof, 0.0),
    ]


def write_fit_report(path, fit: FitResult, derived: DerivedQuantities) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("parameter,value,uncertainty\n")
        for name, v, e in report_rows(fit, derived):
            fh.write(f"{name},{v!r},{float(e)!r}\n")


def summary_text(fit: FitResult, derived: DerivedQuantities) -> str:
    e = fit.errors
    lines = [
        f"baseline C_n = {fit.c_n:.4f} ± {e[0]:.4f} Hz",
        f"visibility V = {fit.visibility:.4f} ± {e[1]:.4f}",
        f"dip center d0 = {fit.d0_um:.2f} ± {e[2]:.2f} um",
        f"sigma = {fit.sigma_um:.2f} ± {e[3]:.2f} um",
        f"FWHM w = {derived.fwhm_um:.2f} ± {derived.fwhm_err_um:.2f} um",
        f"coherence time tau_c = {derived.coherence_time_ps:.4f} ± {derived.coherence_time_err_ps:.4f} ps",
        f"bandwidth = {derived.bandwidth_nm:.4f} ± {derived.bandwidth_err_nm:.4f} nm",
        f"chi2/dof = {fit.chi2_dof:.4f}",
    ]
    if fit.visibility_flagged:
        lines.append(f"warning: visibility {fit.visibility:.4f} outside [0, {V_SOFT_MAX}]")
    return "\n".join(lines) + "\n"
