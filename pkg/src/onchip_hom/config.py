"""Experiment configuration: TOML files with unit-suffixed keys.

Every physical quantity carries its unit in the key name. Unknown keys are
rejected so that a misspelt unit suffix cannot silently fall back to a default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError

PRESETS = ("paper_fig4a", "paper_fig4b", "paper_supp_power")


@dataclass(frozen=True)
class SourceConfig:
    pump_wavelength_nm: float
    degeneracy_pump_nm: float
    bandwidth_nm: float
    center_wavelength_nm: float = 1550.0
    spectral_kind: str = "gaussian-approx"
    detuning_slope_rad_per_s_nm: float | None = None
    slope_calibration: tuple = ()
    crystal_length_mm: float = 10.5
    crystal_temperature_c: float = 25.0
    pump_power_mw: float = 10.5
    mu_per_mw: float | None = None
    calibration_power_mw: float | None = None
    calibration_baseline_hz: float | None = None
    interval_ps: float = 256.0


@dataclass(frozen=True)
class CircuitConfig:
    anchors: tuple
    gap_nm: float
    length_um: float
    coupling_factor: float = 1.0
    wavelength_nm: float = 1550.0
    facet_db: float = 0.0
    tap_db: float = 0.0
    propagation_db: float = 0.0
    offchip_db: float = 0.0


@dataclass(frozen=True)
class DetectorBlock:
    efficiency: float
    dark_rate_hz: float
    jitter_fwhm_ps: float
    dead_time_ns: float


@dataclass(frozen=True)
class AcquisitionConfig:
    duration_s: float
    window_ps: float = 256.0
    seed: int | None = None
    write_tags: bool = False


@dataclass(frozen=True)
class ScanConfig:
    positions_um: tuple
    pump_wavelengths_nm: tuple = ()
    powers_mw: tuple = ()
    power_durations_s: tuple = ()


@dataclass(frozen=True)
class ExperimentConfig:
    source: SourceConfig
    circuit: CircuitConfig
    detectors: tuple
    acquisition: AcquisitionConfig
    scan: ScanConfig
    name: str = ""
    origin: str = field(default="<config>", compare=False)


class _Table:
    """Typed access to one TOML table that remembers its dotted path."""

    def __init__(self, data, path):
        if not isinstance(data, dict):
            raise ConfigError(f"{path or '<root>'}: expected a table")
        self.data = data
        self.path = path
        self.used = set()

    def _name(self, key):
        return f"{self.path}.{key}" if self.path else key

    def table(self, key, required=True):
        self.used.add(key)
        if key not in self.data:
            if required:
                raise ConfigError(f"{self._name(key)}: missing required table")
            return None
        return _Table(self.data[key], self._name(key))

    def number(self, key, default=None, required=False, positive=False, nonneg=False,
               lo=None, hi=None, integer=False):
        self.used.add(key)
        name = self._name(key)
        if key not in self.data:
            if required:
                raise ConfigError(f"{name}: missing required field")
            return default
        v = self.data[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{name}: expected a number, got {v!r}")
        if integer and not isinstance(v, int):
            raise ConfigError(f"{name}: expected an integer, got {v!r}")
        if not math.isfinite(v):
            raise ConfigError(f"{name}: must be finite")
        if positive and not v > 0:
            raise ConfigError(f"{name}: must be positive, got {v!r}")
        if nonneg and v < 0:
            raise ConfigError(f"{name}: must be non-negative, got {v!r}")
        if lo is not None and v < lo or hi is not None and v > hi:
            raise ConfigError(f"{name}: must lie in [{lo}, {hi}], got {v!r}")
        return v

    def string(self, key, default=None, choices=None):
        self.used.add(key)
        name = self._name(key)
        v = self.data.get(key, default)
        if not isinstance(v, str):
            raise ConfigError(f"{name}: expected a string, got {v!r}")
        if choices and v not in choices:
            raise ConfigError(f"{name}: must be one of {list(choices)}, got {v!r}")
        return v

    def boolean(self, key, default=False):
        self.used.add(key)
        v = self.data.get(key, default)
        if not isinstance(v, bool):
            raise ConfigError(f"{self._name(key)}: expected true or false, got {v!r}")
        return v

    def numbers(self, key, default=(), width=None, positive=False):
        self.used.add(key)
        name = self._name(key)
        v = self.data.get(key, default)
        if not isinstance(v, (list, tuple)):
            raise ConfigError(f"{name}: expected an array, got {v!r}")
        out = []
        for k, item in enumerate(v):
            entry = item if width else [item]
            if width and (not isinstance(item, (list, tuple)) or len(item) != width):
                raise ConfigError(f"{name}[{k}]: expected {width} numbers, got {item!r}")
            for x in entry:
                if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                    raise ConfigError(f"{name}[{k}]: expected a finite number, got {x!r}")
                if positive and not x > 0:
                    raise ConfigError(f"{name}[{k}]: must be positive, got {x!r}")
            out.append(tuple(float(x) for x in entry) if width else float(item))
        return tuple(out)

    def finish(self):
        extra = sorted(set(self.data) - self.used)
        if extra:
            raise ConfigError(f"{self._name(extra[0])}: unknown field")


def _source(t: _Table) -> SourceConfig:
    pump = t.number("pump_wavelength_nm", required=True, positive=True)
    src = SourceConfig(
        pump_wavelength_nm=pump,
        degeneracy_pump_nm=t.number("degeneracy_pump_nm", pump, positive=True),
        bandwidth_nm=t.number("bandwidth_nm", required=True, positive=True),
        center_wavelength_nm=t.number("center_wavelength_nm", 1550.0, positive=True),
        spectral_kind=t.string("spectral_kind", "gaussian-approx", ("gaussian-approx", "sinc")),
        detuning_slope_rad_per_s_nm=t.number("detuning_slope_rad_per_s_nm", nonneg=True),
        slope_calibration=t.numbers("slope_calibration", width=2),
        crystal_length_mm=t.number("crystal_length_mm", 10.5, positive=True),
        crystal_temperature_c=t.number("crystal_temperature_c", 25.0),
        pump_power_mw=t.number("pump_power_mw", 10.5, nonneg=True),
        mu_per_mw=t.number("mu_per_mw", nonneg=True),
        calibration_power_mw=t.number("calibration_power_mw", positive=True),
        calibration_baseline_hz=t.number("calibration_baseline_hz", positive=True),
        interval_ps=t.number("interval_ps", 256.0, positive=True),
    )
    if src.slope_calibration and len(src.slope_calibration) != 2:
        raise ConfigError(f"{t.path}.slope_calibration: expected exactly two (pump_nm, visibility) points")
    for k, (_, v) in enumerate(src.slope_calibration):
        if not 0 < v <= 1:
            raise ConfigError(f"{t.path}.slope_calibration[{k}]: visibility must lie in (0, 1]")
    have_mu = src.mu_per_mw is not None
    have_cal = src.calibration_baseline_hz is not None
    if have_mu == have_cal:
        raise ConfigError(f"{t.path}.mu_per_mw: give either mu_per_mw or calibration_baseline_hz")
    t.finish()
    return src


def _circuit(t: _Table) -> CircuitConfig:
    cp = t.table("coupler")
    loss = t.table("loss", required=False) or _Table({}, f"{t.path}.loss")
    out = CircuitConfig(
        anchors=cp.numbers("anchors", width=2, positive=True),
        gap_nm=cp.number("gap_nm", required=True, lo=150.0, hi=700.0),
        length_um=cp.number("length_um", required=True, positive=True),
        coupling_factor=cp.number("coupling_factor", 1.0, positive=True),
        wavelength_nm=cp.number("wavelength_nm", 1550.0, positive=True),
        facet_db=loss.number("facet_db", 0.0, nonneg=True),
        tap_db=loss.number("tap_db", 0.0, nonneg=True),
        propagation_db=loss.number("propagation_db", 0.0, nonneg=True),
        offchip_db=loss.number("offchip_db", 0.0, nonneg=True),
    )
    if len(out.anchors) < 2:
        raise ConfigError(f"{cp.path}.anchors: at least two (gap_nm, length_um) anchors are required")
    cp.finish()
    loss.finish()
    t.finish()
    return out


def _detectors(root: _Table):
    root.used.add("detectors")
    raw = root.data.get("detectors")
    if not isinstance(raw, list) or len(raw) != 2:
        raise ConfigError("detectors: expected exactly two [[detectors]] tables")
    out = []
    for k, entry in enumerate(raw):
        t = _Table(entry, f"detectors[{k}]")
        out.append(DetectorBlock(
            efficiency=t.number("efficiency", required=True, lo=0.0, hi=1.0),
            dark_rate_hz=t.number("dark_rate_hz", 0.0, nonneg=True),
            jitter_fwhm_ps=t.number("jitter_fwhm_ps", 50.0, nonneg=True),
            dead_time_ns=t.number("dead_time_ns", 10.0, nonneg=True),
        ))
        t.finish()
    return tuple(out)


def _acquisition(t: _Table) -> AcquisitionConfig:
    out = AcquisitionConfig(
        duration_s=t.number("duration_s", required=True, positive=True),
        window_ps=t.number("window_ps", 256.0, positive=True),
        seed=t.number("seed", integer=True, nonneg=True),
        write_tags=t.boolean("write_tags", False),
    )
    t.finish()
    return out


def _scan(t: _Table) -> ScanConfig:
    positions = t.numbers("positions_um")
    start = t.number("start_um")
    stop = t.number("stop_um")
    step = t.number("step_um", positive=True)
    if positions and (start is not None or stop is not None or step is not None):
        raise ConfigError(f"{t.path}.positions_um: give either positions_um or start/stop/step")
    if not positions:
        if start is None or stop is None or step is None:
            raise ConfigError(f"{t.path}.positions_um: missing delay positions (positions_um or start_um/stop_um/step_um)")
        if stop <= start:
            raise ConfigError(f"{t.path}.stop_um: must exceed start_um")
        n = int(round((stop - start) / step))
        positions = tuple(start + k * step for k in range(n + 1))
    if any(b <= a for a, b in zip(positions, positions[1:])):
        raise ConfigError(f"{t.path}.positions_um: must be strictly increasing")
    out = ScanConfig(
        positions_um=tuple(float(p) for p in positions),
        pump_wavelengths_nm=t.numbers("pump_wavelengths_nm", positive=True),
        powers_mw=t.numbers("powers_mw", positive=True),
        power_durations_s=t.numbers("power_durations_s", positive=True),
    )
    if out.power_durations_s and len(out.power_durations_s) != len(out.powers_mw):
        raise ConfigError(f"{t.path}.power_durations_s: needs one entry per powers_mw entry")
    t.finish()
    return out


def parse_config(data: dict, origin: str = "<config>") -> ExperimentConfig:
    root = _Table(data, "")
    name = root.string("name", "")
    cfg = ExperimentConfig(
        source=_source(root.table("source")),
        circuit=_circuit(root.table("circuit")),
        detectors=_detectors(root),
        acquisition=_acquisition(root.table("acquisition")),
        scan=_scan(root.table("scan")),
        name=name,
        origin=origin,
    )
    root.finish()
    return cfg


def load_config(path_or_preset) -> ExperimentConfig:
    """Load a TOML file, or a bundled preset when given one of :data:`PRESETS`."""
    key = str(path_or_preset)
    if key in PRESETS and not Path(key).exists():
        text = resources.files("onchip_hom.presets").joinpath(f"{key}.toml").read_text()
        origin = f"preset {key}"
    else:
        try:
            text = Path(key).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {key}: {exc.strerror}") from None
        origin = key
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{origin}: {exc}") from None
    return parse_config(data, origin)
