"""Command-line front end: simulate, analyze, sweep-pump, sweep-power, calibrate-coupler."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import analysis as an
from .circuit import CouplerGeometry, calibrate_coupler, mz_extinction, splitting_ratio
from .config import PRESETS, load_config
from .errors import ConfigError, DomainError, FitError, FormatError
from .interference import delay_ps
from .pipeline import build_experiment, run_scan
from .tcspc import count_coincidences, read_tags, write_tags

INDEX_HEADER = ("delay_um", "file", "duration_s")


def _fmt(x) -> str:
    return repr(float(x))


def _out_dir(args) -> Path:
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args, default_preset):
    return load_config(args.config or default_preset)


def _seed(args, cfg):
    seed = args.seed if args.seed is not None else cfg.acquisition.seed
    if seed is None:
        raise ConfigError("acquisition.seed: required for simulation (set it or pass --seed)")
    if seed < 0:
        raise ConfigError("acquisition.seed: must be non-negative")
    return seed


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


def _fit_outputs(out: Path, data: an.ScanDataset, wavelength_nm: float, header: str = ""):
    fit = an.fit_hom_dip(data)
    derived = an.derive_quantities(fit, wavelength_nm)
    an.write_fit_report(out / "fit_report.csv", fit, derived)
    text = header + an.summary_text(fit, derived)
    (out / "summary.txt").write_text(text)
    return fit, derived, text


# --- simulate ---------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _config(args, "paper_fig4a")
    seed = _seed(args, cfg)
    exp = build_experiment(cfg)
    keep = cfg.acquisition.write_tags or args.write_tags
    res = run_scan(exp, seed, parallel=args.parallel, keep_tags=keep)
    out = _out_dir(args)
    an.write_scan_csv(out / "scan.csv", res.dataset)
    if keep:
        tag_dir = out / "tags"
        tag_dir.mkdir(exist_ok=True)
        rows = []
        for k, (pos, tags) in enumerate(zip(exp.positions_um, res.tags)):
            name = f"point_{k:03d}.ptag"
            write_tags(tag_dir / name, tags)
            rows.append((_fmt(pos), name, _fmt(exp.duration_s)))
        _write_rows(tag_dir / "index.csv", INDEX_HEADER, rows)
    header = (
        f"config: {cfg.name or cfg.origin}\n"
        f"seed: {seed}\n"
        f"pump: {exp.model.pump_wavelength_nm:.3f} nm, {exp.pump_power_mw:.3f} mW, "
        f"mean pair number {exp.mu:.4e} per {exp.stats.interval_ps:g} ps\n"
        f"splitting T:R = {exp.splitter.T:.4f}:{exp.splitter.R:.4f}\n"
        f"predicted visibility: {exp.predicted_visibility():.4f}\n"
    )
    fit, _, text = _fit_outputs(out, res.dataset, exp.center_wavelength_nm, header)
    expected = exp.expected_rates()
    model = an.hom_model(res.dataset.positions_um, fit.params)
    _write_rows(out / "curve.csv", ("delay_um", "delay_ps", "expected_hz", "fit_hz"),
                [(_fmt(p), _fmt(delay_ps(p)), _fmt(e), _fmt(m))
                 for p, e, m in zip(exp.positions_um, expected, model)])
    sys.stdout.write(text)
    return 0


# --- analyze ----------------------------------------------------------------

def _scan_from_index(index: Path, window_ps: float) -> an.ScanDataset:
    try:
        with open(index, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FormatError(f"cannot read {index}: {exc.strerror}") from None
    if not rows or tuple(rows[0]) != INDEX_HEADER:
        raise FormatError(f"{index}:1: header must be {','.join(INDEX_HEADER)}")
    pos, rates, errs = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise FormatError(f"{index}:{lineno}: expected 3 fields")
        try:
            p, dur = float(row[0]), float(row[2])
        except ValueError:
            raise FormatError(f"{index}:{lineno}: non-numeric field") from None
        path = index.parent / row[1]
        try:
            tags = read_tags(path)
        except FormatError as exc:
            raise FormatError(f"{path}: {exc}") from None
        count = count_coincidences(tags.channel(0), tags.channel(1), window_ps, dur).count
        pos.append(p)
        rates.append(count / dur)
        errs.append(an.rate_error(max(count, 1), dur))
    return an.ScanDataset(pos, rates, errs)


def _load_scan(path: Path, window_ps: float) -> an.ScanDataset:
    if path.is_dir():
        for candidate in (path / "tags" / "index.csv", path / "index.csv"):
            if candidate.exists():
                return _scan_from_index(candidate, window_ps)
        if (path / "scan.csv").exists():
            return an.read_scan_csv(path / "scan.csv")
        raise FormatError(f"{path}: no tags/index.csv or scan.csv found")
    if path.suffix == ".ptag":
        raise FormatError(f"{path}: single tag files carry no delay position; pass the tags/index.csv")
    try:
        first = path.open().readline().strip()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from None
    if first == ",".join(INDEX_HEADER):
        return _scan_from_index(path, window_ps)
    return an.read_scan_csv(path)


def cmd_analyze(args) -> int:
    window = args.window_ps
    wavelength = args.wavelength_nm
    if args.config:
        cfg = load_config(args.config)
        window = window or cfg.acquisition.window_ps
        wavelength = wavelength or cfg.source.center_wavelength_nm
    data = _load_scan(Path(args.input), window or 256.0)
    wavelength = wavelength or 1550.0
    if args.out:
        _, _, text = _fit_outputs(_out_dir(args), data, wavelength)
    else:
        fit = an.fit_hom_dip(data)
        text = an.summary_text(fit, an.derive_quantities(fit, wavelength))
    sys.stdout.write(text)
    return 0


# --- sweeps -----------------------------------------------------------------

def cmd_sweep_pump(args) -> int:
    cfg = _config(args, "paper_fig4b")
    exp = build_experiment(cfg)
    grid = tuple(args.wavelengths) if args.wavelengths else cfg.scan.pump_wavelengths_nm
    if not grid:
        raise ConfigError("scan.pump_wavelengths_nm: no pump wavelengths given")
    predicted = [exp.predicted_visibility(lam) for lam in grid]
    simulated = [None] * len(grid)
    if args.simulate:
        seeds = np.random.SeedSequence(_seed(args, cfg)).spawn(len(grid))
        for k, (lam, ss) in enumerate(zip(grid, seeds)):
            fit = an.fit_hom_dip(run_scan(exp.at(pump_wavelength_nm=lam), ss, args.parallel).dataset)
            simulated[k] = (fit.visibility, fit.errors[1])
    out = _out_dir(args)
    rows = []
    for lam, vp, sim in zip(grid, predicted, simulated):
        sv, se = ("", "") if sim is None else (_fmt(sim[0]), _fmt(sim[1]))
        rows.append((_fmt(lam), _fmt(vp), sv, se))
    _write_rows(out / "sweep_pump.csv", ("pump_nm", "predicted_v", "simulated_v", "simulated_v_err"), rows)

    lines = [f"detuning slope: {exp.model.detuning_slope:.6e} rad/s per nm",
             f"degeneracy pump: {exp.model.degeneracy_pump_nm:.3f} nm"]
    lines += [f"{lam:.2f} nm: predicted V = {vp:.4f}" +
              ("" if sim is None else f", simulated V = {sim[0]:.4f} ± {sim[1]:.4f}")
              for lam, vp, sim in zip(grid, predicted, simulated)]
    if len(grid) >= 4:
        peak = an.fit_visibility_curve(grid, predicted, [args.v_err] * len(grid))
        lines.append(f"visibility peak (prediction): center {peak.center:.4f} nm, "
                     f"V > 0.9 over {peak.span_above_threshold:.4f} nm")
    text = "\n".join(lines) + "\n"
    (out / "sweep_pump_summary.txt").write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_sweep_power(args) -> int:
    cfg = _config(args, "paper_supp_power")
    seed = _seed(args, cfg)
    exp = build_experiment(cfg)
    powers = tuple(args.powers) if args.powers else cfg.scan.powers_mw
    if not powers:
        raise ConfigError("scan.powers_mw: no pump powers given")
    durations = cfg.scan.power_durations_s if not args.powers and cfg.scan.power_durations_s \
        else (exp.duration_s,) * len(powers)
    seeds = np.random.SeedSequence(seed).spawn(len(powers))
    out = _out_dir(args)
    rows, lines, fits = [], [], []
    for p, dur, ss in zip(powers, durations, seeds):
        e = exp.at(pump_power_mw=p, duration_s=dur)
        data = run_scan(e, ss, args.parallel).dataset
        an.write_scan_csv(out / f"scan_{p:g}mW.csv", data)
        fit = an.fit_hom_dip(data)
        d = an.derive_quantities(fit, e.center_wavelength_nm)
        fits.append((p, fit, d))
        err = fit.errors
        rows.append((_fmt(p), _fmt(e.mu), _fmt(dur), _fmt(e.predicted_visibility()), _fmt(fit.visibility),
                     _fmt(err[1]), _fmt(fit.c_n), _fmt(err[0]), _fmt(d.fwhm_um), _fmt(d.fwhm_err_um)))
        lines.append(f"{p:g} mW: mu = {e.mu:.4e}, V = {fit.visibility:.4f} ± {err[1]:.4f}, "
                     f"w = {d.fwhm_um:.1f} ± {d.fwhm_err_um:.1f} um, C_n = {fit.c_n:.4f} ± {err[0]:.4f} Hz")
    _write_rows(out / "sweep_power.csv",
                ("power_mw", "mu", "duration_s", "predicted_v", "fitted_v", "fitted_v_err",
                 "c_n_hz", "c_n_err_hz", "fwhm_um", "fwhm_err_um"), rows)
    for (p1, f1, _), (p2, f2, _) in zip(fits, fits[1:]):
        lines.append(f"delta V ({p2:g} mW - {p1:g} mW) = {f2.visibility - f1.visibility:+.4f}")
    text = "\n".join(lines) + "\n"
    (out / "sweep_power_summary.txt").write_text(text)
    sys.stdout.write(text)
    return 0


# --- coupler ----------------------------------------------------------------

def _anchor(text):
    try:
        gap, length = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"anchor must be GAP_NM:LENGTH_UM, got {text!r}") from None
    return gap, length


def cmd_calibrate_coupler(args) -> int:
    if args.anchor:
        anchors, wavelength = args.anchor, 1550.0
    else:
        cfg = _config(args, "paper_fig4a")
        anchors, wavelength = cfg.circuit.anchors, cfg.circuit.wavelength_nm
    model = calibrate_coupler(anchors, wavelength)
    lines = [f"kappa0 = {model.kappa0:.6e} rad/um at gap {model.reference_gap_nm:g} nm",
             f"gap decay = {model.gap_decay_nm:.4f} nm",
             "anchors (gap nm, observed length um, model length um):"]
    for g, l in anchors:
        lines.append(f"  {g:g}, {l:g}, {model.half_split_length(g):.4f}")
    rows = []
    for gap in args.gaps:
        length = model.half_split_length(gap)
        # identical couplers: the Mach-Zehnder extinction peaks at the 50:50 length
        ext = mz_extinction(splitting_ratio(CouplerGeometry(gap, length), model),
                            splitting_ratio(CouplerGeometry(gap, length), model))
        rows.append((_fmt(gap), _fmt(length), _fmt(ext)))
        lines.append(f"50:50 at gap {gap:g} nm: length {length:.4f} um")
    text = "\n".join(lines) + "\n"
    if args.out:
        out = _out_dir(args)
        _write_rows(out / "coupler.csv", ("gap_nm", "half_split_length_um", "mz_extinction_db"), rows)
        (out / "coupler_summary.txt").write_text(text)
    sys.stdout.write(text)
    return 0


# --- parser -----------------------------------------------------------------

def _global_flags(p, top):
    # on subcommands the flags only override the top-level values when given
    def dflt(value):
        return value if top else argparse.SUPPRESS

    p.add_argument("--config", default=dflt(None), help=f"TOML file or preset name ({', '.join(PRESETS)})")
    p.add_argument("--seed", type=int, default=dflt(None), help="master seed (overrides acquisition.seed)")
    p.add_argument("--out", default=dflt(None), help="output directory (default: out)")
    p.add_argument("--parallel", type=int, default=dflt(1), metavar="N", help="worker processes for delay points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="onchip-hom", description=__doc__)
    _global_flags(parser, top=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a delay scan and fit the dip")
    _global_flags(p, top=False)
    p.add_argument("--write-tags", action="store_true", help="also write per-point tag files")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="fit a scan CSV or a directory of tag files")
    _global_flags(p, top=False)
    p.add_argument("input", help="scan.csv, tags/index.csv, or a simulate output directory")
    p.add_argument("--window-ps", type=float, default=None, help="coincidence window (default 256)")
    p.add_argument("--wavelength-nm", type=float, default=None, help="centre wavelength (default 1550)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep-pump", help="visibility versus pump wavelength")
    _global_flags(p, top=False)
    p.add_argument("--wavelengths", type=float, nargs="+", metavar="NM")
    p.add_argument("--simulate", action="store_true", help="also run a full scan per wavelength")
    p.add_argument("--v-err", type=float, default=0.03, help="visibility error used in the peak fit")
    p.set_defaults(func=cmd_sweep_pump)

    p = sub.add_parser("sweep-power", help="fitted visibility versus pump power")
    _global_flags(p, top=False)
    p.add_argument("--powers", type=float, nargs="+", metavar="MW")
    p.set_defaults(func=cmd_sweep_power)

    p = sub.add_parser("calibrate-coupler", help="fit the coupler model to 50:50 anchors")
    _global_flags(p, top=False)
    p.add_argument("--anchor", type=_anchor, action="append", metavar="GAP_NM:LENGTH_UM")
    p.add_argument("--gaps", type=float, nargs="+", default=[360.0, 370.0, 400.0], metavar="NM")
    p.set_defaults(func=cmd_calibrate_coupler)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.parallel < 1:
        print("error: --parallel must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConfigError, FormatError, FitError, DomainError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
