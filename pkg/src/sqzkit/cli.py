"""Command-line front end.

Subcommands: simulate, process, fit, budget, phasematch, report.  Common
flags can also come from the environment with an ``SQZ_`` prefix
(SQZ_CONFIG, SQZ_SEED, SQZ_OUT, SQZ_THREADS, SQZ_FORMAT).  Exit codes:
0 ok, 2 config error, 3 data error, 4 fit non-convergence; failures emit a
machine-readable JSON object on stderr.

Each subcommand is a single process.  Trace generation and processing are
deterministic ordered reductions, so outputs are byte-identical regardless
of the --threads setting.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import dsp, fitting, physics, qpm, synth
from .config import RunConfig, default_config_dict, load_config
from .errors import ConfigError, DataError, FitConvergenceError, SqzError
from .report import build_report
from .traceio import read_trace

DB_DECIMALS = 4


def _round_db(value: float | None) -> float | None:
    return None if value is None else round(float(value), DB_DECIMALS)


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    sys.stdout.write(text)


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _require(value, flag: str):
    if value is None:
        raise ConfigError(f"missing required option {flag}")
    return value


def _load_config(args) -> RunConfig:
    return load_config(_require(args.config, "--config"))


# ---------------------------------------------------------------------------
# simulate

def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    if args.seed is not None:
        cfg.acquisition.seed = args.seed
    out_dir = Path(_require(args.out, "--out"))
    entries = synth.synthesize_power_sweep(
        cfg.acquisition,
        alpha_per_w=cfg.alpha_per_w(),
        eta=cfg.budget.total(),
        avg_powers_w=cfg.avg_powers_w,
        pulses=cfg.pulse_train(),
        out_dir=out_dir,
    )
    files = [
        {"path": e.path, "kind": e.kind, "avg_power_w": e.avg_power_w,
         "sha256": _sha256(e.path)}
        for e in entries
    ]
    _emit({"seed": cfg.acquisition.seed, "out": str(out_dir),
           "manifest": str(out_dir / "manifest.json"), "files": files}, None)
    return 0


# ---------------------------------------------------------------------------
# process

def _read_manifest(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    try:
        entries = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(entries, list):
        raise DataError(f"{path}: manifest must be a JSON array")
    for entry in entries:
        if not isinstance(entry, dict) or not {"path", "kind", "avg_power_w"} <= set(entry):
            raise DataError(f"{path}: manifest entries need path/kind/avg_power_w")
        raw = Path(entry["path"])
        if not raw.exists():
            relative = path.parent / raw.name
            if not relative.exists():
                raise DataError(f"manifest references missing trace file {raw}")
            entry["path"] = str(relative)
    return entries


def _write_variance_csv(path, series: dsp.VariancePhaseSeries, trace) -> None:
    n_pulses = trace.n_pulses
    span = trace.ramp_end_rad - trace.ramp_start_rad
    centers = (series.pulse_start + series.pulse_stop - 1) / 2.0
    phases = trace.ramp_start_rad + span * centers / n_pulses
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin", "phase_rad", "variance", "stderr"])
        for i in range(series.n_bins):
            writer.writerow([
                int(series.bin_index[i]),
                repr(float(phases[i])),
                repr(float(series.variance[i])),
                repr(float(series.stderr[i])),
            ])


def cmd_process(args) -> int:
    cfg = load_config(args.config) if args.config else None
    pulses_per_bin = cfg.pulses_per_bin if cfg else dsp.DEFAULT_PULSES_PER_BIN
    tol = cfg.fit.tol if cfg else 1e-10
    max_iter = cfg.fit.max_iter if cfg else 200

    if args.manifest:
        entries = _read_manifest(args.manifest)
    elif args.traces:
        entries = []
        for raw in args.traces:
            if not Path(raw).exists():
                raise DataError(f"trace file not found: {raw}")
            entries.append({"path": raw, "kind": None, "avg_power_w": None})
    else:
        raise ConfigError("process needs --manifest or trace file arguments")

    traces = []
    for entry in entries:
        trace = read_trace(entry["path"])
        if entry["kind"] is not None and entry["kind"] != trace.kind:
            raise DataError(
                f"{entry['path']}: manifest kind {entry['kind']!r} != header {trace.kind!r}"
            )
        traces.append((entry, trace))

    shot = [t for e, t in traces if t.kind == "shot"]
    electronic = [t for e, t in traces if t.kind == "electronic"]
    squeezed = [(e, t) for e, t in traces if t.kind == "squeezed"]
    if not shot:
        raise DataError("no shot-noise reference traces provided")
    if not squeezed:
        raise DataError("no squeezed traces provided")

    powers = sorted({e["avg_power_w"] for e, _ in squeezed},
                    key=lambda p: (p is None, p))
    out_dir = Path(_require(args.out, "--out"))
    out_dir.mkdir(parents=True, exist_ok=True)

    summaries = []
    for p_idx, power in enumerate(powers):
        group = [t for e, t in squeezed if e["avg_power_w"] == power]
        normalized, fit = dsp.process_trace_sets(
            group, shot, electronic or None,
            pulses_per_bin=pulses_per_bin,
            subtract_electronic=args.subtract_electronic,
            tol=tol, max_iter=max_iter,
        )
        _write_variance_csv(out_dir / f"variance_p{p_idx:02d}.csv", normalized, group[0])
        peak = None
        if power is not None and cfg is not None:
            peak = physics.peak_power(cfg.pulse_train(power))
        summary = {
            "avg_power_w": power,
            "peak_power_w": peak,
            "s_minus_db": _round_db(fit.s_minus_db),
            "s_minus_err_db": _round_db(fit.s_minus_err_db),
            "s_plus_db": _round_db(fit.s_plus_db),
            "s_plus_err_db": _round_db(fit.s_plus_err_db),
            "s_minus_lin": fit.s_minus_lin,
            "s_plus_lin": fit.s_plus_lin,
            "ramp_slope": fit.ramp_slope,
            "ramp_offset": fit.ramp_offset,
            "n_traces": normalized.n_traces,
            "shot_reference": normalized.shot_reference,
            "electronic_reference": normalized.electronic_reference,
            "pulses_per_bin": pulses_per_bin,
            "n_bins": normalized.n_bins,
            "converged": fit.fit.converged,
            "sse": fit.fit.sse,
            "iterations": fit.fit.iterations,
        }
        with open(out_dir / f"summary_p{p_idx:02d}.json", "w") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
        summaries.append(summary)

    _emit({"threads": args.threads, "powers": len(powers), "summaries": summaries},
          str(out_dir / "process_summary.json"))
    return 0


# ---------------------------------------------------------------------------
# fit

def _points_from_summary(path, cfg: RunConfig | None):
    if not Path(path).exists():
        raise DataError(f"summary file not found: {path}")
    doc = json.loads(Path(path).read_text())
    summaries = doc.get("summaries", doc) if isinstance(doc, dict) else doc
    if not isinstance(summaries, list) or not summaries:
        raise DataError(f"{path}: no per-power summaries found")
    points, errors = [], []
    for entry in summaries:
        peak = entry.get("peak_power_w")
        if peak is None:
            power = entry.get("avg_power_w")
            if power is None or cfg is None:
                raise DataError(
                    "summary lacks peak_power_w; pass --config to convert "
                    "average power"
                )
            peak = physics.peak_power(cfg.pulse_train(power))
        points.append((peak, entry["s_minus_db"], -1.0))
        errors.append(entry.get("s_minus_err_db"))
        points.append((peak, entry["s_plus_db"], +1.0))
        errors.append(entry.get("s_plus_err_db"))
    return points, errors


def _points_from_csv(path):
    if not Path(path).exists():
        raise DataError(f"points CSV not found: {path}")
    points, errors = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header[:3] != ["peak_power_w", "value_db", "sign"]:
            raise DataError(
                f"{path}: header must start with peak_power_w,value_db,sign"
            )
        has_err = len(header) > 3 and header[3] == "err_db"
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                points.append((float(row[0]), float(row[1]), float(row[2])))
                errors.append(float(row[3]) if has_err and len(row) > 3 else None)
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}:{lineno}: bad row ({exc})") from exc
    if not points:
        raise DataError(f"{path}: no data rows")
    return points, errors


def _weights_from_db_errors(points, errors) -> np.ndarray | None:
    if any(e is None or e <= 0 for e in errors):
        return None
    # residuals are linear ratios: sigma_lin = lin * ln(10)/10 * sigma_dB
    sigmas = np.array([
        10.0 ** (value_db / 10.0) * math.log(10.0) / 10.0 * err
        for (_, value_db, _), err in zip(points, errors)
    ])
    return 1.0 / sigmas ** 2


def cmd_fit(args) -> int:
    cfg = load_config(args.config) if args.config else None
    if bool(args.summary) == bool(args.points):
        raise ConfigError("fit needs exactly one of --summary / --points")
    if args.summary:
        points, errors = _points_from_summary(args.summary, cfg)
    else:
        points, errors = _points_from_csv(args.points)
    weights = _weights_from_db_errors(points, errors)
    tol = cfg.fit.tol if cfg else 1e-10
    max_iter = cfg.fit.max_iter if cfg else 200

    if args.model == "gain":
        result = fitting.fit_gain_curve(points, weights=weights, tol=tol,
                                        max_iter=max_iter)
        params = {"eta_mm": result.params[0], "alpha_per_w": result.params[1]}
        stderr = {"eta_mm": result.stderr[0], "alpha_per_w": result.stderr[1]}
    else:
        alpha = args.alpha
        fix_alpha = not args.free_alpha
        if cfg is not None and not cfg.fit.fix_alpha:
            fix_alpha = False
        if fix_alpha and alpha is None:
            if cfg is None:
                raise ConfigError(
                    "squeezing fit with fixed alpha needs --alpha or --config"
                )
            alpha = cfg.alpha_per_w()
        result = fitting.fit_squeezing_curve(
            points, alpha_per_w=alpha if fix_alpha else None,
            weights=weights, tol=tol, max_iter=max_iter)
        if fix_alpha:
            params = {"eta": result.params[0], "alpha_per_w": alpha}
            stderr = {"eta": result.stderr[0], "alpha_per_w": 0.0}
        else:
            params = {"eta": result.params[0], "alpha_per_w": result.params[1]}
            stderr = {"eta": result.stderr[0], "alpha_per_w": result.stderr[1]}

    if not result.converged:
        raise FitConvergenceError(
            f"{args.model} fit did not converge (final weighted SSE {result.sse:.6g})",
            final_sse=result.sse,
        )
    _emit({
        "model": args.model,
        "n_points": len(points),
        "params": params,
        "stderr": stderr,
        "covariance": result.covariance.tolist(),
        "sse": result.sse,
        "iterations": result.iterations,
        "converged": result.converged,
    }, args.out)
    return 0


# ---------------------------------------------------------------------------
# budget

def cmd_budget(args) -> int:
    cfg = _load_config(args)
    budget = cfg.budget
    components = {
        "eta_waveguide": budget.eta_waveguide,
        "eta_optics": budget.eta_optics,
        "eta_visibility": budget.eta_visibility,
        "eta_quantum": budget.eta_quantum,
        "eta_electronic": budget.eta_electronic,
    }
    total, total_db = physics.budget_total(budget)
    table = {
        name: {"efficiency": value,
               "db": _round_db(physics.linear_to_db(value)) if value > 0 else None}
        for name, value in components.items()
    }
    payload = {
        "components": table,
        "homodyne_efficiency": budget.homodyne_efficiency(),
        "external_efficiency": budget.external_efficiency(),
        "external_db": _round_db(physics.linear_to_db(budget.external_efficiency())),
        "total": total,
        "total_db": _round_db(total_db),
    }
    if args.measured_db is not None:
        payload["measured_db"] = _round_db(args.measured_db)
        payload["onchip_db"] = _round_db(physics.infer_onchip_squeezing(
            args.measured_db, budget.external_efficiency()))
    if args.format == "csv":
        lines = ["component,efficiency,db"]
        for name, entry in table.items():
            lines.append(f"{name},{entry['efficiency']!r},{entry['db']}")
        lines.append(f"total,{total!r},{_round_db(total_db)}")
        text = "\n".join(lines) + "\n"
        if args.out:
            Path(args.out).write_text(text)
        sys.stdout.write(text)
    else:
        _emit(payload, args.out)
    return 0


# ---------------------------------------------------------------------------
# phasematch

def cmd_phasematch(args) -> int:
    cfg = _load_config(args)
    length = cfg.waveguide.length_m
    null_spacing = 2.0 * math.pi / length
    span = args.span_nulls * null_spacing
    grid = qpm.symmetric_detuning_grid(span, args.points // 2)
    ideal = qpm.ideal_qpm_spectrum(grid, length)

    defective = None
    if args.jitter > 0 or args.flip_prob > 0:
        if cfg.waveguide.poling_period_um <= 0:
            raise ConfigError("defective spectrum needs waveguide.poling_period_um")
        poling = qpm.jittered_poling_map(
            length, cfg.waveguide.poling_period_um,
            jitter_frac=args.jitter, flip_probability=args.flip_prob,
            seed=args.map_seed)
        defective = qpm.defective_qpm_spectrum(poling, grid)

    if args.dispersion:
        table = qpm.load_dispersion_csv(args.dispersion)
        gvm = qpm.gvm_from_dispersion(table, args.wavelength_nm)
        gvm_source = "dispersion table"
    else:
        gvm = cfg.waveguide.gvm_ps_per_mm
        gvm_source = "config"

    out_dir = Path(_require(args.out, "--out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    spectrum_path = out_dir / "spectrum.csv"
    with open(spectrum_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["delta_k_per_m", "efficiency"]
        if defective is not None:
            header.append("defective_efficiency")
        writer.writerow(header)
        for i in range(grid.size):
            row = [repr(float(grid[i])), repr(float(ideal[i]))]
            if defective is not None:
                row.append(repr(float(defective[i])))
            writer.writerow(row)

    payload = {
        "length_m": length,
        "gvm_ps_per_mm": gvm,
        "gvm_source": gvm_source,
        "walkoff_ps": qpm.temporal_walkoff(gvm, length),
        "first_null_delta_k_per_m": null_spacing,
        "spectrum_csv": str(spectrum_path),
    }
    if defective is not None:
        payload["defective_peak"] = float(np.max(defective))
        payload["defective_asymmetry"] = qpm.spectrum_asymmetry(grid, defective)
    if cfg.filter_fwhm_hz is not None:
        payload["transform_limit_s"] = {
            "gaussian": qpm.filtered_pulse_duration(cfg.filter_fwhm_hz, "gaussian"),
            "rectangular": qpm.filtered_pulse_duration(cfg.filter_fwhm_hz, "rectangular"),
        }
        if cfg.signal_fwhm_s is not None:
            payload["signal_fwhm_s"] = cfg.signal_fwhm_s
            payload["exceeds_transform_limit"] = bool(
                cfg.signal_fwhm_s > payload["transform_limit_s"]["rectangular"])
    _emit(payload, str(out_dir / "phasematch.json"))
    return 0


# ---------------------------------------------------------------------------
# report

def cmd_report(args) -> int:
    cfg = _load_config(args)
    fitted_eta = None
    s_minus_db = None
    s_minus_err = None
    if args.artifacts:
        artifacts = Path(args.artifacts)
        if not artifacts.is_dir():
            raise DataError(f"artifacts directory not found: {artifacts}")
        fit_path = artifacts / "fit_squeezing.json"
        if fit_path.exists():
            doc = json.loads(fit_path.read_text())
            fitted_eta = doc.get("params", {}).get("eta")
        summary_path = artifacts / "process_summary.json"
        if summary_path.exists():
            doc = json.loads(summary_path.read_text())
            summaries = doc.get("summaries", [])
            with_power = [s for s in summaries if s.get("avg_power_w") is not None]
            if with_power:
                top = max(with_power, key=lambda s: s["avg_power_w"])
                s_minus_db = top.get("s_minus_db")
                s_minus_err = top.get("s_minus_err_db")
    rep = build_report(cfg, fitted_eta=fitted_eta,
                       processed_s_minus_db=s_minus_db,
                       processed_s_minus_err_db=s_minus_err)
    if args.format == "json":
        _emit(rep.as_dict(), args.out)
    else:
        text = rep.as_text() + "\n"
        if args.out:
            Path(args.out).write_text(text)
        sys.stdout.write(text)
    return 0 if rep.all_passed else 1


# ---------------------------------------------------------------------------
# default-config helper

def cmd_default_config(args) -> int:
    _emit(default_config_dict(), args.out)
    return 0


# ---------------------------------------------------------------------------

def _env(name: str, cast=str):
    raw = os.environ.get(f"SQZ_{name}")
    if raw is None:
        return None
    try:
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"bad environment override SQZ_{name}={raw!r}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqzkit",
        description="Pulsed waveguide squeezing: simulation, DSP, and fits",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=_env("CONFIG"),
                        help="run configuration JSON (env SQZ_CONFIG)")
    common.add_argument("--seed", type=int, default=_env("SEED", int),
                        help="override the acquisition seed (env SQZ_SEED)")
    common.add_argument("--out", default=_env("OUT"),
                        help="output directory or file (env SQZ_OUT)")
    common.add_argument("--threads", type=int, default=_env("THREADS", int) or 1,
                        help="worker hint; results are thread-count independent")
    common.add_argument("--format", default=_env("FORMAT"),
                        help="output format where applicable (env SQZ_FORMAT)")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common],
                       help="write synthetic trace files plus manifest")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("process", parents=[common],
                       help="traces -> binned variances and squeezing levels")
    p.add_argument("--manifest", help="manifest.json from simulate")
    p.add_argument("traces", nargs="*", help="trace files (alternative to --manifest)")
    p.add_argument("--subtract-electronic", action="store_true",
                   help="remove the electronic floor before normalizing")
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("fit", parents=[common],
                       help="fit the gain or squeezing power curve")
    p.add_argument("--model", choices=("gain", "squeezing"), required=True)
    p.add_argument("--summary", help="process_summary.json from process")
    p.add_argument("--points", help="CSV: peak_power_w,value_db,sign[,err_db]")
    p.add_argument("--alpha", type=float,
                   help="fixed conversion efficiency for the squeezing fit (/W)")
    p.add_argument("--free-alpha", action="store_true",
                   help="float alpha in the squeezing fit")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("budget", parents=[common],
                       help="detection-efficiency table and on-chip inference")
    p.add_argument("--measured-db", type=float,
                   help="measured squeezing (dB) to refer back on-chip")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("phasematch", parents=[common],
                       help="phase-matching spectrum and walk-off report")
    p.add_argument("--dispersion", help="dispersion CSV (band,wavelength_nm,n_eff,n_g)")
    p.add_argument("--wavelength-nm", type=float, default=1556.6,
                   help="fundamental wavelength for the walk-off lookup")
    p.add_argument("--points", type=int, default=801, help="grid points (odd)")
    p.add_argument("--span-nulls", type=float, default=4.0,
                   help="grid half-width in units of the first-null spacing")
    p.add_argument("--jitter", type=float, default=0.0,
                   help="poling period jitter fraction for a defective spectrum")
    p.add_argument("--flip-prob", type=float, default=0.0,
                   help="domain sign-flip defect probability")
    p.add_argument("--map-seed", type=int, default=0)
    p.set_defaults(func=cmd_phasematch)

    p = sub.add_parser("report", parents=[common],
                       help="recompute the reference quantities with pass/fail")
    p.add_argument("--artifacts", help="directory with process/fit outputs")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("default-config", parents=[common],
                       help="print the reference configuration")
    p.set_defaults(func=cmd_default_config)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = "text" if args.command == "report" else "json"
    allowed_formats = {"report": ("text", "json")}.get(args.command, ("json", "csv"))
    try:
        if args.format not in allowed_formats:
            raise ConfigError(
                f"--format {args.format!r} not supported by {args.command} "
                f"(choose from {allowed_formats})"
            )
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        return args.func(args)
    except ConfigError as exc:
        _error(exc, "config")
        return 2
    except FitConvergenceError as exc:
        _error(exc, "fit")
        return 4
    except DataError as exc:
        _error(exc, "data")
        return 3
    except SqzError as exc:
        _error(exc, "error")
        return 3


def _error(exc: Exception, category: str) -> None:
    sys.stderr.write(json.dumps({
        "error": category,
        "type": type(exc).__name__,
        "message": str(exc),
    }) + "\n")


if __name__ == "__main__":
    sys.exit(main())
