"""Command-line orchestration: config in, CSV/PGM products and a manifest out.

Subcommands map one-to-one onto the toolkit's artifacts:

  trace        transmitted-probe time trace (optionally with the integration
               oracle and their normalized RMS difference)
  sweep        detuning or field sweep: 2-D map CSV, PGM heatmap, integrated
               spectrum CSV
  spectrum     steady transmission spectrum against two-photon detuning
  decay-curve  ringing decay time versus the crossing parameter
  magnetometry template-bank field estimate, correlation curve, sensitivity
  rerun        re-execute a run from its manifest (byte-identical outputs)
  presets      list the shipped preset configs

Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 field
estimation ambiguity.
"""

import argparse
import importlib.resources
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, analysis, bloch, io as eio, synthesis
from .model import (
    AmbiguityError,
    NumericsError,
    ProbeShape,
    ProbeSpec,
    ValidationError,
    eit_linewidth,
    validate,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICS = 3
EXIT_AMBIGUITY = 4

_PRESET_PREFIX = "preset:"


def preset_names() -> list[str]:
    root = importlib.resources.files("eitcomb") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def load_config_text(spec: str) -> str:
    if spec.startswith(_PRESET_PREFIX):
        name = spec[len(_PRESET_PREFIX):]
        res = importlib.resources.files("eitcomb") / "presets" / f"{name}.cfg"
        if not res.is_file():
            raise ValidationError(
                f"unknown preset {name!r}; available: {', '.join(preset_names())}")
        return res.read_text()
    path = Path(spec)
    if not path.is_file():
        raise ValidationError(f"config file not found: {spec}")
    return path.read_text()


def resolve_threads(opt: int | None) -> int:
    if opt is not None:
        return max(1, opt)
    env = os.environ.get("EIT_SIM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"EIT_SIM_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _emit_warnings(scenario) -> None:
    for issue in validate(scenario):
        print(f"warning: {issue.message}", file=sys.stderr)


def _write_manifest(out_dir: Path, subcommand: str, cfg, outputs: list[str],
                    started: float, extra: dict | None = None) -> Path:
    manifest = {
        "tool": "eitcomb",
        "version": __version__,
        "subcommand": subcommand,
        "config": eio.serialize_config(cfg),
        "outputs": sorted(outputs),
        "wall_time_s": time.monotonic() - started,
    }
    if extra:
        manifest["results"] = extra
    path = out_dir / f"{subcommand.replace('-', '_')}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _sweep_values(cfg) -> np.ndarray:
    count = cfg.get("grids", "sweep_count")
    return np.linspace(cfg.get("grids", "sweep_start"), cfg.get("grids", "sweep_stop"), count)


# --- subcommands ------------------------------------------------------------

def cmd_trace(cfg, out_dir: Path, args) -> dict:
    scenario = cfg.scenario()
    _emit_warnings(scenario)
    grid = synthesis.default_time_grid(scenario.modulation, scenario.medium,
                                       scenario.probe, scenario.magnetic)
    trace = synthesis.transmit(
        scenario.probe, scenario.medium, scenario.modulation, scenario.magnetic, grid,
        bypass_medium=cfg.get("run", "bypass_medium"),
        kappa=cfg.get("run", "beer_lambert_kappa"))
    outputs = []
    tp = out_dir / "trace.csv"
    eio.write_trace_csv(trace, tp)
    outputs.append(tp.name)
    results = {}
    if args.oracle:
        if cfg.get("run", "bypass_medium"):
            raise ValidationError("the oracle comparison is meaningless with the medium bypassed")
        oracle_sys = bloch.from_scenario(scenario)
        tol = cfg.get("run", "oracle_tolerance")
        if scenario.magnetic is not None:
            rho13 = bloch.magnetic_probe_trace(oracle_sys, scenario.magnetic, grid, tol)
        else:
            rho13 = bloch.oracle_probe_trace(oracle_sys, grid, tol)
        # linear-response scale bridging the comb trace and the coherence
        scale = scenario.medium.alpha / (2.0 * math.pi * scenario.probe.rabi_probe
                                         * scenario.probe.amplitude)
        oracle_trace = synthesis.TimeTrace(grid, rho13 * scale,
                                           trace.metadata | {"oracle": True})
        op = out_dir / "trace_oracle.csv"
        eio.write_trace_csv(oracle_trace, op)
        outputs.append(op.name)
        t = grid.values()
        settle = scenario.probe.turn_on + synthesis.settle_time(scenario.medium)
        end = scenario.probe.turn_on + scenario.probe.duration
        sel = (t >= settle) & (t <= end)
        a = np.abs(trace.amplitude[sel])
        b = np.abs(oracle_trace.amplitude[sel])
        nrms = float(np.sqrt(np.mean((a - b) ** 2)) / np.sqrt(np.mean(a**2)))
        results["oracle_nrms"] = nrms
        print(f"comb vs oracle normalized RMS over the settled window: {nrms:.4f}")
    return {"outputs": outputs, "results": results}


def cmd_sweep(cfg, out_dir: Path, args) -> dict:
    scenario = cfg.scenario()
    _emit_warnings(scenario)
    kind = cfg.get("grids", "sweep_kind")
    if kind == "none":
        raise ValidationError("the sweep subcommand needs grids.sweep_kind set")
    observable = args.observable or cfg.get("run", "observable")
    sweep = synthesis.sweep_map(
        scenario, kind, _sweep_values(cfg), observable=observable,
        threads=args.threads_resolved, kappa=cfg.get("run", "beer_lambert_kappa"))
    outputs = []
    mp = out_dir / "map.csv"
    eio.write_map_csv(sweep, mp)
    outputs.append(mp.name)
    pgm = out_dir / "map.pgm"
    eio.write_heatmap_pgm(sweep, pgm, scale=args.scale or cfg.get("run", "scale"))
    outputs.append(pgm.name)
    spectrum = synthesis.integrated_spectrum(sweep)
    sp = out_dir / "integrated_spectrum.csv"
    eio.write_columns_csv(sp, [sweep.row_label, "integrated"],
                          [sweep.row_axis, spectrum],
                          {"observable": observable})
    outputs.append(sp.name)
    return {"outputs": outputs, "results": {}}


def cmd_spectrum(cfg, out_dir: Path, args) -> dict:
    scenario = cfg.scenario()
    _emit_warnings(scenario)
    if cfg.get("grids", "sweep_kind") != "two_photon_detuning":
        raise ValidationError("the spectrum subcommand sweeps two-photon detuning; "
                              "set grids.sweep_kind accordingly")
    detunings = _sweep_values(cfg)
    observable = args.observable or cfg.get("run", "observable")
    power = 1 if observable == "amplitude" else 2

    def one(delta: float) -> float:
        tr = synthesis.cw_periodic_trace(
            scenario.medium, scenario.modulation, delta1=scenario.probe.delta_one_photon + delta,
            delta2=scenario.probe.delta_two_photon + delta, magnetic=scenario.magnetic,
            amplitude=scenario.probe.amplitude)
        return float(np.mean(np.abs(tr.amplitude) ** power))

    if args.threads_resolved > 1:
        with ThreadPoolExecutor(max_workers=args.threads_resolved) as pool:
            mags = np.array(list(pool.map(one, detunings)))
    else:
        mags = np.array([one(d) for d in detunings])
    outputs = []
    sp = out_dir / "spectrum.csv"
    eio.write_columns_csv(sp, ["two_photon_detuning_hz", "mean_response"],
                          [detunings, mags],
                          {"field_gauss": scenario.magnetic.field if scenario.magnetic else 0.0,
                           "observable": observable})
    outputs.append(sp.name)
    return {"outputs": outputs, "results": {}}


def cmd_decay_curve(cfg, out_dir: Path, args) -> dict:
    scenario = cfg.scenario()
    betas = cfg.get("run", "beta_values")
    if not betas:
        raise ValidationError("the decay-curve subcommand needs run.beta_values")
    points = analysis.decay_vs_beta_curve(scenario.medium, betas, on_error="record")
    outputs = []
    dp = out_dir / "decay_curve.csv"
    eio.write_columns_csv(
        dp, ["beta", "modulation_index", "mod_frequency_hz", "tau_s", "r_squared"],
        [[p.beta for p in points], [p.modulation_index for p in points],
         [p.mod_frequency for p in points], [p.tau for p in points],
         [p.fit_quality for p in points]],
        {"gamma_eit_hz": eit_linewidth(scenario.medium)})
    outputs.append(dp.name)

    tau_plateau = 2.0 / (2.0 * math.pi * eit_linewidth(scenario.medium))
    results = {"tau_plateau_s": tau_plateau}
    low = [p for p in points if p.beta <= 0.1 and math.isfinite(p.tau)]
    if low:
        ratios = [p.tau / tau_plateau for p in low]
        results["plateau_ratio_min"] = min(ratios)
        results["plateau_ratio_max"] = max(ratios)
        print(f"plateau (beta <= 0.1): tau/tau_plateau in "
              f"[{min(ratios):.3f}, {max(ratios):.3f}] over {len(low)} points")
    lin = [p for p in points if 3.0 <= p.beta <= 10.0 and math.isfinite(p.tau)]
    if len(lin) >= 3:
        bx = np.array([p.beta for p in lin])
        ty = np.array([p.tau for p in lin])
        design = np.vstack([bx, np.ones_like(bx)]).T
        sol, *_ = np.linalg.lstsq(design, ty, rcond=None)
        resid = ty - design @ sol
        r2 = 1.0 - float(np.sum(resid**2)) / float(np.sum((ty - ty.mean()) ** 2))
        results["linear_slope_s_per_beta"] = float(sol[0])
        results["linear_r_squared"] = r2
        print(f"adiabatic branch (beta in [3, 10]): linear fit slope "
              f"{sol[0] * 1e6:.2f} us/beta, R^2 = {r2:.4f}")
    failed = [p.beta for p in points if not math.isfinite(p.tau)]
    if failed:
        print(f"fit failed for beta values: {failed}", file=sys.stderr)
    return {"outputs": outputs, "results": results}


def _magnetometry_bank(scenario, grid, fields, threads):
    def one(field_value: float):
        magnetic = replace(scenario.magnetic, field=float(field_value))
        return synthesis.transmit(scenario.probe, scenario.medium, scenario.modulation,
                                  magnetic, grid)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            traces = list(pool.map(one, fields))
    else:
        traces = [one(f) for f in fields]
    return dict(zip((float(f) for f in fields), traces))


def cmd_magnetometry(cfg, out_dir: Path, args) -> dict:
    scenario = cfg.scenario()
    _emit_warnings(scenario)
    if scenario.magnetic is None:
        raise ValidationError("magnetometry needs a [magnetic] section")
    mag = scenario.magnetic
    b_max = analysis.bmax(scenario.modulation, 2, mag.g_lower, mag.bohr_magneton_over_h)

    margin = cfg.get("run", "bank_margin")
    count = cfg.get("run", "bank_count")
    if not (0 < margin <= 1.0):
        raise ValidationError("bank_margin must be in (0, 1]")
    fields = np.linspace(b_max * margin / count, b_max * margin, count)

    grid = synthesis.default_time_grid(scenario.modulation, scenario.medium, scenario.probe,
                                       replace(mag, field=b_max))
    measured_path = cfg.get("run", "measured_trace_csv")
    b_true = cfg.get("run", "field_true_gauss")
    if measured_path:
        measured = eio.read_trace_csv(measured_path)
        if measured.grid != grid:
            raise ValidationError(
                "the measured trace grid does not match the bank grid for this config")
    elif b_true is not None:
        if abs(b_true) > b_max:
            raise AmbiguityError(
                f"true field {b_true:.4g} G lies beyond the unambiguous range "
                f"{b_max:.4g} G (the channel sweeps never cross resonance there)")
        measured = synthesis.transmit(scenario.probe, scenario.medium, scenario.modulation,
                                      replace(mag, field=float(b_true)), grid)
    else:
        raise ValidationError("magnetometry needs run.field_true_gauss or run.measured_trace_csv")

    bank = _magnetometry_bank(scenario, grid, fields, args.threads_resolved)
    settle = scenario.probe.turn_on + synthesis.settle_time(scenario.medium)
    window = (settle, scenario.probe.turn_on + scenario.probe.duration)
    b_est, scores = analysis.estimate_field(measured, bank, window)

    gradient = analysis.correlation_gradient(fields, scores, b_est)
    noise = cfg.get("run", "noise_amplitude")
    t_meas = cfg.get("run", "measurement_time_s")
    report = analysis.SensitivityReport(
        noise=noise, gradient=gradient, measurement_time=t_meas,
        sensitivity=analysis.sensitivity(noise, gradient, t_meas),
        ultimate=analysis.ultimate_sensitivity(
            eit_linewidth(scenario.medium), cfg.get("run", "atom_density_m3"),
            cfg.get("run", "cell_volume_m3"), mag.g_lower),
        b_max=b_max)

    outputs = []
    cp = out_dir / "correlation_curve.csv"
    eio.write_columns_csv(cp, ["field_gauss", "correlation"], [fields, scores],
                          {"b_est_gauss": b_est})
    outputs.append(cp.name)
    rp = out_dir / "magnetometry_report.json"
    payload = {
        "field_estimate_gauss": b_est,
        "b_max_gauss": report.b_max,
        "noise_per_sqrt_hz": report.noise,
        "correlation_gradient_per_gauss": report.gradient,
        "measurement_time_s": report.measurement_time,
        "sensitivity_gauss_per_sqrt_hz": report.sensitivity,
        "ultimate_gauss_per_sqrt_hz": report.ultimate,
    }
    if b_true is not None:
        payload["field_true_gauss"] = b_true
    rp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    outputs.append(rp.name)
    print(f"estimated field: {b_est * 1e3:.3f} mG (unambiguous range "
          f"{report.b_max * 1e3:.1f} mG)")
    print(f"sensitivity: {report.sensitivity:.3e} G/sqrt(Hz); "
          f"ultimate bound: {report.ultimate:.3e} G/sqrt(Hz)")
    return {"outputs": outputs, "results": payload}


_DISPATCH = {
    "trace": cmd_trace,
    "sweep": cmd_sweep,
    "spectrum": cmd_spectrum,
    "decay-curve": cmd_decay_curve,
    "magnetometry": cmd_magnetometry,
}


def cmd_rerun(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    sub = manifest["subcommand"]
    if sub not in _DISPATCH:
        raise ValidationError(f"manifest names an unknown subcommand {sub!r}")
    cfg = eio.parse_config(manifest["config"])
    return _run_subcommand(sub, cfg, args)


def _run_subcommand(sub: str, cfg, args) -> int:
    started = time.monotonic()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = _DISPATCH[sub](cfg, out_dir, args)
    _write_manifest(out_dir, sub, cfg, result["outputs"], started, result["results"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eitcomb",
        description="Transient EIT under strong phase modulation: simulation and analysis")
    parser.add_argument("--version", action="version", version=f"eitcomb {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True,
                           help="config file path, or preset:NAME for a shipped preset")
        p.add_argument("--out", default="eitcomb_out", help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: EIT_SIM_THREADS or CPU count)")
        p.add_argument("--scale", choices=("linear", "log"), default=None,
                       help="heatmap intensity scale (overrides run.scale)")
        p.add_argument("--observable", choices=("amplitude", "intensity"), default=None,
                       help="map observable (overrides run.observable)")

    p = sub.add_parser("trace", help="transmitted probe time trace")
    common(p)
    p.add_argument("--oracle", action="store_true",
                   help="also integrate the density-matrix oracle and report the RMS difference")

    for name, descr in (("sweep", "2-D detuning or field sweep"),
                        ("spectrum", "steady transmission spectrum"),
                        ("decay-curve", "ringing decay time versus crossing parameter"),
                        ("magnetometry", "correlation-template field estimate")):
        p = sub.add_parser(name, help=descr)
        common(p)

    p = sub.add_parser("rerun", help="re-execute a run from its manifest")
    p.add_argument("manifest", help="path to a *_manifest.json file")
    common(p, needs_config=False)
    p.add_argument("--oracle", action="store_true", help=argparse.SUPPRESS)

    sub.add_parser("presets", help="list shipped preset configs")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "presets":
            for name in preset_names():
                print(name)
            return EXIT_OK
        args.threads_resolved = resolve_threads(getattr(args, "threads", None))
        if not hasattr(args, "oracle"):
            args.oracle = False
        if not hasattr(args, "scale"):
            args.scale = None
        if not hasattr(args, "observable"):
            args.observable = None
        if args.command == "rerun":
            return cmd_rerun(args)
        cfg = eio.parse_config(load_config_text(args.config))
        return _run_subcommand(args.command, cfg, args)
    except AmbiguityError as exc:
        print(f"ambiguity: {exc}", file=sys.stderr)
        return EXIT_AMBIGUITY
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    except (ValidationError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
