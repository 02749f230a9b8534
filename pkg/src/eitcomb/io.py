"""Deterministic serialization: scenario configs, CSV tables, PGM heatmaps.

Config files are line-oriented ``key = value`` text under ``[section]``
headers. Unknown sections or keys are hard errors (no silent typos); missing
keys take the documented defaults. All rates carry their unit in the key
name. Writers are byte-deterministic for identical inputs: CSV uses nine
significant digits, '#'-prefixed comment headers, comma separators and LF
endings; heatmaps are binary 16-bit P5 PGM.
"""

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .model import (
    MagneticSpec,
    MediumSpec,
    ModulationSpec,
    ProbeShape,
    ProbeSpec,
    Scenario,
    TimeGrid,
    ValidationError,
    Waveform,
)
from .synthesis import SweepMap2D, TimeTrace

_FLOAT_FMT = "%.8e"  # nine significant digits


class ConfigError(ValidationError):
    """Malformed or unknown content in a scenario config."""


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return _FLOAT_FMT % value
    return str(value)


def _parse_float(raw: str, line_no: int, key: str) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"line {line_no}: key '{key}': malformed number {raw!r}") from None
    if math.isnan(v):
        raise ConfigError(f"line {line_no}: key '{key}': NaN is not a value")
    return v


def _parse_int(raw: str, line_no: int, key: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"line {line_no}: key '{key}': malformed integer {raw!r}") from None


def _parse_bool(raw: str, line_no: int, key: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"line {line_no}: key '{key}': expected a boolean, got {raw!r}")


def _parse_floats(raw: str, line_no: int, key: str) -> tuple:
    parts = [p for p in re.split(r"[,\s]+", raw.strip()) if p]
    return tuple(_parse_float(p, line_no, key) for p in parts)


def _parse_choice(options):
    def parse(raw, line_no, key):
        low = raw.strip().lower()
        if low not in options:
            raise ConfigError(f"line {line_no}: key '{key}': expected one of {options}, got {raw!r}")
        return low
    return parse


# section -> key -> (parser, default). None default means "optional, absent".
_SCHEMA = {
    "modulation": {
        "modulation_index": (_parse_float, 20.0),
        "mod_frequency_hz": (_parse_float, 5e3),
        "waveform": (_parse_choice(("sine", "cosine")), "sine"),
    },
    "medium": {
        "alpha": (_parse_float, 1.0),
        "gamma_hz": (_parse_float, 1e6),
        "gamma_doppler_hz": (_parse_float, 0.0),
        "gamma_12_hz": (_parse_float, 1e3),
        "rabi_coupling_hz": (_parse_float, 77459.6669241483),
    },
    "probe": {
        "shape": (_parse_choice(("square", "cw")), "square"),
        "amplitude": (_parse_float, 1.0),
        "turn_on_s": (_parse_float, 2e-4),
        "duration_s": (_parse_float, 1.3e-3),
        "rabi_probe_hz": (_parse_float, 3872.983346207417),
        "delta_one_photon_hz": (_parse_float, 0.0),
        "delta_two_photon_hz": (_parse_float, 0.0),
    },
    "magnetic": {
        "field_gauss": (_parse_float, 0.0),
        "g_lower": (_parse_float, 0.5),
        "g_upper": (_parse_float, 0.5),
        "bohr_magneton_mhz_per_gauss": (_parse_float, 1.3996),
        "weight_minus2": (_parse_float, 0.25),
        "weight_zero": (_parse_float, 0.5),
        "weight_plus2": (_parse_float, 0.25),
    },
    "grids": {
        "time_span_s": (_parse_float, None),
        "freq_span_hz": (_parse_float, None),
        "sweep_kind": (_parse_choice(("none", "two_photon_detuning", "magnetic_field")), "none"),
        "sweep_start": (_parse_float, 0.0),
        "sweep_stop": (_parse_float, 0.0),
        "sweep_count": (_parse_int, 0),
    },
    "run": {
        "observable": (_parse_choice(("amplitude", "intensity")), "amplitude"),
        "scale": (_parse_choice(("linear", "log")), "linear"),
        "bypass_medium": (_parse_bool, False),
        "beer_lambert_kappa": (_parse_float, None),
        "oracle_tolerance": (_parse_float, 1e-4),
        "beta_values": (_parse_floats, ()),
        "field_true_gauss": (_parse_float, None),
        "bank_count": (_parse_int, 25),
        "bank_margin": (_parse_float, 0.98),
        "noise_amplitude": (_parse_float, 1e-3),
        "measurement_time_s": (_parse_float, 1.0),
        "measured_trace_csv": (str, None),
        "atom_density_m3": (_parse_float, 1e16),
        "cell_volume_m3": (_parse_float, 5.9e-8),
    },
}

_SECTION_ORDER = ("modulation", "medium", "probe", "magnetic", "grids", "run")


@dataclass(frozen=True)
class ScenarioConfig:
    """Resolved config: every schema key bound to a value (or None)."""

    values: dict
    has_magnetic: bool = False

    def get(self, section: str, key: str):
        return self.values[section][key]

    def scenario(self) -> Scenario:
        v = self.values
        mod = ModulationSpec(
            modulation_index=v["modulation"]["modulation_index"],
            mod_frequency=v["modulation"]["mod_frequency_hz"],
            waveform=Waveform.SINE if v["modulation"]["waveform"] == "sine" else Waveform.COSINE)
        medium = MediumSpec(
            alpha=v["medium"]["alpha"],
            gamma_hom=v["medium"]["gamma_hz"],
            gamma_doppler=v["medium"]["gamma_doppler_hz"],
            gamma_12=v["medium"]["gamma_12_hz"],
            rabi_coupling=v["medium"]["rabi_coupling_hz"])
        probe = ProbeSpec(
            shape=ProbeShape.SQUARE_PULSE if v["probe"]["shape"] == "square" else ProbeShape.CONTINUOUS_WAVE,
            amplitude=v["probe"]["amplitude"],
            turn_on=v["probe"]["turn_on_s"],
            duration=v["probe"]["duration_s"],
            rabi_probe=v["probe"]["rabi_probe_hz"],
            delta_one_photon=v["probe"]["delta_one_photon_hz"],
            delta_two_photon=v["probe"]["delta_two_photon_hz"])
        magnetic = None
        if self.has_magnetic:
            m = v["magnetic"]
            magnetic = MagneticSpec(
                field=m["field_gauss"], g_lower=m["g_lower"], g_upper=m["g_upper"],
                bohr_magneton_over_h=m["bohr_magneton_mhz_per_gauss"],
                channels=((-2, m["weight_minus2"]), (0, m["weight_zero"]), (2, m["weight_plus2"])))
        return Scenario(mod, medium, probe, magnetic)


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a scenario config; unknown keys are hard errors."""
    values = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in _SCHEMA.items()}
    seen_sections = set()
    section = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {line_no}: malformed section header {line!r}")
            section = line[1:-1].strip().lower()
            if section not in _SCHEMA:
                raise ConfigError(f"line {line_no}: unknown section [{section}]")
            seen_sections.add(section)
            continue
        if section is None:
            raise ConfigError(f"line {line_no}: key outside any [section]")
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {line!r}")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(f"line {line_no}: unknown key '{key}' in section [{section}]")
        parser, _default = _SCHEMA[section][key]
        if parser is str:
            values[section][key] = raw_value
        else:
            values[section][key] = parser(raw_value, line_no, key)

    cfg = ScenarioConfig(values, has_magnetic="magnetic" in seen_sections)
    cfg.scenario()  # surface spec-level validation errors now
    if cfg.get("grids", "sweep_kind") != "none" and cfg.get("grids", "sweep_count") < 1:
        raise ConfigError("a sweep needs sweep_count >= 1")
    return cfg


def serialize_config(cfg: ScenarioConfig) -> str:
    """Canonical text form; parse(serialize(cfg)) resolves identically."""
    lines = []
    for section in _SECTION_ORDER:
        if section == "magnetic" and not cfg.has_magnetic:
            continue
        lines.append(f"[{section}]")
        for key in _SCHEMA[section]:
            value = cfg.values[section][key]
            if value is None:
                continue
            if isinstance(value, tuple):
                if not value:
                    continue
                lines.append(f"{key} = " + " ".join(_FLOAT_FMT % x for x in value))
            else:
                lines.append(f"{key} = {_fmt(value)}")
        lines.append("")
    return "\n".join(lines)


# --- CSV -------------------------------------------------------------------

def _meta_lines(meta: dict) -> list[str]:
    return [f"# {k}={_fmt(v)}" for k, v in sorted(meta.items())]


def write_trace_csv(trace: TimeTrace, path) -> None:
    """time, real, imag columns with '#' metadata header."""
    if trace.grid.count == 0:
        raise ValidationError("empty trace")
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("# eitcomb_trace\n")
            fh.write(f"# time_start_s={_FLOAT_FMT % trace.grid.start}\n")
            fh.write(f"# time_step_s={_FLOAT_FMT % trace.grid.step}\n")
            fh.write(f"# time_count={trace.grid.count}\n")
            for line in _meta_lines(trace.metadata):
                fh.write(line + "\n")
            fh.write("time_s,real,imag\n")
            t = trace.grid.values()
            for i in range(trace.grid.count):
                fh.write(_FLOAT_FMT % t[i] + "," + _FLOAT_FMT % trace.amplitude[i].real
                         + "," + _FLOAT_FMT % trace.amplitude[i].imag + "\n")
    except OSError as exc:
        raise ValidationError(f"cannot write trace to {path}: {exc}") from exc


def read_trace_csv(path) -> TimeTrace:
    meta = {}
    rows = []
    try:
        with open(path, "r") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    body = line[1:].strip()
                    if "=" in body:
                        k, _, v = body.partition("=")
                        meta[k.strip()] = v.strip()
                    continue
                if line.startswith("time_s"):
                    continue
                rows.append([float(x) for x in line.split(",")])
    except OSError as exc:
        raise ValidationError(f"cannot read trace from {path}: {exc}") from exc
    if not rows:
        raise ValidationError(f"no data rows in {path}")
    arr = np.array(rows)
    grid = TimeGrid(float(meta.get("time_start_s", arr[0, 0])),
                    float(meta.get("time_step_s", arr[1, 0] - arr[0, 0])),
                    int(meta.get("time_count", len(rows))))
    keep = {k: v for k, v in meta.items() if k not in ("time_start_s", "time_step_s", "time_count")}
    return TimeTrace(grid, arr[:, 1] + 1j * arr[:, 2], keep)


def write_map_csv(sweep: SweepMap2D, path) -> None:
    """Row per sweep value, column per time sample, '#' metadata header."""
    if sweep.values.size == 0:
        raise ValidationError("empty map")
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("# eitcomb_map\n")
            fh.write(f"# row_label={sweep.row_label}\n")
            fh.write("# row_values=" + ",".join(_FLOAT_FMT % v for v in sweep.row_axis) + "\n")
            fh.write(f"# time_start_s={_FLOAT_FMT % sweep.time_grid.start}\n")
            fh.write(f"# time_step_s={_FLOAT_FMT % sweep.time_grid.step}\n")
            fh.write(f"# time_count={sweep.time_grid.count}\n")
            for line in _meta_lines(sweep.metadata):
                fh.write(line + "\n")
            for row in sweep.values:
                fh.write(",".join(_FLOAT_FMT % v for v in row) + "\n")
    except OSError as exc:
        raise ValidationError(f"cannot write map to {path}: {exc}") from exc


def read_map_csv(path) -> SweepMap2D:
    meta = {}
    rows = []
    try:
        with open(path, "r") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    body = line[1:].strip()
                    if "=" in body:
                        k, _, v = body.partition("=")
                        meta[k.strip()] = v.strip()
                    continue
                rows.append([float(x) for x in line.split(",")])
    except OSError as exc:
        raise ValidationError(f"cannot read map from {path}: {exc}") from exc
    if not rows:
        raise ValidationError(f"no data rows in {path}")
    values = np.array(rows)
    row_axis = np.array([float(x) for x in meta["row_values"].split(",")])
    grid = TimeGrid(float(meta["time_start_s"]), float(meta["time_step_s"]),
                    int(meta["time_count"]))
    keep = {k: v for k, v in meta.items()
            if k not in ("row_label", "row_values", "time_start_s", "time_step_s", "time_count")}
    return SweepMap2D(row_axis, meta.get("row_label", "sweep"), grid, values, keep)


def write_columns_csv(path, header: list[str], columns: list, meta: dict | None = None) -> None:
    """Generic aligned-column table with the same conventions."""
    cols = [np.asarray(c) for c in columns]
    if not cols or any(len(c) != len(cols[0]) for c in cols):
        raise ValidationError("columns must be non-empty and equally long")
    try:
        with open(path, "w", newline="\n") as fh:
            for line in _meta_lines(meta or {}):
                fh.write(line + "\n")
            fh.write(",".join(header) + "\n")
            for i in range(len(cols[0])):
                fh.write(",".join(_FLOAT_FMT % c[i] for c in cols) + "\n")
    except OSError as exc:
        raise ValidationError(f"cannot write table to {path}: {exc}") from exc


# --- PGM -------------------------------------------------------------------

_PGM_MAX = 65535
_LOG_FLOOR = 1e-6  # log scale clips below max * this


def write_heatmap_pgm(sweep: SweepMap2D, path, scale: str = "linear") -> None:
    """Binary 16-bit P5 heatmap; rows follow the sweep axis from lowest value.

    Values are min-max normalized (after log10 compression for the log
    scale, clipped at 1e-6 of the maximum). A constant map degenerates to
    all-zero pixels by convention. Bytes are deterministic for equal input.
    """
    if scale not in ("linear", "log"):
        raise ValidationError(f"unknown scale {scale!r}")
    vals = sweep.values
    if vals.size == 0:
        raise ValidationError("empty map")
    if not np.all(np.isfinite(vals)):
        raise ValidationError("map contains non-finite values; refusing to render")
    order = np.argsort(sweep.row_axis, kind="stable")
    data = vals[order].astype(float)
    if scale == "log":
        top = float(data.max())
        if top <= 0.0:
            data = np.zeros_like(data)
        else:
            floor = top * _LOG_FLOOR
            data = np.log10(np.clip(data, floor, None))
    lo, hi = float(data.min()), float(data.max())
    if hi > lo:
        norm = (data - lo) / (hi - lo)
    else:
        norm = np.zeros_like(data)
    pixels = np.round(norm * _PGM_MAX).astype(">u2")
    height, width = pixels.shape
    try:
        with open(path, "wb") as fh:
            fh.write(f"P5\n{width} {height}\n{_PGM_MAX}\n".encode("ascii"))
            fh.write(pixels.tobytes())
    except OSError as exc:
        raise ValidationError(f"cannot write heatmap to {path}: {exc}") from exc
