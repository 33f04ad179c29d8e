"""File formats: matrix/mask/signal CSVs with JSON sidecars, scenario
configs, report directories and the fabrication SVG.

Every write goes to a temporary file in the target directory and is then
renamed into place.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import os
import re
import tempfile
import typing
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np

from .codes import CodeMatrix, MaskPattern
from .experiments import ConfigError, ExperimentReport, ScanConfig
from .multiplex import SignalMatrix, SignalRole

log = logging.getLogger(__name__)


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _float(v: float) -> str:
    return repr(float(v))


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def read_rows(path) -> list[list[str]]:
    with open(path, newline="") as fh:
        return [row for row in csv.reader(fh) if row]


# --- code matrices and masks -------------------------------------------------

def write_matrix_csv(path, w: CodeMatrix) -> Path:
    return atomic_write(path, rows_to_csv(w.entries.tolist()))


def read_matrix_csv(path) -> CodeMatrix:
    try:
        rows = [[int(v) for v in row] for row in read_rows(path)]
    except ValueError as exc:
        raise ValueError(f"{path}: matrix CSV must hold integers ({exc})") from None
    if not rows or any(len(r) != len(rows) for r in rows):
        raise ValueError(f"{path}: matrix CSV must be square, got {len(rows)} rows of lengths {sorted({len(r) for r in rows})}")
    return CodeMatrix.from_entries(np.array(rows))


def write_mask_csv(path, mask: MaskPattern) -> Path:
    path = Path(path)
    atomic_write(path, ",".join(str(c) for c in mask.cells) + "\n")
    meta = {"n": mask.n, "pitch_mm": mask.pitch, "aperture_diameter_mm": mask.aperture_diameter,
            "base": list(mask.base)}
    atomic_write(path.with_suffix(".json"), _json(meta))
    return path


def read_mask_csv(path) -> MaskPattern:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    cells = tuple(int(v) for v in read_rows(path)[0])
    mask = MaskPattern(tuple(meta["base"]), float(meta["pitch_mm"]), float(meta["aperture_diameter_mm"]))
    if mask.cells != cells:
        raise ValueError(f"{path}: cells do not match the base sequence in the sidecar")
    return mask


# --- signals -----------------------------------------------------------------

def write_signal_csv(path, s: SignalMatrix, meta: dict | None = None) -> Path:
    """Time column (fixed decimal, seconds) then one column per element."""
    path = Path(path)
    rows = [[f"{t:.12f}"] + [_float(v) for v in col] for t, col in zip(s.times, s.values.T)]
    atomic_write(path, rows_to_csv(rows))
    sidecar = {"n": s.n, "role": s.role.value, "time_step_s": s.time_step, "t0_s": s.t0}
    sidecar.update(meta or {})
    atomic_write(path.with_suffix(".json"), _json(sidecar))
    return path


def read_signal_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Return (times, values) with values shaped (n, t)."""
    rows = read_rows(path)
    try:
        data = np.array([[float(v) for v in row] for row in rows])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry ({exc})") from None
    if data.ndim != 2 or data.shape[1] < 2:
        raise ValueError(f"{path}: need a time column and at least one signal column")
    return data[:, 0], data[:, 1:].T


def signal_from_csv(path, role=SignalRole.MEASURED) -> SignalMatrix:
    times, values = read_signal_csv(path)
    step = float(times[1] - times[0]) if times.size > 1 else 1.0
    return SignalMatrix(values, step, role, float(times[0]))


def write_table_csv(path, table: dict[str, np.ndarray]) -> Path:
    names = list(table)
    cols = [np.asarray(table[k]) for k in names]
    rows = [names] + [[_float(c[i]) if c.dtype.kind == "f" else str(c[i]) for c in cols]
                      for i in range(len(cols[0]))]
    return atomic_write(path, rows_to_csv(rows))


def write_grid_csv(path, values: np.ndarray, x_mm, y_mm) -> Path:
    """Dense grid, one CSV row per y; axes go to a JSON sidecar."""
    path = Path(path)
    atomic_write(path, rows_to_csv([[_float(v) for v in row] for row in values]))
    atomic_write(path.with_suffix(".json"), _json({"x_mm": [float(v) for v in x_mm],
                                                   "y_mm": [float(v) for v in y_mm]}))
    return path


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def write_report(report: ExperimentReport, outdir) -> Path:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = []
    for name, table in report.tables.items():
        write_table_csv(outdir / f"{name}.csv", table)
        files.append(f"{name}.csv")
    for name, grid in report.grids.items():
        write_grid_csv(outdir / f"{name}.csv", grid.values, grid.x_mm, grid.y_mm)
        files += [f"{name}.csv", f"{name}.json"]
    doc = {
        "scenario": report.scenario,
        "seed": report.seed,
        "config_hash": report.config_hash,
        "config": report.config.as_dict(),
        "results": _plain(report.results),
        "files": sorted(files),
    }
    return atomic_write(outdir / "report.json", _json(doc))


# --- configs -----------------------------------------------------------------

def _key_line(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _coerce(key: str, value, annotation, line):
    origin = typing.get_origin(annotation)
    args = typing.get_args(annotation)
    if value is None and type(None) in args:
        return None
    if origin is tuple:
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigError(key, "expected a list of numbers", line)
        return tuple(float(v) for v in value)
    target = next((a for a in args if a is not type(None)), annotation) if args else annotation
    if target is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}", line)
        return value
    if target is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}", line)
        return float(value)
    if target is str:
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}", line)
        return value
    raise ConfigError(key, "unsupported field type", line)


def parse_config(text: str, source: str = "<config>") -> ScanConfig:
    """Strict JSON config -> ScanConfig. Unknown keys are errors; missing keys take defaults."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<json>", f"{source}: {exc.msg} (column {exc.colno})", exc.lineno) from None
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a JSON object", 1)
    hints = typing.get_type_hints(ScanConfig)
    known = {f.name for f in dataclasses.fields(ScanConfig)}
    for key in doc:
        if key not in known:
            raise ConfigError(key, "unknown key (physical keys carry a unit suffix, e.g. pitch_mm)",
                              _key_line(text, key))
    values = {k: _coerce(k, v, hints[k], _key_line(text, k)) for k, v in doc.items()}
    for name in sorted(known - set(doc)):
        log.info("%s: '%s' not set, using default %r", source, name,
                 next(f.default for f in dataclasses.fields(ScanConfig) if f.name == name))
    try:
        return ScanConfig(**values)
    except ConfigError as exc:
        raise ConfigError(exc.key, str(exc).split(": ", 1)[-1], _key_line(text, exc.key)) from None


def load_config(path) -> ScanConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def dump_config(cfg: ScanConfig) -> str:
    return _json(cfg.as_dict())


# --- fabrication export ------------------------------------------------------

def mask_svg(mask: MaskPattern) -> str:
    """SVG in millimetre units: outline of the 2n-1 cell strip and one circle per open cell."""
    p, d = mask.pitch, mask.aperture_diameter
    margin = p
    width = mask.length + 2 * margin
    height = p + 2 * margin
    svg = ET.Element("svg", {
        "xmlns": "http://www.w3.org/2000/svg",
        "width": f"{width:g}mm",
        "height": f"{height:g}mm",
        "viewBox": f"0 0 {width:g} {height:g}",
    })
    meta = {"n": mask.n, "base": "".join(map(str, mask.base)), "pitch_mm": p,
            "aperture_diameter_mm": d, "cells": len(mask.cells), "array_span_mm": mask.array_span}
    svg.append(ET.Comment(" cha-mask " + json.dumps(meta, sort_keys=True) + " "))
    ET.SubElement(svg, "rect", {"x": f"{margin:g}", "y": f"{margin:g}", "width": f"{mask.length:g}",
                                "height": f"{p:g}", "fill": "none", "stroke": "black", "stroke-width": "0.05"})
    cy = margin + p / 2
    for k, cell in enumerate(mask.cells):
        if cell:
            ET.SubElement(svg, "circle", {"cx": f"{margin + (k + 0.5) * p:g}", "cy": f"{cy:g}",
                                          "r": f"{d / 2:g}", "fill": "none", "stroke": "red",
                                          "stroke-width": "0.05", "data-cell": str(k)})
    ET.indent(svg)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(svg, encoding="unicode") + "\n"


def parse_svg_metadata(text: str) -> dict:
    m = re.search(r"<!-- cha-mask (\{.*?\}) -->", text)
    if not m:
        raise ValueError("no cha-mask metadata comment in SVG")
    return json.loads(m.group(1))
