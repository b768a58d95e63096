"""Patch files: one JSON header line followed by little-endian float64 cells.

The header carries ``n1, n2, h1, h2, l1, format_version`` and a ``field``
tag (``omega`` for patches, ``psi`` for stream-function dumps).  Cell values
follow in row-major order, one row per height.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .grid import HalfPlaneGrid, PatchDensity

FORMAT_VERSION = 1
_REQUIRED = ("n1", "n2", "h1", "h2", "l1", "format_version")


class PatchFormatError(ValueError):
    pass


def write_patch(path, omega: PatchDensity | None = None, *, grid: HalfPlaneGrid | None = None,
                values: np.ndarray | None = None, field: str = "omega") -> Path:
    if omega is not None:
        grid, values = omega.grid, omega.values
    if grid is None or values is None:
        raise ValueError("need a patch or a grid and values")
    header = {"n1": grid.n1, "n2": grid.n2, "h1": grid.h1, "h2": grid.h2,
              "l1": grid.l1, "format_version": FORMAT_VERSION, "field": field}
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("ascii"))
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())
    return path


def read_header(path) -> tuple[dict, bytes]:
    data = Path(path).read_bytes()
    nl = data.find(b"\n")
    if nl < 0:
        raise PatchFormatError(f"{path}: missing header line")
    try:
        header = json.loads(data[:nl].decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise PatchFormatError(f"{path}: header is not valid JSON ({exc})") from None
    if not isinstance(header, dict):
        raise PatchFormatError(f"{path}: header must be a JSON object")
    for key in _REQUIRED:
        if key not in header:
            raise PatchFormatError(f"{path}: header field '{key}' is missing")
    if header["format_version"] != FORMAT_VERSION:
        raise PatchFormatError(f"{path}: header field 'format_version' = "
                               f"{header['format_version']!r} is unsupported")
    for key in ("n1", "n2"):
        if not isinstance(header[key], int) or header[key] <= 0:
            raise PatchFormatError(f"{path}: header field '{key}' must be a positive integer")
    for key in ("h1", "h2", "l1"):
        if not isinstance(header[key], (int, float)) or not header[key] > 0:
            raise PatchFormatError(f"{path}: header field '{key}' must be a positive number")
    return header, data[nl + 1:]


def read_field(path) -> tuple[HalfPlaneGrid, np.ndarray, dict]:
    header, body = read_header(path)
    n1, n2 = header["n1"], header["n2"]
    if len(body) != 8 * n1 * n2:
        raise PatchFormatError(f"{path}: expected {8 * n1 * n2} bytes of cell data, "
                               f"found {len(body)}")
    try:
        grid = HalfPlaneGrid(n1, n2, float(header["h1"]), float(header["h2"]), float(header["l1"]))
    except ValueError as exc:
        raise PatchFormatError(f"{path}: {exc}") from None
    values = np.frombuffer(body, dtype="<f8").reshape(n2, n1).astype(np.float64)
    return grid, values, header


def read_patch(path) -> PatchDensity:
    grid, values, header = read_field(path)
    if header.get("field", "omega") != "omega":
        raise PatchFormatError(f"{path}: header field 'field' = {header['field']!r}, expected 'omega'")
    return PatchDensity(grid, values)


def write_patch_csv(path, omega: PatchDensity) -> Path:
    g = omega.grid
    x1, x2 = g.x1, g.x2
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "x1", "x2", "value"])
        for j in range(g.n2):
            row = omega.values[j]
            for i in range(g.n1):
                w.writerow([i, j, repr(float(x1[i])), repr(float(x2[j])), repr(float(row[i]))])
    return path


def read_patch_csv(path, grid: HalfPlaneGrid) -> PatchDensity:
    values = np.zeros(grid.shape)
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            values[int(rec["j"]), int(rec["i"])] = float(rec["value"])
    return PatchDensity(grid, values)


def write_rows(path, header: list[str], rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return path
