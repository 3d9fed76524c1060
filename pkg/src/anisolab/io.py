"""Deterministic writers for tables, field dumps and solve reports."""
import csv
import io
import json
import math
import struct
from pathlib import Path

import numpy as np

CONVERGENCE_COLUMNS = ("k", "j", "n", "t", "m", "M", "residual", "L1_gap",
                       "coeff_dipole", "coeff_dirac", "exponent_fit")
FITS_COLUMNS = ("k", "j", "n", "t", "quantity", "model", "coefficient", "exponent",
                "r_squared", "window_lo", "window_hi", "samples", "direction")
FIELD_MAGIC = b"ANIF"
# magic, N, M, payload length in bytes
HEADER = struct.Struct("<4sIII")


def fmt(x):
    """Stable text form: 12 significant digits, 'nan'/'inf' spelled out."""
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return format(x, ".12g")


def csv_text(rows, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, rows, columns):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(rows, columns))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_field_csv(path, u):
    """One row per unknown in lexicographic node order: x_1..x_N, value."""
    grid = u.grid
    cols = [f"x{d + 1}" for d in range(grid.dimension)] + ["value"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for p, v in zip(grid.points, u.values):
        w.writerow([fmt(c) for c in p] + [fmt(v)])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())
    return path


def write_field_binary(path, u):
    """16-byte header (magic, N, M, payload bytes) then the full M^N array
    of little-endian float64 values in lexicographic order, exterior = 0."""
    grid = u.grid
    payload = np.ascontiguousarray(u.full(), dtype="<f8").tobytes()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(HEADER.pack(FIELD_MAGIC, grid.dimension, grid.M, len(payload)) + payload)
    return path


def read_field_binary(path):
    """Returns (N, M, full array)."""
    data = Path(path).read_bytes()
    magic, N, M, length = HEADER.unpack(data[:HEADER.size])
    if magic != FIELD_MAGIC:
        raise ValueError(f"{path}: not a field dump (magic {magic!r})")
    body = data[HEADER.size:]
    if len(body) != length or length != 8 * M ** N:
        raise ValueError(f"{path}: payload length mismatch")
    return N, M, np.frombuffer(body, dtype="<f8").reshape((M,) * N)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x) or math.isinf(x):
            return fmt(x)
        return x
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path
