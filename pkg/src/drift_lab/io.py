"""CSV/JSON writers and readers plus gnuplot script emission.

CSV numbers carry 17 significant digits so every double survives a
write/read cycle bit for bit.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

TRAJECTORY_HEADER = ("t", "y1", "y2", "y3")
FREQUENCY_HEADER = ("t", "freq")
ALLAN_HEADER = ("tau", "sigma_y")


def format_float(x) -> str:
    return format(float(x), ".17g")


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_float(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path, expected_header=None):
    """Return ``(header, data)`` with ``data`` an ``(N, ncols)`` float array."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty CSV")
    header = tuple(h.strip() for h in lines[0].split(","))
    if expected_header is not None and header != tuple(expected_header):
        raise ValueError(f"{path}: expected header {','.join(expected_header)}, "
                         f"got {','.join(header)}")
    rows = [[float(v) for v in line.split(",")] for line in lines[1:] if line.strip()]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return header, data


def write_trajectory_csv(traj, path) -> Path:
    rows = np.column_stack([traj.times, traj.samples])
    return write_csv(path, TRAJECTORY_HEADER, rows)


def read_trajectory_csv(path, label="bloch"):
    from .integrate import Trajectory

    _, data = read_csv(path, TRAJECTORY_HEADER)
    t = data[:, 0]
    dt = (t[-1] - t[0]) / (len(t) - 1) if len(t) > 1 else 1.0
    return Trajectory(t0=float(t[0]), dt=float(dt), samples=data[:, 1:], label=label)


def write_frequency_csv(times, freq, path) -> Path:
    return write_csv(path, FREQUENCY_HEADER, zip(times, freq))


def read_frequency_csv(path) -> np.ndarray:
    return read_csv(path, FREQUENCY_HEADER)[1]


def write_allan_csv(pairs, path) -> Path:
    return write_csv(path, ALLAN_HEADER, pairs)


def read_allan_csv(path) -> np.ndarray:
    return read_csv(path, ALLAN_HEADER)[1]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no NaN/inf
        return x if math.isfinite(x) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps_json(obj))
    return path


def write_gnuplot(csv_path, columns, xlabel, ylabel, logscale=False) -> Path:
    """Emit ``<name>.gp`` next to ``csv_path`` plotting ``columns`` against column 1."""
    csv_path = Path(csv_path)
    stem = csv_path.stem
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set terminal pngcairo size 900,600",
        f"set output '{stem}.png'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        "set grid",
    ]
    if logscale:
        lines.append("set logscale xy")
    style = "with linespoints" if logscale else "with lines"
    plots = [f"'{csv_path.name}' using 1:{c} {style}" if i == 0 else f"'' using 1:{c} {style}"
             for i, c in enumerate(columns)]
    lines.append("plot " + ", \\\n     ".join(plots))
    gp = csv_path.with_suffix(".gp")
    gp.write_text("\n".join(lines) + "\n")
    return gp
