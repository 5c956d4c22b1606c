"""Plain-text artifacts: CSV series, dense matrices and flat key=value reports.

Every writer emits UTF-8 with LF line endings and floats at 17 significant
digits, so identical inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


def fmt(value) -> str:
    """One scalar in artifact notation."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(getattr(value, "value", value))


def _open(path, mode):
    return open(path, mode, encoding="utf-8", newline="")


def write_csv(path, columns: Mapping[str, Sequence]) -> Path:
    """Columns of equal length, header first."""
    path = Path(path)
    names = list(columns)
    cols = [np.asarray(columns[k]) for k in names]
    lengths = {len(c) for c in cols}
    if len(lengths) > 1:
        raise ValueError(f"columns differ in length: {sorted(lengths)}")
    with _open(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*cols):
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    with _open(path, "r") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return {}
    names, body = rows[0], rows[1:]
    out = {}
    for j, name in enumerate(names):
        vals = [r[j] for r in body]
        try:
            out[name] = np.array([float(v) for v in vals])
        except ValueError:
            out[name] = np.array(vals, dtype=object)
    return out


def write_matrix(path, matrix, header: Mapping[str, object] | None = None) -> Path:
    """Dense matrix, one row per line, preceded by ``# key = value`` header lines."""
    path = Path(path)
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    with _open(path, "w") as fh:
        for k, v in (header or {}).items():
            fh.write(f"# {k} = {fmt(v)}\n")
        for row in a:
            fh.write(" ".join(fmt(v) for v in row) + "\n")
    return path


def read_matrix(path) -> tuple[dict[str, str], np.ndarray]:
    header: dict[str, str] = {}
    rows = []
    with _open(path, "r") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                header[key.strip()] = val.strip()
            elif line.strip():
                rows.append([float(v) for v in line.split()])
    return header, np.array(rows)


def write_report(path, items: Mapping[str, object]) -> Path:
    """Flat ``key = value`` lines in insertion order."""
    path = Path(path)
    with _open(path, "w") as fh:
        for k, v in items.items():
            fh.write(f"{k} = {fmt(v)}\n")
    return path


def read_report(path) -> dict[str, str]:
    out = {}
    with _open(path, "r") as fh:
        for line in fh:
            if "=" in line:
                k, _, v = line.partition("=")
                out[k.strip()] = v.strip()
    return out


def write_summary(path, title: str, checks: Iterable[tuple[str, bool, str]]) -> Path:
    """One line per check: ``PASS|FAIL name: detail``."""
    path = Path(path)
    checks = list(checks)
    with _open(path, "w") as fh:
        fh.write(f"{title}\n")
        for name, ok, detail in checks:
            fh.write(f"{'PASS' if ok else 'FAIL'} {name}: {detail}\n")
        passed = sum(ok for _, ok, _ in checks)
        fh.write(f"{passed}/{len(checks)} checks passed\n")
    return path
