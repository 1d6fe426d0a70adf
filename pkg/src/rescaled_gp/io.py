"""File formats: JSON configs, fixed-schema CSV reports and dataset CSVs.

Every float written to CSV uses ``%.17g`` so values round-trip exactly.
Readers report schema problems with the offending line number.
"""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .experiments import ExperimentConfig
from .posterior import Classification, Dataset, Density, Regression

__all__ = [
    "SchemaError",
    "check_keys",
    "format_value",
    "write_csv",
    "read_csv",
    "write_json",
    "read_json",
    "emit_config",
    "load_config",
    "write_dataset",
    "read_dataset",
]


class SchemaError(ValueError):
    """A config or CSV file does not match its schema."""


def check_keys(obj: dict, allowed: Iterable[str], where: str = "config",
               required: Iterable[str] = ()) -> None:
    """Raise :class:`SchemaError` naming any unknown or missing key."""
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise SchemaError(f"{where}: unknown key(s) {unknown}")
    missing = sorted(set(required) - set(obj))
    if missing:
        raise SchemaError(f"{where}: missing key(s) {missing}")


# ---------------------------------------------------------------------------
# CSV


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.17g" % v
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write a CSV with a fixed column count (checked per row)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ncol = len(header)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, row in enumerate(rows):
            if len(row) != ncol:
                raise SchemaError(f"{path}: row {i + 1} has {len(row)} values, header has {ncol}")
            w.writerow([format_value(v) for v in row])
    return path


def read_csv(path, columns: Optional[Sequence[str]] = None) -> tuple:
    """Read a CSV written by :func:`write_csv`.

    Returns ``(header, rows)`` with rows as lists of strings.  If
    ``columns`` is given the header must match it exactly.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}:1: empty file") from None
        if columns is not None and list(header) != list(columns):
            raise SchemaError(f"{path}:1: header {header} does not match {list(columns)}")
        rows = []
        for row in reader:
            if len(row) != len(header):
                raise SchemaError(f"{path}:{reader.line_num}: expected {len(header)} "
                                  f"fields, found {len(row)}")
            rows.append(row)
    return header, rows


# ---------------------------------------------------------------------------
# JSON


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True)
    path.write_text(text + "\n")
    return path


def read_json(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}: {exc.msg}") from None


def emit_config(config: ExperimentConfig, path=None) -> str:
    """Serialise an experiment config; also written to ``path`` if given."""
    text = json.dumps(_jsonable(config.to_dict()), indent=2, sort_keys=True)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def load_config(source) -> ExperimentConfig:
    """Parse an experiment config from a dict, a JSON string or a path."""
    if isinstance(source, dict):
        obj = source
    elif isinstance(source, (str, os.PathLike)) and Path(source).suffix == ".json" \
            and Path(source).exists():
        obj = read_json(source)
    else:
        try:
            obj = json.loads(source)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {exc.lineno}: {exc.msg}") from None
    check_keys(obj, ExperimentConfig.__dataclass_fields__, "experiment")
    try:
        return ExperimentConfig(**obj)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"experiment: {exc}") from None


# ---------------------------------------------------------------------------
# datasets


def write_dataset(data: Dataset, path) -> Path:
    """Columns ``t1..td`` plus ``y`` when the data have responses."""
    header = [f"t{i + 1}" for i in range(data.d)]
    if data.y is not None:
        header.append("y")
        rows = np.column_stack([data.x, data.y])
    else:
        rows = data.x
    return write_csv(path, header, [list(r) for r in rows])


def read_dataset(path, setting, d: Optional[int] = None) -> Dataset:
    """Read a dataset CSV, validating the schema for ``setting``."""
    header, rows = read_csv(path)
    needs_y = not isinstance(setting, Density)
    cov = [h for h in header if h != "y"]
    if d is None:
        d = len(cov)
    expect = [f"t{i + 1}" for i in range(d)] + (["y"] if needs_y else [])
    if header != expect:
        raise SchemaError(f"{path}:1: header {header}, expected {expect}")
    vals = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        line = i + 2
        try:
            vals[i] = [float(v) for v in row]
        except ValueError:
            raise SchemaError(f"{path}:{line}: non-numeric field") from None
        if not np.all(np.isfinite(vals[i])):
            raise SchemaError(f"{path}:{line}: non-finite value")
        if np.any(vals[i, :d] < 0) or np.any(vals[i, :d] > 1):
            raise SchemaError(f"{path}:{line}: covariate outside [0, 1]")
        if isinstance(setting, Classification) and vals[i, d] not in (0.0, 1.0):
            raise SchemaError(f"{path}:{line}: label must be 0 or 1")
    x = vals[:, :d]
    y = vals[:, d] if needs_y else None
    return Dataset(x, y)
