"""CSV/JSON input and atomic output."""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError

SCHEMA_VERSION = 1
BUNDLED_PREFIX = "bundled:"


def resolve_path(spec: str | os.PathLike, base: Path | None = None) -> Path:
    """Map ``bundled:<name>`` to the packaged data directory; relative paths to ``base``."""
    text = str(spec)
    if text.startswith(BUNDLED_PREFIX):
        return Path(str(resources.files("qapricing") / "data" / text[len(BUNDLED_PREFIX):]))
    path = Path(text)
    if not path.is_absolute() and base is not None:
        path = base / path
    return path


def read_series(path) -> tuple[list[str], np.ndarray]:
    """Read a ``date,value`` CSV.  Errors name the offending line."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: file not found")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty file", line=1)
    header = [h.strip().lower() for h in rows[0]]
    if header != ["date", "value"]:
        raise ParseError(f"{path}: header must be 'date,value', got {','.join(rows[0])!r}", line=1)
    dates, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise ParseError(f"{path}: expected 2 fields, got {len(row)}", line=lineno)
        try:
            v = float(row[1])
        except ValueError:
            raise ParseError(f"{path}: value {row[1]!r} is not a number", line=lineno) from None
        if not math.isfinite(v):
            raise ParseError(f"{path}: non-finite value {row[1]!r}", line=lineno)
        dates.append(row[0].strip())
        values.append(v)
    if not values:
        raise ParseError(f"{path}: no data rows", line=2)
    return dates, np.array(values)


def _atomic_write(path: Path, text: str) -> None:
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


def fmt(value) -> str:
    """Shortest round-trip text for floats; empty string for missing values."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    _atomic_write(path, "\n".join(lines) + "\n")
    return path


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def write_json(path, doc: dict) -> Path:
    path = Path(path)
    body = {"schema_version": SCHEMA_VERSION}
    body.update(doc)
    _atomic_write(path, json.dumps(body, indent=2, default=_default) + "\n")
    return path
