"""Byte-stable artifact emission: CSV tables, JSON summaries, plot data.

Floats are rendered with ``repr`` (shortest round-trip form), newlines are
always ``\\n``, and rows are written in a caller-fixed order, so a run's
artifacts are identical bytes whenever its numbers are identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from typing import Any, Iterable, Mapping, Sequence


def format_value(value: Any) -> str:
    """Canonical text for one CSV cell."""
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        try:
            value = value.item()  # numpy scalars render as their Python value
        except (AttributeError, ValueError):
            pass
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Write a header + rows table; returns the path."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def write_plot_data(path: str, columns: Sequence[Sequence[Any]]) -> str:
    """Whitespace-separated columns (typically two), one point per line."""
    if not columns:
        raise ValueError("need at least one column")
    lengths = {len(c) for c in columns}
    if len(lengths) != 1:
        raise ValueError(f"columns have unequal lengths {sorted(lengths)}")
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for values in zip(*columns):
            fh.write(" ".join(format_value(v) for v in values) + "\n")
    return path


def write_json(path: str, payload: Mapping[str, Any]) -> str:
    """Stable-key JSON document."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _jsonable(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        try:
            return value.item()  # numpy scalars
        except (AttributeError, ValueError):
            pass
    if hasattr(value, "tolist"):
        return value.tolist()
    return value


def echo_config(out_dir: str, resolved: Mapping[str, Any]) -> str:
    """Write the resolved config verbatim into the run directory."""
    return write_json(os.path.join(out_dir, "config_echo.json"), resolved)


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()
