"""Deterministic, atomically written output files.

Every CSV opens with a comment line recording the tool version and the
scenario file's SHA-256, then a header row. Floats are printed with 17
significant digits so values round-trip exactly; identical inputs therefore
produce byte-identical files. Files are staged in the target directory and
moved into place, so readers never observe a half-written table.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "config_digest",
    "format_number",
    "write_csv",
    "write_json",
    "write_text",
]


def config_digest(path: str | Path) -> str:
    """SHA-256 of the scenario file bytes (stable across runs by design)."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def format_number(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int,)):
        return str(x)
    return format(float(x), ".17g")


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence],
              digest: str) -> Path:
    """Write one table with the standard provenance comment line."""
    p = Path(path)
    lines = [f"# boxctrl {__version__} config_sha256={digest}"]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(format_number(x) for x in row))
    _atomic_write(p, "\n".join(lines) + "\n")
    return p


def write_json(path: str | Path, payload: dict) -> Path:
    """Pretty, key-sorted JSON written atomically."""
    p = Path(path)
    _atomic_write(p, json.dumps(payload, indent=2, sort_keys=True, default=_coerce) + "\n")
    return p


def _coerce(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_text(path: str | Path, lines: Iterable[str]) -> Path:
    """Plain text report, atomically written."""
    p = Path(path)
    _atomic_write(p, "\n".join(lines) + "\n")
    return p
