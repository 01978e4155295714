"""CSV outputs and run manifests.

Every number is written with 17 significant digits (``%.17g``), which
round-trips doubles exactly and gives stable diffs.
"""

from __future__ import annotations

import hashlib
import json
import platform
from pathlib import Path

import numpy as np

from . import __version__

FLOAT_FORMAT = ".17g"


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), FLOAT_FORMAT)


def write_csv(path, header, columns) -> Path:
    """Write equal-length ``columns`` under a single ``header`` row."""
    path = Path(path)
    cols = [np.asarray(c) for c in columns]
    if len(header) != len(cols):
        raise ValueError("one header name per column")
    n = {c.size for c in cols}
    if len(n) > 1:
        raise ValueError("columns differ in length")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*(c.tolist() for c in cols)):
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def write_curve(path, x, value) -> Path:
    """Model curve as ``x,value``."""
    return write_csv(path, ("x", "value"), (x, value))


def read_csv(path) -> dict:
    """Columns of a one-header numeric CSV as float arrays, keyed by header name."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if any(len(r) != len(header) for r in rows):
        raise ValueError(f"{path}: ragged rows")
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, i].copy() for i, name in enumerate(header)}


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def build_manifest(command: str, argv, config, outputs, *, threads: int, duration: float,
                   extra: dict | None = None, out_dir=None) -> dict:
    """Everything needed to rerun ``command`` and check its outputs."""
    out_dir = Path(out_dir) if out_dir is not None else None
    files = []
    for p in outputs:
        p = Path(p)
        name = str(p.relative_to(out_dir)) if out_dir is not None else str(p)
        files.append({"path": name, "sha256": sha256_file(p), "bytes": p.stat().st_size})
    return {
        "tool": "levelrep",
        "version": __version__,
        "command": command,
        "argv": list(argv),
        "config": config.to_dict() if hasattr(config, "to_dict") else config,
        "threads": threads,
        "duration_seconds": round(float(duration), 6),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "outputs": files,
        "extra": extra or {},
    }


def write_manifest(path, manifest: dict) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_manifest(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
