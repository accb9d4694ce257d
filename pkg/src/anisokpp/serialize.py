"""Deterministic CSV/JSON writers and the run manifest.

Floats are rendered with Python's shortest round-trip representation, which
is lossless (up to 17 significant digits) and identical across runs.  Files
always use "\\n" line endings so byte-level comparison is meaningful.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import List, Optional, Sequence

import numpy as np

from .grid import Grid, GridFunction

DETERMINISTIC_ENV = "ANISOKPP_DETERMINISTIC"


def deterministic_mode() -> bool:
    return os.environ.get(DETERMINISTIC_ENV, "") == "1"


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header: Sequence[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def write_json(path, obj) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def grid_function_rows(gf: GridFunction):
    g = gf.grid
    if g.dim == 1:
        for i in range(g.node_count):
            yield (i, float(g.coords[i]), float(gf.values[i]))
    else:
        for i in range(g.node_count):
            yield (i, float(g.coords[i, 0]), float(g.coords[i, 1]),
                   float(gf.values[i]))


def write_grid_function_csv(path, gf: GridFunction) -> None:
    header = ["index", "x", "value"] if gf.grid.dim == 1 \
        else ["index", "x", "y", "value"]
    write_csv(path, header, grid_function_rows(gf))


def read_grid_function_csv(path, grid: Grid) -> GridFunction:
    values = np.zeros(grid.node_count)
    seen = 0
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        col = header.index("value")
        for line in fh:
            parts = line.strip().split(",")
            if not parts or parts == [""]:
                continue
            idx = int(parts[0])
            values[idx] = float(parts[col])
            seen += 1
    if seen != grid.node_count:
        raise ValueError(
            f"{path}: found {seen} rows, expected {grid.node_count}")
    return GridFunction(grid, values)


def config_hash(cfg: dict) -> str:
    canon = json.dumps(_jsonable(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


@dataclass
class RunManifest:
    """Provenance record written next to every set of artifacts.

    Under deterministic mode the wall-clock fields are left empty so the
    manifest itself is bitwise reproducible together with the artifacts.
    """

    command: str
    config_sha256: str
    seed: int
    version: str
    deterministic: bool
    started_at: Optional[str] = None
    finished_at: Optional[str] = None
    artifacts: List[str] = field(default_factory=list)


def utc_now() -> Optional[str]:
    if deterministic_mode():
        return None
    return datetime.now(timezone.utc).isoformat()


def write_manifest(outdir, manifest: RunManifest) -> None:
    write_json(os.path.join(outdir, "manifest.json"), {
        "command": manifest.command,
        "config_sha256": manifest.config_sha256,
        "seed": manifest.seed,
        "version": manifest.version,
        "deterministic": manifest.deterministic,
        "started_at": manifest.started_at,
        "finished_at": manifest.finished_at,
        "artifacts": sorted(manifest.artifacts),
    })
