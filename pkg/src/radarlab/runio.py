"""Artifact I/O: deterministic CSV emission, front files, and run manifests.

Float cells are written with `repr(float(x))` (shortest round-trip form) so
identical results produce byte-identical files across reruns and worker
counts. Manifests carry timestamps and are JSON, never compared bytewise.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .moo import ObjectivePoint

FRONT_HEADER = ["algorithm", "beta_or_id", "obj_t", "obj_s", "seed"]


class SchemaError(ValueError):
    """An input artifact does not match its documented schema."""


def format_cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    raise TypeError(f"unsupported CSV cell type {type(value).__name__}")


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        cells = [format_cell(v) for v in row]
        if len(cells) != len(header):
            raise ValueError(f"row width {len(cells)} != header width {len(header)}")
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """Returns (header, rows) with cells kept as strings."""
    text = Path(path).read_text().rstrip("\n")
    lines = text.split("\n") if text else []
    if not lines:
        raise SchemaError(f"{path}: empty file")
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise SchemaError(f"{path}: row {i + 2} has {len(row)} cells, header has {len(header)}")
    return header, rows


def write_front_csv(path, points) -> Path:
    rows = [(p.algorithm, p.label, p.obj_t, p.obj_s, p.seed) for p in points]
    return write_csv(path, FRONT_HEADER, rows)


def read_front_csv(path) -> list:
    header, rows = read_csv(path)
    if header != FRONT_HEADER:
        missing = [c for c in FRONT_HEADER if c not in header]
        col = missing[0] if missing else header[0]
        raise SchemaError(f"{path}: column {col!r} (expected header {','.join(FRONT_HEADER)})")
    points = []
    for i, row in enumerate(rows):
        try:
            points.append(
                ObjectivePoint(
                    obj_t=float(row[2]),
                    obj_s=float(row[3]),
                    algorithm=row[0],
                    label=row[1],
                    seed=int(row[4]),
                )
            )
        except ValueError as exc:
            raise SchemaError(f"{path}: row {i + 2}: {exc}") from exc
    return points


@dataclass
class RunManifest:
    """What a run directory contains and how it was produced."""

    run_id: str
    command: str
    config_hash: str
    master_seed: int
    seeds: dict = field(default_factory=dict)
    started_at: str = ""
    finished_at: str = ""
    wall_clock_s: float = 0.0
    code_version: str = ""
    artifacts: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path


def read_manifest(path) -> RunManifest:
    data = json.loads(Path(path).read_text())
    return RunManifest(**data)
