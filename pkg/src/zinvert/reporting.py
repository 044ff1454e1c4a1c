"""Readers and writers for every persisted artifact, plus the config digest.

All floats are written with repr-fidelity so files round-trip exactly, and
nothing time- or host-dependent ever lands in an output: identical config and
seed must produce byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .engine import FitnessTrace
from .errors import InvalidConfigError
from .evaluation import CATEGORIES, HistogramRow, RocRow, ScoreSet

DIGEST_PREFIX = "# config_digest: "


def config_digest(payload: dict) -> str:
    """sha256 over the canonical JSON form of the resolved configuration."""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_json(payload: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def read_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def _write_csv(path: str | Path, header: list[str], rows, digest: str | None) -> None:
    with open(path, "w", newline="") as fh:
        if digest:
            fh.write(f"{DIGEST_PREFIX}{digest}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(lines)
    rows = list(reader)
    if not rows:
        raise InvalidConfigError(f"{path} is empty")
    return rows[0], rows[1:]


def write_trace_csv(trace: FitnessTrace, path: str | Path, digest: str | None = None) -> None:
    rows = [
        (gen, best, mean)
        for gen, (best, mean) in enumerate(
            zip(trace.best_fitness_per_generation, trace.mean_fitness_per_generation)
        )
    ]
    _write_csv(path, ["generation", "best_fitness", "mean_fitness"], rows, digest)


def read_trace_csv(path: str | Path) -> FitnessTrace:
    header, rows = _read_csv(path)
    if header != ["generation", "best_fitness", "mean_fitness"]:
        raise InvalidConfigError(f"{path} is not a trace file (header {header})")
    trace = FitnessTrace()
    for row in rows:
        trace.best_fitness_per_generation.append(float(row[1]))
        trace.mean_fitness_per_generation.append(float(row[2]))
    return trace


def write_scores_csv(scores: ScoreSet, path: str | Path, digest: str | None = None) -> None:
    rows = []
    for name in CATEGORIES:
        for value in scores.category(name):
            rows.append((name, float(value)))
    _write_csv(path, ["category", "score"], rows, digest)


def read_scores_csv(path: str | Path) -> ScoreSet:
    header, rows = _read_csv(path)
    if header != ["category", "score"]:
        raise InvalidConfigError(f"{path} is not a scores file (header {header})")
    buckets: dict[str, list[float]] = {name: [] for name in CATEGORIES}
    for category, score in rows:
        if category not in buckets:
            raise InvalidConfigError(f"unknown score category {category!r} in {path}")
        buckets[category].append(float(score))
    return ScoreSet(**buckets)


def write_roc_csv(rows: list[RocRow], path: str | Path, digest: str | None = None) -> None:
    _write_csv(
        path,
        ["far", "tar", "sar_type1", "sar_type2"],
        [(r.far, r.tar, r.sar_type1, r.sar_type2) for r in rows],
        digest,
    )


def read_roc_csv(path: str | Path) -> list[RocRow]:
    header, rows = _read_csv(path)
    if header != ["far", "tar", "sar_type1", "sar_type2"]:
        raise InvalidConfigError(f"{path} is not a ROC file (header {header})")
    return [RocRow(*(float(v) for v in row)) for row in rows]


def write_distributions_csv(
    rows: list[HistogramRow], path: str | Path, digest: str | None = None
) -> None:
    _write_csv(
        path,
        ["category", "bin_low", "bin_high", "mass"],
        [(r.category, r.bin_low, r.bin_high, r.mass) for r in rows],
        digest,
    )


def read_distributions_csv(path: str | Path) -> list[HistogramRow]:
    header, rows = _read_csv(path)
    if header != ["category", "bin_low", "bin_high", "mass"]:
        raise InvalidConfigError(f"{path} is not a histogram file (header {header})")
    return [
        HistogramRow(row[0], float(row[1]), float(row[2]), float(row[3]))
        for row in rows
    ]


def write_sweep_csv(
    values, means, stddevs, path: str | Path, digest: str | None = None
) -> None:
    rows = list(zip(values, (float(m) for m in means), (float(s) for s in stddevs)))
    _write_csv(path, ["value", "mean", "stddev"], rows, digest)


def read_sweep_csv(path: str | Path) -> list[tuple[float, float, float]]:
    header, rows = _read_csv(path)
    if header != ["value", "mean", "stddev"]:
        raise InvalidConfigError(f"{path} is not a sweep file (header {header})")
    return [(float(a), float(b), float(c)) for a, b, c in rows]


def write_latent_json(
    latent: np.ndarray,
    fitness: float,
    similarity: float,
    restart_index: int,
    digest: str,
    path: str | Path,
) -> None:
    write_json(
        {
            "latent": [float(v) for v in latent],
            "fitness": float(fitness),
            "similarity": float(similarity),
            "restart_index": int(restart_index),
            "config_digest": digest,
        },
        path,
    )


def read_latent_json(path: str | Path) -> np.ndarray:
    payload = read_json(path)
    return np.asarray(payload["latent"], dtype=float)
