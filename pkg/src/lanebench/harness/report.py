"""Evaluation report persistence: one JSON report plus CSV trajectory sidecars.

Reports carry no timestamps, so identical specs and seeds reproduce them
byte for byte; aggregates are always recomputable from the row lists.
"""

import csv
import json
from pathlib import Path

import numpy as np

__all__ = ["write_trajectory_csv", "read_trajectory_csv", "recompute_aggregates",
           "build_report", "save_report", "load_report"]

TRAJECTORY_FIELDS = ("t", "x", "y", "psi", "v", "delta", "lateral_offset")


def write_trajectory_csv(path, trajectory) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_FIELDS)
        for t, state, off in zip(trajectory.times, trajectory.states,
                                 trajectory.lateral_offsets):
            writer.writerow([repr(float(v)) for v in
                             (t, state.x, state.y, state.psi, state.v,
                              state.delta, off)])


def read_trajectory_csv(path) -> dict:
    cols: dict[str, list[float]] = {k: [] for k in TRAJECTORY_FIELDS}
    with open(path, "r", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            for k in TRAJECTORY_FIELDS:
                cols[k].append(float(row[k]))
    return {k: np.asarray(v) for k, v in cols.items()}


def _rate(rows, key) -> float:
    vals = [bool(r[key]) for r in rows]
    return sum(vals) / len(vals) if vals else 0.0


def _mean(rows, key) -> float:
    vals = [float(r[key]) for r in rows]
    return sum(vals) / len(vals) if vals else 0.0


def recompute_aggregates(report: dict) -> dict:
    """Aggregate rates/means from the row lists (the invariant checker)."""
    agg: dict = {}
    conv = report.get("conventional", [])
    if conv:
        cells: dict = {}
        for row in conv:
            key = f"{row['detector']}|{row['attack']}"
            cells.setdefault(key, []).append(row)
        agg["conventional"] = {
            key: {
                "accuracy": _mean(rows, "accuracy"),
                "f1": _mean(rows, "f1"),
                "precision": _mean(rows, "precision"),
                "recall": _mean(rows, "recall"),
                "n": len(rows),
            }
            for key, rows in sorted(cells.items())
        }
    e2e = report.get("end_to_end", [])
    if e2e:
        cells = {}
        for row in e2e:
            key = f"{row['detector']}|{row['attack']}|{row['direction']}"
            cells.setdefault(key, []).append(row)
        agg["end_to_end"] = {
            key: {
                "targeted_rate": _rate(rows, "targeted"),
                "untargeted_rate": _rate(rows, "untargeted"),
                "benign_fail_rate": _rate(rows, "benign_fail"),
                "max_deviation_mean": _mean(rows, "max_deviation"),
                "n": len(rows),
            }
            for key, rows in sorted(cells.items())
        }
    transfer = report.get("transfer", [])
    if transfer:
        sources = sorted({row["source"] for row in transfer})
        targets = sorted({row["target"] for row in transfer})
        matrix = {}
        for src in sources:
            matrix[src] = {}
            for tgt in targets:
                rows = [r for r in transfer
                        if r["source"] == src and r["target"] == tgt]
                matrix[src][tgt] = _rate(rows, "untargeted") if rows else None
        agg["transfer"] = {"sources": sources, "targets": targets,
                           "untargeted_matrix": matrix}
    return agg


def build_report(meta: dict, conventional: list | None = None,
                 end_to_end: list | None = None,
                 transfer: list | None = None) -> dict:
    report = {"meta": meta}
    if conventional is not None:
        report["conventional"] = conventional
    if end_to_end is not None:
        report["end_to_end"] = end_to_end
    if transfer is not None:
        report["transfer"] = transfer
    report["aggregates"] = recompute_aggregates(report)
    return report


def save_report(report: dict, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
