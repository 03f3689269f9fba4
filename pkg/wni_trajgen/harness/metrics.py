"""
Long-format metrics table and the per-cell summary derived from it.
"""

import csv
import itertools
import logging
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from ..errors import ArtifactFormatError
from ..models import MetricsRow
from .persistence import require_file, write_json

logger = logging.getLogger(__name__)

CSV_COLUMNS = list(MetricsRow.model_fields)


def cell_key(intent_id: int, total_power: float) -> str:
    return f"intent_{intent_id}/power_{total_power:g}"


def write_metrics_csv(path: Path, rows: Sequence[MetricsRow]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            values = row.model_dump()
            cells = (values[c] for c in CSV_COLUMNS)
            writer.writerow([repr(v) if isinstance(v, float) else v for v in cells])


def read_metrics_csv(path: Path) -> List[MetricsRow]:
    path = require_file(path)
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != CSV_COLUMNS:
            raise ArtifactFormatError(
                f"Metrics file {path} has columns {reader.fieldnames}, expected {CSV_COLUMNS}"
            )
        return [MetricsRow.model_validate(record) for record in reader]


def summarize(rows: Sequence[MetricsRow]) -> Dict[str, Any]:
    """
    Per-cell mean and std of every scheme, pairwise deltas and the ratio to the oracle.

    Cells and schemes keep their first-appearance order.
    """
    grouped: "OrderedDict[str, OrderedDict[str, List[float]]]" = OrderedDict()
    for row in rows:
        cell = grouped.setdefault(cell_key(row.intent_id, row.total_power), OrderedDict())
        cell.setdefault(row.scheme, []).append(row.spectral_efficiency)

    cells: Dict[str, Any] = {}
    for key, schemes in grouped.items():
        stats = {
            scheme: {"mean": float(np.mean(values)), "std": float(np.std(values)), "count": len(values)}
            for scheme, values in schemes.items()
        }
        deltas = {
            f"{a}-{b}": stats[a]["mean"] - stats[b]["mean"]
            for a, b in itertools.combinations(sorted(stats), 2)
        }
        entry: Dict[str, Any] = {"schemes": stats, "deltas": deltas}
        oracle = stats.get("oracle", {}).get("mean")
        if oracle:
            entry["ratio_to_oracle"] = {scheme: s["mean"] / oracle for scheme, s in stats.items()}
        cells[key] = entry
    return cells


def emit_metrics(
    rows: Sequence[MetricsRow], out_dir: Path, config_hash: str, seed: int
) -> Tuple[Path, Path]:
    """
    Write ``metrics.csv`` and ``summary.json`` under ``out_dir``.

    Returns:
        Paths of the CSV and the summary
    """
    out_dir = Path(out_dir)
    csv_path = out_dir / "metrics.csv"
    summary_path = out_dir / "summary.json"
    write_metrics_csv(csv_path, rows)
    write_json(
        summary_path,
        {"config_hash": config_hash, "seed": int(seed), "rows": len(rows), "cells": summarize(rows)},
    )
    logger.info(f"Wrote {len(rows)} metric rows to {csv_path} and summary to {summary_path}")
    return csv_path, summary_path
