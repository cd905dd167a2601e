"""Heatmap CSV and JSON report files."""

import csv
import json
import logging
from pathlib import Path
from typing import Union

import numpy as np

from .activation import ActivationMap

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def export_heatmap(amap: ActivationMap, path: PathLike) -> Path:
    """Write ``# layers=L experts=E tokens=T`` then L rows of E raw values.

    Values are written with ``repr`` so they read back exactly.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(
            f"# layers={amap.num_layers} experts={amap.num_experts} tokens={amap.token_count}\n"
        )
        writer = csv.writer(f, lineterminator="\n")
        for row in amap.values:
            writer.writerow([repr(float(v)) for v in row])
    logger.info(f"Heatmap written to {path}")
    return path


def read_heatmap(path: PathLike) -> ActivationMap:
    """Read a heatmap CSV back (counts are not stored and come back as zeros)."""
    with open(path, "r", newline="") as f:
        header = f.readline().strip()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing '# layers=... experts=... tokens=...' header")
        fields = dict(part.split("=", 1) for part in header[1:].split())
        num_layers, num_experts = int(fields["layers"]), int(fields["experts"])
        rows = [[float(v) for v in row] for row in csv.reader(f) if row]
    values = np.array(rows, dtype=np.float64).reshape(num_layers, num_experts)
    return ActivationMap(values, np.zeros_like(values, dtype=np.int64), int(fields["tokens"]))


def write_report(report: dict, path: PathLike) -> Path:
    """Write a key/value report as sorted, indented JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    return path
