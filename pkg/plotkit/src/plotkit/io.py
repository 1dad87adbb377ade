"""CSV readers validating the sampler/benchmark output schemas."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


class SchemaError(ValueError):
    """Input CSV does not match the expected producer schema."""


def _read_rows(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty file")
    return rows[0], rows[1:]


def read_samples(path: str | Path):
    """Samples CSV -> (times, q matrix, phase labels)."""
    header, rows = _read_rows(path)
    if len(header) < 4 or header[0] != "sample_index" or header[1] != "t" \
            or header[-1] != "phase":
        raise SchemaError(f"{path}: not a samples file (header {header})")
    qcols = [i for i, h in enumerate(header) if h.startswith("q_")]
    if not qcols or not rows:
        raise SchemaError(f"{path}: no sample rows or q columns")
    t = np.array([float(r[1]) for r in rows])
    q = np.array([[float(r[i]) for i in qcols] for r in rows])
    phase = np.array([r[-1] for r in rows])
    return t, q, phase


RMSE_HEADER = ["target", "beta", "strategy", "rmse", "benchmark_rmse",
               "replicas", "failures"]


def read_rmse(path: str | Path):
    header, rows = _read_rows(path)
    if header != RMSE_HEADER:
        raise SchemaError(f"{path}: expected rmse.csv header {RMSE_HEADER}, "
                          f"got {header}")
    out = []
    for r in rows:
        out.append({"target": r[0], "beta": float(r[1]), "strategy": r[2],
                    "rmse": float(r[3]), "benchmark_rmse": float(r[4]),
                    "replicas": int(r[5]), "failures": int(r[6])})
    if not out:
        raise SchemaError(f"{path}: no rows")
    return out


PRECISION_HEADER = ["tol", "T", "moment", "pair_rms", "exact_mc_rmse"]


def read_precision(path: str | Path):
    header, rows = _read_rows(path)
    if header != PRECISION_HEADER:
        raise SchemaError(f"{path}: expected precision.csv header "
                          f"{PRECISION_HEADER}, got {header}")
    out = []
    for r in rows:
        out.append({"tol": float(r[0]), "T": float(r[1]), "moment": r[2],
                    "pair_rms": float(r[3]), "exact_mc_rmse": float(r[4])})
    if not out:
        raise SchemaError(f"{path}: no rows")
    return out
