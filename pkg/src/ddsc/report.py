"""Plot-ready tables of predicted weekly profiles and energy shares."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ddsc.bundle import read_matrix
from ddsc.errors import DDSCError, EmptyInput, ShapeMismatch


def load_predictions(directory, labels: Optional[Sequence[str]] = None) -> dict[str, np.ndarray]:
    """Read ``<label>.csv`` matrices from a directory (``aggregate.csv`` skipped)."""
    root = Path(directory)
    if not root.is_dir():
        raise EmptyInput(f"{root} is not a directory")
    if labels is None:
        labels = sorted(p.stem for p in root.glob("*.csv") if p.stem != "aggregate")
    if not labels:
        raise EmptyInput(f"no prediction CSV files in {root}")
    out = {}
    for label in labels:
        path = root / f"{label}.csv"
        if not path.exists():
            raise DDSCError(f"missing {path}")
        out[label] = read_matrix(path)
    shapes = {m.shape for m in out.values()}
    if len(shapes) != 1:
        raise ShapeMismatch(f"matrices in {root} disagree in shape: {sorted(shapes)}")
    return out


def _shares(mats: dict[str, np.ndarray], col) -> tuple[dict, dict]:
    totals = {k: float(v[:, col].sum()) if col is not None else float(v.sum()) for k, v in mats.items()}
    whole = sum(totals.values())
    return {k: (100.0 * t / whole if whole > 0 else float("nan")) for k, t in totals.items()}, totals


def write_report(preds: dict[str, np.ndarray], truth: Optional[dict[str, np.ndarray]], out_dir) -> None:
    """Write ``profiles.csv`` (label, column, hour, values) and ``shares.csv``.

    Shares are each appliance's percentage of the predicted (or true) total,
    per column and over all columns (``column = all``). Error columns appear
    only when truth is supplied.
    """
    if truth is not None:
        for k, v in preds.items():
            if truth[k].shape != v.shape:
                raise ShapeMismatch(f"{k}: truth {truth[k].shape} vs prediction {v.shape}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    T, M = next(iter(preds.values())).shape
    with open(out / "profiles.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "column", "hour", "predicted_kwh"] + (["true_kwh", "error_kwh"] if truth else []))
        for label, P in preds.items():
            for m in range(M):
                for t in range(T):
                    row = [label, m, t, repr(float(P[t, m]))]
                    if truth:
                        x = float(truth[label][t, m])
                        row += [repr(x), repr(float(P[t, m]) - x)]
                    w.writerow(row)
    with open(out / "shares.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["column", "label", "predicted_kwh", "predicted_share_pct"] + (["true_kwh", "true_share_pct"] if truth else []))
        for col in [*range(M), None]:
            p_share, p_tot = _shares(preds, col)
            if truth:
                t_share, t_tot = _shares(truth, col)
            for label in preds:
                row = ["all" if col is None else col, label, repr(p_tot[label]), repr(p_share[label])]
                if truth:
                    row += [repr(t_tot[label]), repr(t_share[label])]
                w.writerow(row)
