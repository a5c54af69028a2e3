"""Test-time disaggregation and the MAE / SAE / NDE metrics."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ddsc.core import ApplianceDataset, DisaggModel, UsageMatrix
from ddsc.discriminative import concat_bases, split_blocks
from ddsc.errors import (
    LengthMismatch,
    ShapeMismatch,
    WindowLengthMismatch,
    ZeroTruthEnergy,
    ZeroTruthTotal,
)
from ddsc.solver import solve_activations


class Mode(str, enum.Enum):
    NNSC = "nnsc"
    DDSC = "ddsc"


def _values(x) -> np.ndarray:
    return x.values if isinstance(x, UsageMatrix) else np.asarray(x, dtype=np.float64)


def infer_activations(Xbar, model: DisaggModel, mode: Mode) -> tuple[np.ndarray, list[np.ndarray]]:
    """Activations of the aggregate over the mode's dictionaries.

    Returns the stacked activations and the dictionaries used to predict:
    the discriminative ones for DDSC, the reconstruction ones for NNSC.
    """
    X = _values(Xbar)
    if X.ndim != 2 or X.shape[0] != model.T:
        raise WindowLengthMismatch(f"aggregate has {X.shape[0]} rows, model expects T={model.T}")
    bases = model.disc_bases if Mode(mode) is Mode.DDSC else model.recon_bases
    cfg = model.config
    A, _ = solve_activations(X, concat_bases(bases), cfg.lam, cfg.penalty_mode, cfg.solver_max_iters, cfg.tol)
    return A.values, [b.values for b in bases]


def predict(Xbar, model: DisaggModel, mode: Mode = Mode.DDSC) -> list[UsageMatrix]:
    """Split an aggregate T x M matrix into K per-appliance estimates.

    DDSC mode codes the aggregate over the discriminative dictionaries and
    returns ``Bdisc_k @ A_k``; NNSC mode does the same with the
    reconstruction dictionaries.
    """
    A, bases = infer_activations(Xbar, model, mode)
    interval = Xbar.interval_seconds if isinstance(Xbar, UsageMatrix) else 3600
    out = []
    for B, blk in zip(bases, split_blocks(A, model.sizes)):
        out.append(UsageMatrix(np.maximum(B @ blk, 0.0), interval))
    return out


def disaggregation_error(components: Sequence, Xbar, model: DisaggModel, mode: Mode = Mode.NNSC) -> float:
    """Sum of 0.5 ||X_k - B_k A_k||_F^2 using reconstruction dictionaries B_k.

    The activations come from the aggregate alone, coded over the mode's
    dictionaries.
    """
    X = _values(Xbar)
    if len(components) != model.K:
        raise ShapeMismatch(f"{len(components)} components for a {model.K}-appliance model")
    for c in components:
        if _values(c).shape != X.shape:
            raise ShapeMismatch(f"component shape {_values(c).shape} differs from aggregate {X.shape}")
    A, _ = infer_activations(X, model, mode)
    total = 0.0
    for c, B, blk in zip(components, model.recon_bases, split_blocks(A, model.sizes)):
        R = _values(c) - B.values @ blk
        total += 0.5 * float((R * R).sum())
    return total


def _pair(truth, pred) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(truth, dtype=np.float64).ravel()
    y = np.asarray(pred, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise LengthMismatch(f"truth has {x.size} samples, prediction {y.size}")
    if x.size < 1:
        raise LengthMismatch("need at least one sample")
    return x, y


def mae(truth, pred) -> float:
    x, y = _pair(truth, pred)
    return float(np.abs(y - x).mean())


def sae(truth, pred) -> float:
    x, y = _pair(truth, pred)
    r = float(x.sum())
    if r == 0.0:
        raise ZeroTruthTotal("true total energy is zero; SAE is undefined")
    return abs(float(y.sum()) - r) / r


def nde(truth, pred) -> float:
    x, y = _pair(truth, pred)
    energy = float((x * x).sum())
    if energy == 0.0:
        raise ZeroTruthEnergy("true signal energy is zero; NDE is undefined")
    return float(((y - x) ** 2).sum()) / energy


@dataclass(frozen=True)
class ApplianceMetrics:
    label: str
    mae: float
    sae: Optional[float]
    nde: Optional[float]
    sae_undefined: int = 0
    nde_undefined: int = 0


@dataclass(frozen=True)
class MetricsReport:
    """Per-appliance metrics averaged per house, plus their unweighted mean.

    ``None`` marks a metric that was undefined for every test house.
    """

    mode: str
    per_appliance: tuple[ApplianceMetrics, ...]
    overall: dict = field(default_factory=dict)
    n_houses: int = 0
    n_columns: int = 0

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "aggregation": "per-column metric, mean within house, mean over houses; overall = unweighted appliance mean",
            "n_houses": self.n_houses,
            "n_columns": self.n_columns,
            "per_appliance": [
                {
                    "label": a.label,
                    "mae": a.mae,
                    "sae": a.sae,
                    "nde": a.nde,
                    "sae_undefined": a.sae_undefined,
                    "nde_undefined": a.nde_undefined,
                }
                for a in self.per_appliance
            ],
            "overall": dict(self.overall),
        }


def _house_mean(values: list[Optional[float]], houses: Sequence[str]) -> tuple[Optional[float], int]:
    by_house: dict[str, list[float]] = {}
    undefined = 0
    for v, h in zip(values, houses):
        if v is None:
            undefined += 1
            continue
        by_house.setdefault(h, []).append(v)
    if not by_house:
        return None, undefined
    # sorted keys keep the float summation order independent of column order
    means = [math.fsum(by_house[h]) / len(by_house[h]) for h in sorted(by_house)]
    return math.fsum(means) / len(means), undefined


def _safe(fn, x, y) -> Optional[float]:
    try:
        return fn(x, y)
    except (ZeroTruthTotal, ZeroTruthEnergy):
        return None


def _mean_defined(values) -> Optional[float]:
    vals = [v for v in values if v is not None]
    return math.fsum(vals) / len(vals) if vals else None


def score(dataset: ApplianceDataset, predictions: Sequence, mode: str) -> MetricsReport:
    """Metrics of given per-appliance predictions against a dataset."""
    houses = dataset.house_ids or tuple(str(m) for m in range(dataset.M))
    rows = []
    for label, truth, pred in zip(dataset.labels, dataset.components, predictions):
        X, P = truth.values, _values(pred)
        if P.shape != X.shape:
            raise ShapeMismatch(f"{label!r}: prediction {P.shape} vs truth {X.shape}")
        cols = range(X.shape[1])
        m_mae, _ = _house_mean([mae(X[:, m], P[:, m]) for m in cols], houses)
        m_sae, n_sae = _house_mean([_safe(sae, X[:, m], P[:, m]) for m in cols], houses)
        m_nde, n_nde = _house_mean([_safe(nde, X[:, m], P[:, m]) for m in cols], houses)
        rows.append(ApplianceMetrics(label, m_mae, m_sae, m_nde, n_sae, n_nde))
    overall = {
        "mae": _mean_defined(r.mae for r in rows),
        "sae": _mean_defined(r.sae for r in rows),
        "nde": _mean_defined(r.nde for r in rows),
    }
    return MetricsReport(str(mode), tuple(rows), overall, len(set(houses)), dataset.M)


def evaluate(dataset: ApplianceDataset, model: DisaggModel, mode: Mode = Mode.DDSC) -> MetricsReport:
    if dataset.T != model.T:
        raise WindowLengthMismatch(f"dataset T={dataset.T}, model T={model.T}")
    if tuple(dataset.labels) != tuple(model.labels):
        raise ShapeMismatch(f"dataset labels {dataset.labels} differ from model labels {model.labels}")
    return score(dataset, predict(dataset.aggregate, model, mode), Mode(mode).value)


def _fmt(v: Optional[float]) -> str:
    return "undefined" if v is None else repr(float(v))


def table_csv(reports: dict) -> str:
    """CSV with one row per appliance plus ``overall`` and metric x mode columns."""
    modes = [Mode(m).value for m in reports]
    reps = [reports[m] for m in reports]
    header = ["appliance"] + [f"{metric}_{m}" for metric in ("mae", "sae", "nde") for m in modes]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    labels = [a.label for a in reps[0].per_appliance]
    for i, label in enumerate(labels):
        row = [label]
        for metric in ("mae", "sae", "nde"):
            row += [_fmt(getattr(r.per_appliance[i], metric)) for r in reps]
        w.writerow(row)
    row = ["overall"]
    for metric in ("mae", "sae", "nde"):
        row += [_fmt(r.overall[metric]) for r in reps]
    w.writerow(row)
    return buf.getvalue()
