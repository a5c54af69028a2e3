"""End-to-end training and hyperparameter search."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from ddsc.core import ApplianceDataset, DisaggModel, TrainConfig
from ddsc.dataio import split_houses
from ddsc.disaggregate import Mode, evaluate
from ddsc.discriminative import train_ddsc
from ddsc.errors import DDSCError
from ddsc.nnsc import stack, train_all

log = logging.getLogger(__name__)


def split_by_house(ds: ApplianceDataset, ratio: float = 0.7, seed: int = 0) -> tuple[ApplianceDataset, ApplianceDataset]:
    houses = ds.house_ids or tuple(str(m) for m in range(ds.M))
    train_ids, test_ids = split_houses(houses, ratio, seed)
    train_set, test_set = set(train_ids), set(test_ids)
    return (
        ds.select_columns([m for m, h in enumerate(houses) if h in train_set]),
        ds.select_columns([m for m, h in enumerate(houses) if h in test_set]),
    )


def fit(
    train: ApplianceDataset,
    config: TrainConfig,
    skip_dd: bool = False,
    on_record: Optional[Callable[[dict], None]] = None,
) -> DisaggModel:
    """NNSC pre-training, target activations, then discriminative refinement."""
    recon, targets, traces = train_all(train, config)
    for label, trace in zip(train.labels, traces):
        log.debug("nnsc %s: %d rounds, objective %.6g", label, len(trace) - 1, trace[-1])
        if on_record:
            on_record({"stage": "nnsc", "label": label, "rounds": len(trace) - 1, "objective": trace[-1]})
    if skip_dd:
        return DisaggModel(train.labels, recon, recon, config)

    def record(rec: dict) -> None:
        if on_record:
            on_record({"stage": "dd", **rec})

    disc, _ = train_ddsc(train, recon, stack(targets), config, log=record)
    return DisaggModel(train.labels, recon, disc, config)


@dataclass(frozen=True)
class GridRow:
    n_bases: int
    lam: float
    alpha: float
    mae_ddsc: float
    mae_nnsc: float
    sae_ddsc: Optional[float]
    best: bool = False


def expand_grid(grid: dict, base: TrainConfig) -> list[TrainConfig]:
    """Cartesian product over n_bases, lambda and alpha in lexicographic order."""
    unknown = set(grid) - {"n_bases", "lambda", "alpha", "base"}
    if unknown:
        raise DDSCError(f"unknown grid keys: {sorted(unknown)}")
    axes = []
    for key, default in (("n_bases", base.n_bases), ("lambda", base.lam), ("alpha", base.alpha)):
        values = grid.get(key, [default])
        if not isinstance(values, list) or not values:
            raise DDSCError(f"grid axis {key!r} must be a non-empty list")
        axes.append(sorted(set(values)))
    return [base.replace(n_bases=n, lam=lam, alpha=a) for n, lam, a in itertools.product(*axes)]


def grid_search(
    train: ApplianceDataset,
    configs: Sequence[TrainConfig],
    ratio: float = 0.7,
    seed: int = 0,
) -> tuple[TrainConfig, list[GridRow]]:
    """Pick the config with the lowest DDSC MAE on houses held out of ``train``.

    Ties go to the earliest config in lexicographic (n_bases, lambda, alpha)
    order.
    """
    if not configs:
        raise DDSCError("empty grid")
    configs = sorted(configs, key=lambda c: (c.n_bases, c.lam, c.alpha))
    sub, val = split_by_house(train, ratio, seed)
    rows = []
    for cfg in configs:
        model = fit(sub, cfg)
        dd = evaluate(val, model, Mode.DDSC)
        nn = evaluate(val, model, Mode.NNSC)
        rows.append(GridRow(cfg.n_bases, cfg.lam, cfg.alpha, dd.overall["mae"], nn.overall["mae"], dd.overall["sae"]))
    best = min(range(len(rows)), key=lambda i: (rows[i].mae_ddsc, i))
    rows[best] = GridRow(**{**rows[best].__dict__, "best": True})
    return configs[best], rows
