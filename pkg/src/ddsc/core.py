"""Domain types shared by the solvers, training loops and I/O layers.

Matrices are stored as read-only float64 numpy arrays. Columns index
examples (house-weeks), rows index time steps.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields, replace
from typing import Any, Optional, Sequence

import numpy as np

from ddsc.errors import (
    AggregateInconsistent,
    DDSCError,
    NegativeEntry,
    NonFiniteInput,
    ShapeMismatch,
)

AGGREGATE_ATOL = 1e-9
NORM_SLACK = 1e-12


class PenaltyMode(str, enum.Enum):
    L1 = "L1"
    SQUARED_FROBENIUS = "SquaredFrobenius"


def _frozen_matrix(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ShapeMismatch(f"{name} must be a 2-D matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains NaN or infinite entries")
    if arr.size and arr.min() < 0:
        raise NegativeEntry(f"{name} has negative entries (min={arr.min()!r})")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class UsageMatrix:
    """T x M energy readings in kWh per interval, one column per example."""

    values: np.ndarray
    interval_seconds: int = 3600
    start_timestamp: Optional[int] = None

    def __post_init__(self):
        arr = _frozen_matrix(self.values, "UsageMatrix")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeMismatch(f"UsageMatrix needs T >= 1 and M >= 1, got {arr.shape}")
        if int(self.interval_seconds) <= 0:
            raise DDSCError("interval_seconds must be positive")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "interval_seconds", int(self.interval_seconds))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def M(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Dictionary:
    """Non-negative T x n basis matrix whose columns have l2 norm at most 1."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_matrix(self.values, "Dictionary")
        if arr.shape[1] < 1:
            raise ShapeMismatch("Dictionary needs at least one basis column")
        norms = np.sqrt((arr * arr).sum(axis=0))
        if np.any(norms > 1.0 + NORM_SLACK):
            raise DDSCError(
                f"Dictionary column norm exceeds 1 (max={norms.max()!r}); "
                "use solver.project_dictionary first"
            )
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def T(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class Activations:
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_matrix(self.values, "Activations"))


@dataclass(frozen=True)
class ApplianceDataset:
    """Per-appliance usage matrices plus their whole-home aggregate.

    ``house_ids`` optionally labels every column with the house it came
    from, so that splits and metrics can group weeks by house.
    """

    labels: tuple[str, ...]
    components: tuple[UsageMatrix, ...]
    aggregate: UsageMatrix
    house_ids: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.labels) < 1 or len(self.labels) != len(self.components):
            raise ShapeMismatch(
                f"need K >= 1 labels matching components, got {len(self.labels)} "
                f"labels and {len(self.components)} components"
            )
        if len(set(self.labels)) != len(self.labels):
            raise DDSCError(f"duplicate appliance labels: {self.labels}")
        shape = self.aggregate.shape
        for label, comp in zip(self.labels, self.components):
            if comp.shape != shape:
                raise ShapeMismatch(f"component {label!r} has shape {comp.shape}, aggregate {shape}")
        total = np.sum([c.values for c in self.components], axis=0)
        gap = np.abs(total - self.aggregate.values).max()
        if gap > AGGREGATE_ATOL:
            raise AggregateInconsistent(
                f"aggregate differs from the component sum by up to {gap!r}"
            )
        if self.house_ids is not None:
            ids = tuple(str(h) for h in self.house_ids)
            if len(ids) != shape[1]:
                raise ShapeMismatch(f"{len(ids)} house ids for {shape[1]} columns")
            object.__setattr__(self, "house_ids", ids)

    @property
    def K(self) -> int:
        return len(self.labels)

    @property
    def T(self) -> int:
        return self.aggregate.T

    @property
    def M(self) -> int:
        return self.aggregate.M

    def component(self, label: str) -> UsageMatrix:
        return self.components[self.labels.index(label)]

    def select_columns(self, idx: Sequence[int]) -> "ApplianceDataset":
        idx = list(idx)
        def sub(u: UsageMatrix) -> UsageMatrix:
            return UsageMatrix(u.values[:, idx], u.interval_seconds, u.start_timestamp)
        return ApplianceDataset(
            self.labels,
            tuple(sub(c) for c in self.components),
            sub(self.aggregate),
            None if self.house_ids is None else tuple(self.house_ids[i] for i in idx),
        )


def make_dataset(
    labels: Sequence[str],
    components: Sequence[Any],
    aggregate: Any = None,
    house_ids: Optional[Sequence[str]] = None,
    interval_seconds: int = 3600,
) -> ApplianceDataset:
    """Build a validated dataset; the aggregate defaults to the component sum.

    Components and aggregate may be UsageMatrix instances or plain arrays.
    """
    if len(components) == 0:
        raise ShapeMismatch("at least one component is required")
    comps = tuple(
        c if isinstance(c, UsageMatrix) else UsageMatrix(c, interval_seconds) for c in components
    )
    shapes = {c.shape for c in comps}
    if len(shapes) != 1:
        raise ShapeMismatch(f"components disagree in shape: {sorted(shapes)}")
    if aggregate is None:
        aggregate = UsageMatrix(
            np.sum([c.values for c in comps], axis=0), comps[0].interval_seconds, comps[0].start_timestamp
        )
    elif not isinstance(aggregate, UsageMatrix):
        aggregate = UsageMatrix(aggregate, interval_seconds)
    return ApplianceDataset(tuple(labels), comps, aggregate, None if house_ids is None else tuple(house_ids))


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for NNSC pre-training and discriminative refinement.

    ``lam`` is the sparsity weight (serialized as ``"lambda"``). ``alpha_decay``
    is off by default; when positive the perceptron step at DD iteration t is
    ``alpha / (1 + alpha_decay * t)``.
    """

    n_bases: int = 64
    lam: float = 0.1
    alpha: float = 1e-4
    nnsc_max_iters: int = 100
    dd_max_iters: int = 50
    solver_max_iters: int = 500
    tol: float = 1e-6
    seed: int = 0
    penalty_mode: PenaltyMode = PenaltyMode.L1
    patience: int = 5
    alpha_decay: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "penalty_mode", PenaltyMode(self.penalty_mode))
        for name in ("n_bases", "nnsc_max_iters", "dd_max_iters", "solver_max_iters", "patience"):
            if int(getattr(self, name)) < 1:
                raise DDSCError(f"{name} must be a positive integer")
            object.__setattr__(self, name, int(getattr(self, name)))
        if not self.lam >= 0:
            raise DDSCError("lambda must be >= 0")
        if not self.alpha > 0:
            raise DDSCError("alpha must be > 0")
        if not self.tol > 0:
            raise DDSCError("tol must be > 0")
        if self.alpha_decay < 0:
            raise DDSCError("alpha_decay must be >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise DDSCError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "tol", float(self.tol))
        object.__setattr__(self, "alpha_decay", float(self.alpha_decay))

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            key = "lambda" if f.name == "lam" else f.name
            value = getattr(self, f.name)
            out[key] = value.value if isinstance(value, PenaltyMode) else value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        data = dict(data)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise DDSCError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def replace(self, **changes) -> "TrainConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class DisaggModel:
    labels: tuple[str, ...]
    recon_bases: tuple[Dictionary, ...]
    disc_bases: tuple[Dictionary, ...]
    config: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "recon_bases", tuple(self.recon_bases))
        object.__setattr__(self, "disc_bases", tuple(self.disc_bases))
        K = len(self.labels)
        if K < 1 or len(self.recon_bases) != K or len(self.disc_bases) != K:
            raise ShapeMismatch("labels, recon_bases and disc_bases must have the same length K >= 1")
        rows = {d.T for d in self.recon_bases + self.disc_bases}
        if len(rows) != 1:
            raise ShapeMismatch(f"all dictionaries must share T rows, got {sorted(rows)}")
        for label, b, bt in zip(self.labels, self.recon_bases, self.disc_bases):
            if b.n != bt.n:
                raise ShapeMismatch(f"{label!r}: recon has {b.n} bases, disc has {bt.n}")

    @property
    def K(self) -> int:
        return len(self.labels)

    @property
    def T(self) -> int:
        return self.recon_bases[0].T

    @property
    def sizes(self) -> list[int]:
        return [b.n for b in self.recon_bases]
