"""Smart-meter ingestion: long-format CSV -> hourly kWh -> weekly matrices.

Each house is one ``<house_id>.csv`` with header ``timestamp,channel,value``
(ISO-8601 UTC timestamps) plus a sidecar ``<house_id>.meta.json`` declaring
``{"unit": "kW" | "kWh", "reading_seconds": 60}``. ``reading_seconds`` is
optional; when absent it is inferred from the median timestamp spacing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from ddsc.core import AGGREGATE_ATOL, ApplianceDataset, make_dataset
from ddsc.errors import (
    DDSCError,
    EmptyInput,
    InsufficientHouses,
    NegativeEntry,
    NoCompleteWeeks,
    UnitUndeclared,
)
from ddsc.solver import make_rng

CATEGORIES = ("air", "furnace", "dishwasher", "refrigerator", "other")
UNITS = ("kW", "kWh")
CSV_HEADER = ["timestamp", "channel", "value"]
HOURS_PER_WEEK = 168


class UnmappedChannel(DDSCError):
    pass


@dataclass(frozen=True)
class RawReadingsTable:
    """Readings of one house on a shared, strictly increasing time axis.

    Channels missing a reading at some timestamp hold NaN there.
    """

    house_id: str
    timestamps: np.ndarray
    channels: dict
    unit: Optional[str]
    reading_seconds: Optional[int] = None

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        if ts.size and np.any(np.diff(ts) <= 0):
            raise DDSCError(f"house {self.house_id}: timestamps must be strictly increasing")
        chans = {}
        for name, vals in self.channels.items():
            v = np.asarray(vals, dtype=np.float64)
            if v.shape != ts.shape:
                raise DDSCError(f"house {self.house_id}: channel {name!r} length differs from timestamps")
            if np.any(v[~np.isnan(v)] < 0):
                raise NegativeEntry(f"house {self.house_id}: channel {name!r} has negative readings")
            chans[str(name)] = v
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "channels", chans)


@dataclass(frozen=True)
class CategoryMap:
    mapping: dict
    ignore: frozenset = field(default_factory=frozenset)
    aggregate: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "ignore", frozenset(self.ignore))
        bad = {c for c in self.mapping.values() if c not in CATEGORIES}
        if bad:
            raise DDSCError(f"unknown categories {sorted(bad)}; expected one of {CATEGORIES}")
        clash = set(self.mapping) & self.ignore
        if clash:
            raise DDSCError(f"channels both mapped and ignored: {sorted(clash)}")

    @classmethod
    def from_dict(cls, data: dict) -> "CategoryMap":
        return cls(dict(data.get("mapping", {})), frozenset(data.get("ignore", ())), data.get("aggregate"))

    def to_dict(self) -> dict:
        return {"mapping": dict(self.mapping), "ignore": sorted(self.ignore), "aggregate": self.aggregate}


def read_house(csv_path, meta_path=None) -> RawReadingsTable:
    csv_path = Path(csv_path)
    house_id = csv_path.stem
    meta_path = Path(meta_path) if meta_path else csv_path.with_name(f"{house_id}.meta.json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    df = pd.read_csv(csv_path, dtype={"channel": str})
    if list(df.columns) != CSV_HEADER:
        raise DDSCError(f"{csv_path}: header must be {','.join(CSV_HEADER)}, got {','.join(df.columns)}")
    if df.empty:
        raise EmptyInput(f"{csv_path}: no readings")
    stamps = pd.to_datetime(df["timestamp"], utc=True, format="ISO8601")
    df = df.assign(timestamp=stamps.astype("int64") // 10**9)
    wide = df.pivot(index="timestamp", columns="channel", values="value").sort_index()
    return RawReadingsTable(
        house_id,
        wide.index.to_numpy(np.int64),
        {c: wide[c].to_numpy(np.float64) for c in wide.columns},
        meta.get("unit"),
        meta.get("reading_seconds"),
    )


def write_house(table: RawReadingsTable, out_dir) -> Path:
    """Inverse of :func:`read_house` (used for fixtures and round trips)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stamps = pd.to_datetime(table.timestamps, unit="s", utc=True).strftime("%Y-%m-%dT%H:%M:%SZ")
    rows = []
    for name in sorted(table.channels):
        v = table.channels[name]
        ok = ~np.isnan(v)
        rows.append(pd.DataFrame({"timestamp": stamps[ok], "channel": name, "value": v[ok]}))
    pd.concat(rows).to_csv(out_dir / f"{table.house_id}.csv", index=False)
    meta = {"unit": table.unit}
    if table.reading_seconds:
        meta["reading_seconds"] = int(table.reading_seconds)
    (out_dir / f"{table.house_id}.meta.json").write_text(json.dumps(meta, sort_keys=True) + "\n")
    return out_dir / f"{table.house_id}.csv"


def resample(raw: RawReadingsTable, interval_seconds: int = 3600, min_coverage: float = 0.9) -> pd.DataFrame:
    """Per-channel energy (kWh) per interval; NaN marks under-covered intervals.

    kW readings contribute ``power * reading_seconds / 3600`` each; kWh
    readings are summed as-is. An interval is kept only if its readings span
    at least ``min_coverage`` of it. The index holds interval start times in
    epoch seconds, aligned to multiples of ``interval_seconds``.
    """
    if raw.unit not in UNITS:
        raise UnitUndeclared(f"house {raw.house_id}: unit must be one of {UNITS}, got {raw.unit!r}")
    ts = raw.timestamps
    if ts.size == 0 or not raw.channels:
        raise EmptyInput(f"house {raw.house_id}: no readings")
    if raw.reading_seconds:
        dur = float(raw.reading_seconds)
    elif ts.size > 1:
        dur = float(np.median(np.diff(ts)))
    else:
        dur = float(interval_seconds)
    start = (ts[0] // interval_seconds) * interval_seconds
    slot = (ts - start) // interval_seconds
    n_slots = int(slot[-1]) + 1
    out = {}
    for name, v in raw.channels.items():
        ok = ~np.isnan(v)
        total = np.bincount(slot[ok], weights=v[ok], minlength=n_slots)
        if raw.unit == "kW":
            total = total * dur / 3600.0
        count = np.bincount(slot[ok], minlength=n_slots)
        total[count * dur < min_coverage * interval_seconds] = np.nan
        out[name] = total
    index = pd.Index(start + interval_seconds * np.arange(n_slots, dtype=np.int64), name="timestamp")
    return pd.DataFrame(out, index=index)


def categorize(hourly: pd.DataFrame, cmap: CategoryMap, atol: float = AGGREGATE_ATOL) -> tuple[pd.DataFrame, pd.Series]:
    """Sum channels into categories and derive the aggregate.

    A category with no channels is all zeros. With a whole-home channel the
    unmetered remainder (whole-home minus metered categories) is added to
    ``other``; intervals where the metered categories exceed the whole-home
    reading by more than ``atol`` are marked missing.
    """
    known = set(cmap.mapping) | cmap.ignore | ({cmap.aggregate} if cmap.aggregate else set())
    unmapped = [c for c in hourly.columns if c not in known]
    if unmapped:
        raise UnmappedChannel(f"channels without a category: {unmapped}")
    cats = pd.DataFrame(0.0, index=hourly.index, columns=list(CATEGORIES))
    for chan, cat in cmap.mapping.items():
        if chan in hourly.columns:
            cats[cat] = cats[cat] + hourly[chan]
    total = cats.sum(axis=1, skipna=False)
    if cmap.aggregate and cmap.aggregate in hourly.columns:
        whole = hourly[cmap.aggregate]
        rest = whole - total
        bad = rest < -atol
        cats.loc[bad, :] = np.nan
        cats["other"] = cats["other"] + rest.clip(lower=0.0)
        total = cats.sum(axis=1, skipna=False)
    return cats, total


def week_columns(frame: pd.DataFrame, interval_seconds: int = 3600, week_start: int = 0) -> list[int]:
    """Start offsets (row positions) of complete, gap-free weeks.

    Weeks begin at 00:00 UTC on ``week_start`` (0 = Monday ... 6 = Sunday).
    """
    T = 7 * 86400 // interval_seconds
    idx = frame.index.to_numpy(np.int64)
    if idx.size < T:
        return []
    # the Unix epoch fell on a Thursday (weekday 3)
    anchor = ((week_start - 3) % 7) * 86400
    first = idx[0] + ((anchor - idx[0]) % (7 * 86400))
    complete = frame.notna().all(axis=1).to_numpy()
    starts = []
    pos = int((first - idx[0]) // interval_seconds)
    while pos + T <= idx.size:
        if complete[pos:pos + T].all():
            starts.append(pos)
        pos += T
    return starts


def house_matrices(raw: RawReadingsTable, cmap: CategoryMap, week_start: int = 0, interval_seconds: int = 3600,
                   min_coverage: float = 0.9) -> tuple[dict, list[int]]:
    """Category matrices (T x weeks) for one house and the week start times."""
    hourly = resample(raw, interval_seconds, min_coverage)
    cats, _ = categorize(hourly, cmap)
    starts = week_columns(cats, interval_seconds, week_start)
    T = 7 * 86400 // interval_seconds
    mats = {c: np.column_stack([cats[c].to_numpy()[s:s + T] for s in starts]) if starts else np.zeros((T, 0))
            for c in CATEGORIES}
    return mats, [int(cats.index[s]) for s in starts]


def split_houses(house_ids: Sequence[str], ratio: float = 0.7, seed: int = 0) -> tuple[list[str], list[str]]:
    """Seeded shuffle of houses; the first floor(ratio * H) go to training."""
    ids = sorted(set(house_ids))
    if len(ids) < 2:
        raise InsufficientHouses(f"need at least 2 houses, got {len(ids)}")
    order = make_rng(seed).permutation(len(ids))
    n_train = math.floor(ratio * len(ids))
    return [ids[i] for i in order[:n_train]], [ids[i] for i in order[n_train:]]


def _assemble(per_house: dict, ids: Sequence[str], name: str, interval_seconds: int) -> ApplianceDataset:
    used = [h for h in ids if per_house[h]["other"].shape[1] > 0]
    if not used:
        raise NoCompleteWeeks(f"{name} split has no complete weeks")
    comps = [np.hstack([per_house[h][c] for h in used]) for c in CATEGORIES]
    house_ids = [h for h in used for _ in range(per_house[h]["other"].shape[1])]
    return make_dataset(CATEGORIES, comps, house_ids=house_ids, interval_seconds=interval_seconds)


def build_dataset(
    houses: Sequence[RawReadingsTable],
    cmap: CategoryMap,
    week_start: int = 0,
    split_ratio: float = 0.7,
    seed: int = 0,
    interval_seconds: int = 3600,
    min_coverage: float = 0.9,
) -> tuple[ApplianceDataset, ApplianceDataset]:
    """Weekly train/test datasets, split by house (never by week)."""
    if len({h.house_id for h in houses}) < 2:
        raise InsufficientHouses("need at least 2 distinct houses")
    per_house = {h.house_id: house_matrices(h, cmap, week_start, interval_seconds, min_coverage)[0] for h in houses}
    train_ids, test_ids = split_houses(list(per_house), split_ratio, seed)
    return (
        _assemble(per_house, train_ids, "train", interval_seconds),
        _assemble(per_house, test_ids, "test", interval_seconds),
    )


def load_houses(raw_dir) -> list[RawReadingsTable]:
    paths = sorted(p for p in Path(raw_dir).glob("*.csv"))
    if not paths:
        raise EmptyInput(f"no house CSV files in {raw_dir}")
    return [read_house(p) for p in paths]
