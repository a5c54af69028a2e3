"""On-disk formats: dataset bundles ("ddsc-data/1") and model files ("ddsc-model/1").

A bundle directory holds ``index.json`` and one plain numeric CSV per
matrix (T rows, one column per house-week)::

    index.json
    train/aggregate.csv  train/<label>.csv ...
    test/aggregate.csv   test/<label>.csv ...

Floats are written with 17 significant digits so they read back bit-exact.
"""

from __future__ import annotations

import io
import json
from pathlib import Path
from typing import Optional

import numpy as np

from ddsc.core import ApplianceDataset, Dictionary, DisaggModel, TrainConfig, make_dataset
from ddsc.errors import DDSCError

DATA_FORMAT = "ddsc-data/1"
MODEL_FORMAT = "ddsc-model/1"


def matrix_to_csv(values: np.ndarray) -> str:
    buf = io.StringIO()
    np.savetxt(buf, np.atleast_2d(values), fmt="%.17g", delimiter=",")
    return buf.getvalue()


def write_matrix(path, values: np.ndarray) -> None:
    Path(path).write_text(matrix_to_csv(values))


def read_matrix(path) -> np.ndarray:
    try:
        arr = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except (OSError, ValueError) as exc:
        raise DDSCError(f"cannot read matrix {path}: {exc}") from None
    return arr


def write_bundle(out_dir, splits: dict, extra: Optional[dict] = None) -> Path:
    """Write named datasets (e.g. ``{"train": ds, "test": ds}``) as one bundle."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    first = next(iter(splits.values()))
    index = {
        "format": DATA_FORMAT,
        "labels": list(first.labels),
        "T": first.T,
        "interval_seconds": first.aggregate.interval_seconds,
        "splits": {},
    }
    if extra:
        index["meta"] = extra
    for name, ds in splits.items():
        if tuple(ds.labels) != tuple(first.labels) or ds.T != first.T:
            raise DDSCError(f"split {name!r} disagrees with the others in labels or T")
        (out / name).mkdir(exist_ok=True)
        files = {"aggregate": f"{name}/aggregate.csv"}
        write_matrix(out / files["aggregate"], ds.aggregate.values)
        for label, comp in zip(ds.labels, ds.components):
            files[label] = f"{name}/{label}.csv"
            write_matrix(out / files[label], comp.values)
        index["splits"][name] = {
            "columns": ds.M,
            "house_ids": list(ds.house_ids) if ds.house_ids is not None else None,
            "matrices": files,
        }
    (out / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return out


def read_index(bundle_dir) -> dict:
    path = Path(bundle_dir) / "index.json"
    try:
        index = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DDSCError(f"cannot read bundle index {path}: {exc}") from None
    if index.get("format") != DATA_FORMAT:
        raise DDSCError(f"{path}: expected format {DATA_FORMAT!r}, got {index.get('format')!r}")
    return index


def read_split(bundle_dir, name: str) -> ApplianceDataset:
    root = Path(bundle_dir)
    index = read_index(root)
    if name not in index["splits"]:
        raise DDSCError(f"bundle {root} has no {name!r} split (has {sorted(index['splits'])})")
    entry = index["splits"][name]
    labels = index["labels"]
    comps = [read_matrix(root / entry["matrices"][label]) for label in labels]
    agg = read_matrix(root / entry["matrices"]["aggregate"])
    return make_dataset(labels, comps, agg, entry.get("house_ids"), int(index.get("interval_seconds", 3600)))


def model_to_dict(model: DisaggModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "labels": list(model.labels),
        "T": model.T,
        "n": model.sizes,
        "config": model.config.to_dict(),
        "recon_bases": [b.values.tolist() for b in model.recon_bases],
        "disc_bases": [b.values.tolist() for b in model.disc_bases],
    }


def model_from_dict(data: dict) -> DisaggModel:
    if data.get("format") != MODEL_FORMAT:
        raise DDSCError(f"expected model format {MODEL_FORMAT!r}, got {data.get('format')!r}")
    model = DisaggModel(
        tuple(data["labels"]),
        tuple(Dictionary(np.array(b, dtype=np.float64)) for b in data["recon_bases"]),
        tuple(Dictionary(np.array(b, dtype=np.float64)) for b in data["disc_bases"]),
        TrainConfig.from_dict(data["config"]),
    )
    if model.T != data["T"] or model.sizes != list(data["n"]):
        raise DDSCError("model header (T, n) disagrees with the stored dictionaries")
    return model


def save_model(model: DisaggModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), sort_keys=True) + "\n")


def load_model(path) -> DisaggModel:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DDSCError(f"cannot read model {path}: {exc}") from None
    return model_from_dict(data)
