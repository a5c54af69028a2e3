"""Command line interface: synth, ingest, train, disaggregate, evaluate, gridsearch, report.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from ddsc import bundle
from ddsc.core import TrainConfig, UsageMatrix
from ddsc.dataio import CategoryMap, build_dataset, load_houses
from ddsc.disaggregate import Mode, evaluate, predict, table_csv
from ddsc.errors import DDSCError
from ddsc.pipeline import expand_grid, fit, grid_search, split_by_house
from ddsc.synth import generate, load_profile_file

EXIT_INPUT = 2
EXIT_NUMERIC = 3


def fail(message: str, code: int = EXIT_INPUT):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def read_json(path, what: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        fail(f"cannot read {what} {path}: {exc}")
    if not isinstance(data, dict):
        fail(f"{what} {path} must be a JSON object")
    return data


def load_config(path, seed) -> tuple[TrainConfig, int | None]:
    data = read_json(path, "config") if path else {}
    window = data.pop("T", None)
    try:
        cfg = TrainConfig.from_dict(data)
    except (DDSCError, TypeError) as exc:
        fail(f"invalid config: {exc}")
    if seed is not None:
        cfg = cfg.replace(seed=seed)
    return cfg, window


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging on stderr.")
def main(verbose):
    """Discriminative disaggregation sparse coding for household energy data."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--spec", "spec_path", type=click.Path(), help="Profile spec JSON (defaults if omitted).")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--houses", default=40, show_default=True, type=int)
@click.option("--weeks", default=1, show_default=True, type=int)
@click.option("--split-ratio", default=0.7, show_default=True, type=float)
def synth(spec_path, out_dir, seed, houses, weeks, split_ratio):
    """Generate a synthetic train/test dataset bundle."""
    try:
        profile = load_profile_file(spec_path) if spec_path else None
        ds = generate(profile, houses, weeks, seed)
        train, test = split_by_house(ds, split_ratio, seed)
    except DDSCError as exc:
        fail(str(exc))
    bundle.write_bundle(out_dir, {"train": train, "test": test},
                        {"source": "synth", "seed": seed, "houses": houses, "weeks": weeks, "profile": profile})
    click.echo(f"wrote bundle {out_dir}: train {train.M} columns, test {test.M} columns")


@main.command()
@click.option("--raw", "raw_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--map", "map_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--week-start", default=0, show_default=True, type=click.IntRange(0, 6), help="0 = Monday.")
@click.option("--split-ratio", default=0.7, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--min-coverage", default=0.9, show_default=True, type=float)
def ingest(raw_dir, map_path, out_dir, week_start, split_ratio, seed, min_coverage):
    """Build a dataset bundle from per-house smart-meter CSV files."""
    try:
        cmap = CategoryMap.from_dict(read_json(map_path, "category map"))
        train, test = build_dataset(load_houses(raw_dir), cmap, week_start, split_ratio, seed, min_coverage=min_coverage)
    except DDSCError as exc:
        fail(str(exc))
    bundle.write_bundle(out_dir, {"train": train, "test": test}, {"source": "ingest", "seed": seed})
    click.echo(f"wrote bundle {out_dir}: train {train.M} columns, test {test.M} columns")


@main.command()
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_model", required=True, type=click.Path())
@click.option("--log", "log_path", type=click.Path(), help="Write JSON-lines training records here.")
@click.option("--seed", type=int, help="Overrides the config seed.")
@click.option("--skip-dd", is_flag=True, help="NNSC baseline only: discriminative bases = reconstruction bases.")
def train(data_dir, config_path, out_model, log_path, seed, skip_dd):
    """Train NNSC then discriminative dictionaries on the bundle's train split."""
    cfg, window = load_config(config_path, seed)
    try:
        ds = bundle.read_split(data_dir, "train")
    except DDSCError as exc:
        fail(str(exc))
    if window is not None and int(window) != ds.T:
        fail(f"config expects T={window}, data has T={ds.T}", EXIT_NUMERIC)
    sink = open(log_path, "w") if log_path else None

    def on_record(rec):
        if sink:
            stamp = dt.datetime.now(dt.timezone.utc).isoformat()
            sink.write(json.dumps({"time": stamp, **rec}, sort_keys=True) + "\n")
            sink.flush()

    try:
        model = fit(ds, cfg, skip_dd=skip_dd, on_record=on_record)
    except (DDSCError, FloatingPointError, np.linalg.LinAlgError) as exc:
        fail(f"training failed: {exc}", EXIT_NUMERIC)
    finally:
        if sink:
            sink.close()
    bundle.save_model(model, out_model)
    click.echo(f"wrote model {out_model} ({model.K} appliances, n={model.sizes})")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--aggregate", "aggregate_csv", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice([m.value for m in Mode]), default="ddsc", show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def disaggregate(model_path, aggregate_csv, mode, out_dir):
    """Split an aggregate CSV (T rows x M columns) into per-appliance CSVs."""
    try:
        model = bundle.load_model(model_path)
        preds = predict(UsageMatrix(bundle.read_matrix(aggregate_csv)), model, Mode(mode))
    except DDSCError as exc:
        fail(str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for label, p in zip(model.labels, preds):
        bundle.write_matrix(out / f"{label}.csv", p.values)
    click.echo(f"wrote {len(preds)} predictions to {out_dir}")


@main.command("evaluate")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--split", default="test", show_default=True)
def evaluate_cmd(model_path, data_dir, out_dir, split):
    """Score NNSC and DDSC predictions; writes report.json and table.csv."""
    try:
        model = bundle.load_model(model_path)
        ds = bundle.read_split(data_dir, split)
        reports = {m: evaluate(ds, model, m) for m in (Mode.NNSC, Mode.DDSC)}
    except DDSCError as exc:
        fail(str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {"split": split, "config": model.config.to_dict(), "reports": {m.value: r.to_dict() for m, r in reports.items()}}
    (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    (out / "table.csv").write_text(table_csv(reports))
    click.echo(table_csv(reports), nl=False)


@main.command()
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--grid", "grid_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="Base config.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int)
def gridsearch(data_dir, grid_path, config_path, out_dir, seed):
    """Exhaustive search over n_bases x lambda x alpha on a held-out validation split."""
    base, _ = load_config(config_path, seed)
    grid = read_json(grid_path, "grid")
    try:
        if "base" in grid:
            base = TrainConfig.from_dict({**base.to_dict(), **grid["base"]})
        configs = expand_grid(grid, base)
        ds = bundle.read_split(data_dir, "train")
    except (DDSCError, TypeError) as exc:
        fail(str(exc))
    try:
        best, rows = grid_search(ds, configs, seed=base.seed)
    except DDSCError as exc:
        fail(f"grid search failed: {exc}", EXIT_NUMERIC)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "best_config.json").write_text(json.dumps(best.to_dict(), indent=2, sort_keys=True) + "\n")
    with open(out / "scores.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n_bases", "lambda", "alpha", "mae_ddsc", "mae_nnsc", "sae_ddsc", "best"])
        for r in rows:
            w.writerow([r.n_bases, repr(r.lam), repr(r.alpha), repr(r.mae_ddsc), repr(r.mae_nnsc),
                        "undefined" if r.sae_ddsc is None else repr(r.sae_ddsc), int(r.best)])
    click.echo(f"best: n_bases={best.n_bases} lambda={best.lam} alpha={best.alpha}")


@main.command()
@click.option("--predictions", "pred_dir", required=True, type=click.Path())
@click.option("--truth", "truth_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path())
def report(pred_dir, truth_dir, out_dir):
    """Plot-ready long-format CSVs: weekly profiles and energy shares."""
    from ddsc.report import load_predictions, write_report

    try:
        preds = load_predictions(pred_dir)
        truth = load_predictions(truth_dir, labels=list(preds)) if truth_dir else None
        write_report(preds, truth, out_dir)
    except DDSCError as exc:
        fail(str(exc))
    click.echo(f"wrote profiles.csv and shares.csv to {out_dir}")


if __name__ == "__main__":
    main()
