"""Per-appliance non-negative sparse coding (reconstruction dictionaries)."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np

from ddsc.core import Activations, ApplianceDataset, Dictionary, TrainConfig, UsageMatrix
from ddsc.solver import make_rng, solve_activations, sparse_objective, update_dictionary


def worker_count() -> int:
    """Thread cap from ``DDSC_THREADS``; defaults to all cores."""
    raw = os.environ.get("DDSC_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _values(x) -> np.ndarray:
    return x.values if isinstance(x, (UsageMatrix, Dictionary, Activations)) else np.asarray(x, dtype=np.float64)


def init_dictionary(T: int, n: int, rng: np.random.Generator) -> np.ndarray:
    B = 1.0 - rng.random((T, n))  # uniform on (0, 1]
    return B / np.sqrt((B * B).sum(axis=0))


def train_nnsc(
    X_k,
    config: TrainConfig,
    rng: Optional[np.random.Generator] = None,
) -> tuple[Dictionary, Activations, list[float]]:
    """Alternate activation solves and dictionary updates for one appliance.

    Returns the dictionary, the activations and the objective after the
    initial activation solve and after every alternation.
    """
    X = _values(X_k)
    if rng is None:
        rng = make_rng(config.seed)
    lam, mode = config.lam, config.penalty_mode
    B = Dictionary(init_dictionary(X.shape[0], config.n_bases, rng))
    A, _ = solve_activations(X, B, lam, mode, config.solver_max_iters, config.tol)
    trace = [sparse_objective(X, B, A, lam, mode)]
    for _ in range(config.nnsc_max_iters):
        B, _ = update_dictionary(X, A, B, config.solver_max_iters, config.tol, rng)
        A, _ = solve_activations(X, B, lam, mode, config.solver_max_iters, config.tol, A_init=A)
        f = sparse_objective(X, B, A, lam, mode)
        prev = trace[-1]
        trace.append(f)
        if prev - f <= config.tol * max(prev, 1e-300):
            break
    return B, A, trace


def compute_target_activations(X_k, B_k, config: TrainConfig) -> Activations:
    A, _ = solve_activations(_values(X_k), B_k, config.lam, config.penalty_mode, config.solver_max_iters, config.tol)
    return A


def train_all(
    dataset: ApplianceDataset,
    config: TrainConfig,
    workers: Optional[int] = None,
) -> tuple[list[Dictionary], list[Activations], list[list[float]]]:
    """Train every appliance independently, each on its own RNG stream.

    Returns reconstruction bases, target activations A* and per-appliance
    objective traces, all in label order.
    """
    def job(k: int):
        X = dataset.components[k].values
        B, _, trace = train_nnsc(X, config, make_rng(config.seed, k))
        return B, compute_target_activations(X, B, config), trace

    workers = worker_count() if workers is None else workers
    if workers > 1 and dataset.K > 1:
        with ThreadPoolExecutor(max_workers=min(workers, dataset.K)) as pool:
            results = list(pool.map(job, range(dataset.K)))
    else:
        results = [job(k) for k in range(dataset.K)]
    return [r[0] for r in results], [r[1] for r in results], [r[2] for r in results]


def stack(blocks: Sequence) -> np.ndarray:
    return np.vstack([_values(b) for b in blocks])
