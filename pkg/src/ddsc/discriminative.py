"""Discriminative refinement of the disaggregation dictionaries.

Starting from the reconstruction dictionaries, each iteration infers
activations for the training aggregate, scores them against the true
components, and nudges the concatenated dictionary with a structured
perceptron step toward producing the target activations A*.
"""

from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

import numpy as np

from ddsc.core import Activations, ApplianceDataset, Dictionary, TrainConfig
from ddsc.errors import DimensionMismatch
from ddsc.solver import _project, make_rng, penalty, solve_activations

LogFn = Callable[[dict], None]


def _values(x) -> np.ndarray:
    return x.values if hasattr(x, "values") and isinstance(x.values, np.ndarray) else np.asarray(x, dtype=np.float64)


def split_blocks(A: np.ndarray, sizes: Sequence[int]) -> list[np.ndarray]:
    edges = np.cumsum([0, *sizes])
    return [A[edges[k]:edges[k + 1]] for k in range(len(sizes))]


def concat_bases(bases: Sequence) -> np.ndarray:
    return np.hstack([_values(b) for b in bases])


def disaggregation_solve(Xbar, bases: Sequence[Dictionary], config: TrainConfig) -> list[Activations]:
    """Jointly code the aggregate over the concatenated dictionaries.

    Returns one activation block per appliance, in dictionary order.
    """
    B = concat_bases(bases)
    A, _ = solve_activations(_values(Xbar), B, config.lam, config.penalty_mode, config.solver_max_iters, config.tol)
    return [Activations(blk) for blk in split_blocks(A.values, [_values(b).shape[1] for b in bases])]


def perceptron_step(Xbar, B_disc, A_hat, A_star, alpha: float) -> np.ndarray:
    """One structured-perceptron update of the concatenated dictionary.

    Computes ``B - alpha * ((Xbar - B A_hat) A_hat^T - (Xbar - B A_star) A_star^T)``
    with no projection. When ``A_hat`` equals ``A_star`` the two terms are
    identical floating-point values and the input comes back unchanged.
    """
    X, B = _values(Xbar), _values(B_disc)
    Ah, As = _values(A_hat), _values(A_star)
    if B.shape[0] != X.shape[0] or Ah.shape != As.shape or Ah.shape != (B.shape[1], X.shape[1]):
        raise DimensionMismatch(
            f"Xbar {X.shape}, B {B.shape}, A_hat {Ah.shape}, A_star {As.shape} do not conform"
        )
    update = (X - B @ Ah) @ Ah.T - (X - B @ As) @ As.T
    return B - alpha * update


def regularized_error(components: Sequence, bases: Sequence, A_blocks: Sequence, lam: float, mode) -> float:
    """Sum over appliances of 0.5 ||X_k - B_k A_k||_F^2 + penalty(A_k)."""
    total = 0.0
    for X, B, A in zip(components, bases, A_blocks):
        X, B, A = _values(X), _values(B), _values(A)
        R = X - B @ A
        total += 0.5 * float((R * R).sum()) + penalty(A, lam, mode)
    return total


def train_ddsc(
    dataset: ApplianceDataset,
    recon_bases: Sequence[Dictionary],
    A_star,
    config: TrainConfig,
    log: Optional[LogFn] = None,
    rng: Optional[np.random.Generator] = None,
) -> tuple[list[Dictionary], list[float]]:
    """Perceptron training of the discriminative dictionaries.

    ``A_star`` is either the stacked target activations or a list of
    per-appliance blocks. The error that drives early stopping reconstructs
    the true components with the frozen reconstruction dictionaries from
    activations inferred on the aggregate; the variant using the
    discriminative dictionaries is logged alongside. Training stops after
    ``dd_max_iters`` evaluations or ``patience`` evaluations without
    improvement, and the dictionaries with the lowest error are returned.
    """
    sizes = [b.n for b in recon_bases]
    if not isinstance(A_star, np.ndarray) and not hasattr(A_star, "values"):
        A_star = np.vstack([_values(a) for a in A_star])
    A_star = _values(A_star)
    if A_star.shape != (sum(sizes), dataset.M):
        raise DimensionMismatch(f"A_star has shape {A_star.shape}, expected {(sum(sizes), dataset.M)}")
    if rng is None:
        rng = make_rng(config.seed, 1 << 20)
    Xbar = dataset.aggregate.values
    comps = [c.values for c in dataset.components]
    lam, mode = config.lam, config.penalty_mode

    disc = list(recon_bases)
    best_err, best = math.inf, disc
    trace: list[float] = []
    stale = 0
    for it in range(config.dd_max_iters):
        A_blocks = disaggregation_solve(Xbar, disc, config)
        err = regularized_error(comps, recon_bases, A_blocks, lam, mode)
        err_disc = regularized_error(comps, disc, A_blocks, lam, mode)
        trace.append(err)
        if err < best_err:
            best_err, best, stale = err, disc, 0
        else:
            stale += 1
        record = {"iteration": it, "error_recon": err, "error_disc": err_disc, "update_norm": None}
        if stale >= config.patience or it == config.dd_max_iters - 1:
            if log:
                log(record)
            break
        B = concat_bases(disc)
        alpha = config.alpha / (1.0 + config.alpha_decay * it)
        stepped = perceptron_step(Xbar, B, np.vstack([a.values for a in A_blocks]), A_star, alpha)
        record["update_norm"] = float(np.sqrt(((stepped - B) ** 2).sum()))
        disc = [Dictionary(_project(blk, rng)) for blk in np.split(stepped, np.cumsum(sizes)[:-1], axis=1)]
        if log:
            log(record)
    return list(best), trace
