import numpy as np
import pytest

from ddsc.core import NORM_SLACK, Dictionary, TrainConfig
from ddsc.discriminative import (
    disaggregation_solve,
    perceptron_step,
    regularized_error,
    train_ddsc,
)
from ddsc.errors import DimensionMismatch
from ddsc.nnsc import compute_target_activations, stack, train_all
from ddsc.synth import generate


def test_single_appliance_matches_target_solve(rng):
    X = rng.random((6, 4))
    B = Dictionary(rng.random((6, 5)) / 3)
    cfg = TrainConfig(lam=0.05)
    (blk,) = disaggregation_solve(X, [B], cfg)
    assert blk.values.tobytes() == compute_target_activations(X, B, cfg).values.tobytes()


def test_disjoint_supports_are_separated(block_model, block_dataset):
    ds, a1, a2 = block_dataset
    b1, b2 = disaggregation_solve(ds.aggregate, block_model.recon_bases, block_model.config)
    np.testing.assert_allclose(b1.values, a1, atol=1e-6)
    np.testing.assert_allclose(b2.values, a2, atol=1e-6)


def test_zero_aggregate_zero_activations(block_model):
    blocks = disaggregation_solve(np.zeros((4, 3)), block_model.recon_bases, block_model.config)
    assert all(not b.values.any() for b in blocks)


def test_perceptron_hand_example():
    out = perceptron_step([[1.0], [0.0]], [[1.0], [0.0]], [[2.0]], [[1.0]], 0.1)
    # residuals: Xbar - B*2 = [-1, 0], Xbar - B*1 = [0, 0]
    # update = B - 0.1 * ([-1, 0] * 2 - 0) = [1.2, 0]
    expected = np.array([[1.0], [0.0]]) - 0.1 * (np.array([[-1.0], [0.0]]) * 2.0)
    np.testing.assert_array_equal(out, expected)
    np.testing.assert_allclose(out, [[1.2], [0.0]], rtol=0, atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_perceptron_cancels_when_activations_match(seed):
    rng = np.random.default_rng(seed)
    X, B, A = rng.random((7, 4)), rng.random((7, 5)), rng.random((5, 4))
    assert perceptron_step(X, B, A, A.copy(), 0.3).tobytes() == B.tobytes()


def test_perceptron_zero_step_is_identity(rng):
    X, B = rng.random((5, 3)), rng.random((5, 2))
    assert perceptron_step(X, B, rng.random((2, 3)), rng.random((2, 3)), 0.0).tobytes() == B.tobytes()


def test_perceptron_dimension_checks(rng):
    with pytest.raises(DimensionMismatch):
        perceptron_step(rng.random((5, 3)), rng.random((5, 2)), rng.random((2, 3)), rng.random((3, 3)), 0.1)


def test_training_with_exact_targets_returns_recon_bases(block_model, block_dataset):
    ds, a1, a2 = block_dataset
    cfg = block_model.config.replace(alpha=0.5, dd_max_iters=20)
    A_star = stack(disaggregation_solve(ds.aggregate, block_model.recon_bases, cfg))
    disc, trace = train_ddsc(ds, block_model.recon_bases, A_star, cfg)
    for d, b in zip(disc, block_model.recon_bases):
        assert d.values.tobytes() == b.values.tobytes()
    assert len(trace) == cfg.patience + 1


@pytest.fixture(scope="module")
def small_run():
    ds = generate(None, houses=6, seed=3)
    cfg = TrainConfig(n_bases=6, lam=0.1, alpha=5e-4, nnsc_max_iters=30, dd_max_iters=25, seed=3)
    recon, targets, _ = train_all(ds, cfg, workers=1)
    return ds, cfg, recon, stack(targets)


def test_training_improves_error_and_keeps_constraints(small_run):
    ds, cfg, recon, A_star = small_run
    records = []
    disc, trace = train_ddsc(ds, recon, A_star, cfg, log=records.append)
    assert min(trace) <= trace[0]
    assert len(records) == len(trace)
    assert {"iteration", "error_recon", "error_disc", "update_norm"} <= set(records[0])
    best_blocks = disaggregation_solve(ds.aggregate, disc, cfg)
    best = regularized_error([c.values for c in ds.components], recon, best_blocks, cfg.lam, cfg.penalty_mode)
    assert best == min(trace)
    for d in disc:
        assert d.values.min() >= 0
        assert np.linalg.norm(d.values, axis=0).max() <= 1 + NORM_SLACK


def test_huge_step_still_returns_best_seen(small_run):
    ds, cfg, recon, A_star = small_run
    cfg = cfg.replace(alpha=1e3, dd_max_iters=15)
    disc, trace = train_ddsc(ds, recon, A_star, cfg)
    blocks = disaggregation_solve(ds.aggregate, disc, cfg)
    got = regularized_error([c.values for c in ds.components], recon, blocks, cfg.lam, cfg.penalty_mode)
    assert got == min(trace)
    assert max(trace) > trace[0]
    if trace[-1] > min(trace):
        # the last iterate is worse; the best one must come back instead
        assert got < trace[-1]


def test_tiny_step_leaves_error_unchanged(small_run):
    ds, cfg, recon, A_star = small_run
    cfg = cfg.replace(alpha=1e-18, dd_max_iters=2)
    _, trace = train_ddsc(ds, recon, A_star, cfg)
    assert abs(trace[1] - trace[0]) <= 1e-9
