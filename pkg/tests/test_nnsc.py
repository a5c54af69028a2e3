import numpy as np
import pytest

from ddsc.core import NORM_SLACK, Dictionary, TrainConfig
from ddsc.nnsc import compute_target_activations, train_all, train_nnsc
from ddsc.solver import kkt_residual, sparse_objective
from ddsc.synth import generate, oracle_solve


@pytest.fixture
def rank_one():
    b = np.array([0.2, 0.5, 0.1, 0.8])
    b /= np.linalg.norm(b)
    a = np.array([1.5, 0.3, 2.0])
    return b, a, np.outer(b, a)


def test_rank_one_recovery(rank_one):
    b, a, X = rank_one
    cfg = TrainConfig(n_bases=1, lam=0.0, tol=1e-12, solver_max_iters=5000)
    B, A, trace = train_nnsc(X, cfg)
    assert np.linalg.norm(X - B.values @ A.values) / np.linalg.norm(X) <= 1e-3
    assert np.diff(trace).max() <= 1e-8


def test_target_activations_recover_generator(rank_one):
    b, a, X = rank_one
    cfg = TrainConfig(n_bases=1, lam=0.0, tol=1e-13, solver_max_iters=20000, nnsc_max_iters=200)
    B, _, _ = train_nnsc(X, cfg)
    A_star = compute_target_activations(X, B, cfg).values
    # B has unit norm and is aligned with b, so the scale lands entirely in A*
    np.testing.assert_allclose(A_star[0], a, atol=1e-6)


def test_zero_matrix():
    cfg = TrainConfig(n_bases=3, lam=0.1)
    B, A, trace = train_nnsc(np.zeros((5, 4)), cfg)
    assert not A.values.any()
    assert trace[0] == 0.0 and trace[1] == 0.0


def test_overcomplete_trace_sparsity_and_kkt():
    rng = np.random.default_rng(8)
    X = rng.random((8, 6))
    cfg = TrainConfig(n_bases=12, lam=0.05, tol=1e-10, solver_max_iters=100_000, nnsc_max_iters=60, seed=4)
    B, A, trace = train_nnsc(X, cfg)
    assert np.diff(trace).max() <= 1e-8
    assert np.linalg.norm(B.values, axis=0).max() <= 1 + NORM_SLACK
    assert B.values.min() >= 0 and A.values.min() >= 0
    assert kkt_residual(X, B, A, cfg.lam).max() <= 1e-9
    assert ((A.values == 0).sum(axis=0) >= 1).all()
    ref = oracle_solve(X, B.values, cfg.lam)
    assert sparse_objective(X, B, ref, cfg.lam) >= sparse_objective(X, B, A, cfg.lam) - 1e-8
    np.testing.assert_allclose(A.values, ref, atol=1e-6)


def test_huge_lambda_gives_zero_targets():
    rng = np.random.default_rng(0)
    X = rng.random((6, 5))
    B = Dictionary(rng.random((6, 4)) / 3)
    assert not compute_target_activations(X, B, TrainConfig(lam=1e6)).values.any()


def test_orthonormal_dictionary_closed_form():
    rng = np.random.default_rng(1)
    B = np.zeros((6, 3))
    B[[0, 1], 0] = [0.6, 0.8]
    B[[2, 3, 4], 1] = np.array([1.0, 2.0, 2.0]) / 3
    B[5, 2] = 1.0
    X = rng.random((6, 4))
    A = compute_target_activations(X, Dictionary(B), TrainConfig(lam=0.0, tol=1e-14)).values
    np.testing.assert_allclose(A, np.maximum(B.T @ X, 0), rtol=0, atol=1e-9)


def test_overcomplete_beyond_T_and_M():
    rng = np.random.default_rng(2)
    X = rng.random((4, 3))
    B, A, _ = train_nnsc(X, TrainConfig(n_bases=20, lam=0.01, nnsc_max_iters=10))
    assert B.values.shape == (4, 20) and A.values.shape == (20, 3)


def test_same_seed_bit_identical():
    rng = np.random.default_rng(3)
    X = rng.random((10, 5))
    cfg = TrainConfig(n_bases=6, lam=0.05, nnsc_max_iters=15, seed=99)
    B1, A1, _ = train_nnsc(X, cfg)
    B2, A2, _ = train_nnsc(X, cfg)
    assert B1.values.tobytes() == B2.values.tobytes()
    assert A1.values.tobytes() == A2.values.tobytes()


def test_train_all_independent_of_worker_count():
    ds = generate(None, houses=3, seed=1)
    cfg = TrainConfig(n_bases=4, lam=0.1, nnsc_max_iters=5, seed=2)
    serial = train_all(ds, cfg, workers=1)
    threaded = train_all(ds, cfg, workers=4)
    for a, b in zip(serial[0] + serial[1], threaded[0] + threaded[1]):
        assert a.values.tobytes() == b.values.tobytes()
