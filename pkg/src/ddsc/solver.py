"""Inner optimizers: non-negative sparse activation solve and dictionary update.

The activation objective, solved independently per column, is

    0.5 * ||X - B A||_F^2 + lam * sum(A)        (L1, valid because A >= 0)
    0.5 * ||X - B A||_F^2 + lam * ||A||_F^2     (SquaredFrobenius)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numba
import numpy as np

from ddsc.core import NORM_SLACK, Activations, Dictionary, PenaltyMode
from ddsc.errors import DimensionMismatch, NegativeEntry, NonFiniteInput

MU_EPS = 1e-12

ArrayOrDict = Union[np.ndarray, Dictionary]


def make_rng(seed: int = 0, *stream: int) -> np.random.Generator:
    """Counter-based (Philox) generator; ``stream`` selects an independent substream."""
    if not stream:
        return np.random.Generator(np.random.Philox(int(seed)))
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_objective: float
    converged: bool
    kkt_residual: float = 0.0
    objective_trace: tuple = field(default=(), repr=False)


def _values(x) -> np.ndarray:
    if isinstance(x, (Dictionary, Activations)):
        return x.values
    if hasattr(x, "values") and isinstance(getattr(x, "values"), np.ndarray):
        return x.values
    return np.asarray(x, dtype=np.float64)


def _check_matrix(arr, name: str, nonneg: bool = True) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains NaN or infinite entries")
    if nonneg and arr.size and arr.min() < 0:
        raise NegativeEntry(f"{name} has negative entries")
    return arr


def penalty(A: np.ndarray, lam: float, mode: PenaltyMode) -> float:
    if PenaltyMode(mode) is PenaltyMode.L1:
        return lam * float(A.sum())
    return lam * float((A * A).sum())


def sparse_objective(X, B, A, lam: float, mode: PenaltyMode = PenaltyMode.L1) -> float:
    X, B, A = _values(X), _values(B), _values(A)
    R = X - B @ A
    return 0.5 * float((R * R).sum()) + penalty(A, lam, mode)


def kkt_residual(X, B, A, lam: float, mode: PenaltyMode = PenaltyMode.L1) -> np.ndarray:
    """Per-entry violation of the non-negative optimality conditions."""
    X, B, A = _values(X), _values(B), _values(A)
    grad = B.T @ (B @ A - X)
    grad = grad + (lam if PenaltyMode(mode) is PenaltyMode.L1 else 2.0 * lam * A)
    return np.where(A > 0, np.abs(grad), np.maximum(-grad, 0.0))


@numba.njit(cache=True)
def _cd_kernel(X, B, G, A, lam, frob, max_iters, tol, sweeps, converged):
    # Each column is processed start to finish with its own convergence test,
    # so any column partition yields bit-identical results.
    T, M = X.shape
    n = B.shape[1]
    c = np.empty(n)
    q = np.empty(n)
    for m in range(M):
        xx = 0.0
        for t in range(T):
            xx += X[t, m] * X[t, m]
        for j in range(n):
            s = 0.0
            for t in range(T):
                s += B[t, j] * X[t, m]
            c[j] = s
        sweeps[m] = 0
        converged[m] = False
        for it in range(max_iters):
            for i in range(n):
                s = 0.0
                for j in range(n):
                    s += G[i, j] * A[j, m]
                q[i] = c[i] - s
            max_delta = 0.0
            for j in range(n):
                gjj = G[j, j]
                old = A[j, m]
                if gjj <= 0.0:
                    new = 0.0
                else:
                    z = q[j] + gjj * old
                    if frob:
                        new = z / (gjj + 2.0 * lam) if z > 0.0 else 0.0
                    else:
                        new = (z - lam) / gjj if z > lam else 0.0
                d = new - old
                if d != 0.0:
                    A[j, m] = new
                    for i in range(n):
                        q[i] -= G[i, j] * d
                    if abs(d) > max_delta:
                        max_delta = abs(d)
            sweeps[m] = it + 1
            # KKT: zero entries need gradient >= -tol, positive ones |gradient| <= tol
            kkt = 0.0
            for j in range(n):
                g = -q[j] + (2.0 * lam * A[j, m] if frob else lam)
                v = abs(g) if A[j, m] > 0.0 else -g
                if v > kkt:
                    kkt = v
            if kkt <= tol or max_delta == 0.0:
                converged[m] = True
                break


def solve_activations(
    X,
    B: ArrayOrDict,
    lam: float,
    penalty_mode: PenaltyMode = PenaltyMode.L1,
    max_iters: int = 500,
    tol: float = 1e-6,
    A_init=None,
) -> tuple[Activations, SolveReport]:
    """Cyclic coordinate descent for the non-negative sparse coding problem.

    Coordinates are visited in ascending order with an exact closed-form
    minimization per coordinate. A column stops once its KKT residual is at
    most ``tol`` (or a sweep leaves it exactly unchanged). ``A_init``
    warm-starts the iterate (zeros by default).
    """
    mode = PenaltyMode(penalty_mode)
    X = _check_matrix(_values(X), "X")
    B = _check_matrix(_values(B), "B")
    if B.shape[0] != X.shape[0]:
        raise DimensionMismatch(f"X has {X.shape[0]} rows, B has {B.shape[0]}")
    if not np.isfinite(lam) or lam < 0:
        raise NonFiniteInput("lambda must be finite and >= 0")
    n, M = B.shape[1], X.shape[1]
    if A_init is None:
        A = np.zeros((n, M))
    else:
        A = np.array(_check_matrix(_values(A_init), "A_init"), dtype=np.float64, copy=True)
        if A.shape != (n, M):
            raise DimensionMismatch(f"A_init has shape {A.shape}, expected {(n, M)}")
    X = np.ascontiguousarray(X)
    B = np.ascontiguousarray(B)
    G = B.T @ B
    sweeps = np.zeros(M, dtype=np.int64)
    conv = np.zeros(M, dtype=np.bool_)
    _cd_kernel(X, B, G, A, float(lam), mode is PenaltyMode.SQUARED_FROBENIUS, int(max_iters), float(tol), sweeps, conv)
    A = np.maximum(A, 0.0)
    report = SolveReport(
        iterations=int(sweeps.max(initial=0)),
        final_objective=sparse_objective(X, B, A, lam, mode),
        converged=bool(conv.all()),
        kkt_residual=float(kkt_residual(X, B, A, lam, mode).max(initial=0.0)),
    )
    return Activations(A), report


def _project(B_raw: np.ndarray, rng: Optional[np.random.Generator]) -> np.ndarray:
    B = np.maximum(np.array(B_raw, dtype=np.float64, copy=True), 0.0)
    norms = np.sqrt((B * B).sum(axis=0))
    big = norms > 1.0 + NORM_SLACK
    B[:, big] /= norms[big]
    dead = np.flatnonzero(norms == 0.0)
    if dead.size:
        if rng is None:
            rng = make_rng(0)
        fresh = 1.0 - rng.random((B.shape[0], dead.size))  # uniform on (0, 1]
        B[:, dead] = fresh / np.sqrt((fresh * fresh).sum(axis=0))
    return B


def project_dictionary(B_raw, rng: Optional[np.random.Generator] = None) -> Dictionary:
    """Clamp negatives, shrink columns with norm above 1, re-seed dead columns.

    Columns already inside the unit ball are left untouched, which makes the
    projection idempotent bit for bit.
    """
    B = _check_matrix(_values(B_raw), "B_raw", nonneg=False)
    return Dictionary(_project(B, rng))


def update_dictionary(
    X,
    A,
    B_init: ArrayOrDict,
    max_iters: int = 500,
    tol: float = 1e-6,
    rng: Optional[np.random.Generator] = None,
) -> tuple[Dictionary, SolveReport]:
    """Projected multiplicative update for B with A held fixed.

    Each step computes ``B * (X A^T) / (B A A^T + eps)``, projects it onto the
    feasible set and then moves from the current B toward that candidate by
    the exact line-search step in [0, 1]. The feasible set is convex, so every
    accepted iterate stays feasible and the objective never increases.
    """
    X = _check_matrix(_values(X), "X")
    A = _check_matrix(_values(A), "A")
    B = np.array(_check_matrix(_values(B_init), "B_init"), dtype=np.float64, copy=True)
    if X.shape[0] != B.shape[0] or A.shape[0] != B.shape[1] or A.shape[1] != X.shape[1]:
        raise DimensionMismatch(f"X {X.shape}, B {B.shape}, A {A.shape} do not conform")

    def objective(Bm):
        R = X - Bm @ A
        return 0.5 * float((R * R).sum())

    f = objective(B)
    trace = [f]
    active = A.any(axis=1)
    if not active.any():
        return Dictionary(B), SolveReport(1, f, True, objective_trace=tuple(trace))

    AAt = A @ A.T
    XAt = X @ A.T
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        cand = B.copy()
        den = B[:, active] @ AAt[np.ix_(active, active)] + MU_EPS
        cand[:, active] = B[:, active] * XAt[:, active] / den
        cand = _project(cand, rng)
        D = cand - B
        DA = D @ A
        dd = float((DA * DA).sum())
        if dd == 0.0:
            # the move only touches columns with zero activations: free
            B_next = cand
        else:
            R = X - B @ A
            step = float((R * DA).sum()) / dd
            if step <= 0.0:
                converged = True
                break
            B_next = cand if step >= 1.0 else _project(B + step * D, rng)
        f_next = objective(B_next)
        if f_next > f:
            converged = True
            break
        delta = float(np.abs(B_next - B).max())
        rel = (f - f_next) / max(f, 1e-300)
        B, f = B_next, f_next
        trace.append(f)
        if delta < tol or rel < tol:
            converged = True
            break
    return Dictionary(B), SolveReport(it, f, converged, objective_trace=tuple(trace))
