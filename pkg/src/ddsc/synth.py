"""Seeded synthetic households and a brute-force activation oracle.

Five appliance categories with structurally distinct hourly signatures:

* refrigerator -- compressor duty cycle with a short period and jittered amplitude
* dishwasher   -- one or two isolated spikes per day
* air          -- afternoon blocks gated by a diurnal sinusoid, scaled by season
* furnace      -- night/morning blocks, active when air is idle, scaled by winter
* other        -- smoothed noise floor
"""

from __future__ import annotations

import copy
import json
from typing import Any, Optional

import numba
import numpy as np

from ddsc.core import ApplianceDataset, PenaltyMode, make_dataset
from ddsc.errors import DimensionTooLarge, InvalidSpec
from ddsc.solver import make_rng

LABELS = ("air", "furnace", "dishwasher", "refrigerator", "other")

DEFAULT_PROFILE: dict[str, Any] = {
    "hours": 168,
    "refrigerator": {"period": 2, "on_kwh": 0.15, "off_kwh": 0.03, "jitter": 0.2},
    "dishwasher": {"kwh": 1.2, "min_per_day": 1, "max_per_day": 2, "jitter": 0.3},
    "air": {"kwh": 2.0, "gate": 0.3, "peak_hour": 15, "summer_weight": 1.0},
    "furnace": {"kwh": 1.5, "gate": 0.3, "peak_hour": 3},
    "other": {"base_kwh": 0.3, "noise_kwh": 0.3, "smooth_hours": 6},
    "house_scale": [0.6, 1.4],
}


def load_profile(spec: Optional[dict] = None) -> dict:
    """Merge a (possibly partial) profile over the defaults and validate it."""
    prof = copy.deepcopy(DEFAULT_PROFILE)
    spec = {} if spec is None else spec
    if not isinstance(spec, dict):
        raise InvalidSpec("profile spec must be a JSON object")
    for key, value in spec.items():
        if key not in prof:
            raise InvalidSpec(f"unknown profile key {key!r}")
        if isinstance(prof[key], dict):
            if not isinstance(value, dict):
                raise InvalidSpec(f"profile key {key!r} must be an object")
            for sub, v in value.items():
                if sub not in prof[key]:
                    raise InvalidSpec(f"unknown profile key {key}.{sub}")
                prof[key][sub] = v
        else:
            prof[key] = value
    try:
        hours = int(prof["hours"])
        lo, hi = (float(v) for v in prof["house_scale"])
        numbers = [float(v) for cat in LABELS for v in prof[cat].values()]
    except (TypeError, ValueError) as exc:
        raise InvalidSpec(f"non-numeric profile value: {exc}") from None
    if hours < 24 or hours % 24:
        raise InvalidSpec("hours must be a positive multiple of 24")
    if not 0 < lo <= hi:
        raise InvalidSpec("house_scale must be 0 < low <= high")
    if any(not np.isfinite(v) or v < 0 for v in numbers):
        raise InvalidSpec("profile values must be finite and non-negative")
    if int(prof["refrigerator"]["period"]) < 2:
        raise InvalidSpec("refrigerator.period must be >= 2")
    if int(prof["dishwasher"]["min_per_day"]) > int(prof["dishwasher"]["max_per_day"]):
        raise InvalidSpec("dishwasher.min_per_day exceeds max_per_day")
    return prof


def load_profile_file(path) -> dict:
    try:
        with open(path) as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidSpec(f"cannot read profile spec {path}: {exc}") from None
    return load_profile(spec)


def _smooth(x: np.ndarray, width: int) -> np.ndarray:
    if width <= 1:
        return x
    kernel = np.ones(width) / width
    pad = np.concatenate([x[-width:], x])
    return np.convolve(pad, kernel, mode="full")[width:width + x.size]


def _week(prof: dict, house: dict, season: float, rng: np.random.Generator) -> dict[str, np.ndarray]:
    T = int(prof["hours"])
    days = T // 24
    hour = np.arange(T) % 24
    s = house["scale"]

    fr = prof["refrigerator"]
    period = int(fr["period"])
    on = ((np.arange(T) + house["fridge_phase"]) % period) == 0
    amp = fr["on_kwh"] * (1.0 + fr["jitter"] * (rng.random(T) - 0.5))
    fridge = np.where(on, amp, fr["off_kwh"])

    dw = prof["dishwasher"]
    dish = np.zeros(T)
    for d in range(days):
        for _ in range(int(rng.integers(int(dw["min_per_day"]), int(dw["max_per_day"]) + 1))):
            t = d * 24 + int(rng.choice(house["dish_hours"]))
            dish[t] += dw["kwh"] * (1.0 + dw["jitter"] * (rng.random() - 0.5))

    ac = prof["air"]
    daily = np.cos(2 * np.pi * (hour - ac["peak_hour"] - house["shift"]) / 24)
    day_var = 1.0 + 0.3 * (rng.random(days) - 0.5)
    gate = daily > ac["gate"]
    air = np.where(gate, ac["kwh"] * s * season * ac["summer_weight"] * daily, 0.0) * np.repeat(day_var, 24)

    fu = prof["furnace"]
    fdaily = np.cos(2 * np.pi * (hour - fu["peak_hour"] - house["shift"]) / 24)
    fgate = (fdaily > fu["gate"]) & ~gate
    furnace = np.where(fgate, fu["kwh"] * s * (1.0 - season) * fdaily, 0.0) * np.repeat(day_var[::-1], 24)

    ot = prof["other"]
    other = ot["base_kwh"] * s + _smooth(ot["noise_kwh"] * rng.gamma(2.0, 0.5, T), int(ot["smooth_hours"]))

    return {
        "air": air,
        "furnace": furnace,
        "dishwasher": dish,
        "refrigerator": fridge * house["fridge_scale"],
        "other": other,
    }


def generate(profile_spec: Optional[dict], houses: int, weeks: int = 1, seed: int = 0) -> ApplianceDataset:
    """Deterministic K=5 dataset with ``houses * weeks`` weekly columns.

    Each house draws its own scale, daily phase shift, refrigerator phase and
    dishwasher habits; each week draws a season in [0, 1] (1 = summer).
    Columns are ordered house-major and labelled with house ids.
    """
    prof = load_profile(profile_spec)
    if int(houses) < 2:
        raise InvalidSpec("need at least 2 houses")
    if int(weeks) < 1:
        raise InvalidSpec("need at least 1 week")
    rng = make_rng(seed)
    lo, hi = prof["house_scale"]
    cols: dict[str, list[np.ndarray]] = {k: [] for k in LABELS}
    ids = []
    for h in range(int(houses)):
        house = {
            "scale": lo + (hi - lo) * rng.random(),
            "shift": int(rng.integers(-2, 3)),
            "fridge_phase": int(rng.integers(0, int(prof["refrigerator"]["period"]))),
            "fridge_scale": 0.8 + 0.4 * rng.random(),
            "dish_hours": rng.choice(np.arange(7, 23), size=3, replace=False),
        }
        for _ in range(int(weeks)):
            season = float(rng.random())
            week = _week(prof, house, season, rng)
            for k in LABELS:
                cols[k].append(np.maximum(week[k], 0.0))
            ids.append(f"house_{h:03d}")
    comps = [np.column_stack(cols[k]) for k in LABELS]
    return make_dataset(LABELS, comps, house_ids=ids)


ORACLE_MAX_T = 8
ORACLE_MAX_N = 12
ORACLE_ITERS = 100_000


@numba.njit(cache=True)
def _pgd(G, C, lam, frob, L, iters):
    n, M = C.shape
    A = np.zeros((n, M))
    grad = np.zeros((n, M))
    for k in range(iters):
        # diminishing step from 1.9/L down toward 1/L; any step below 2/L converges
        step = (1.0 + 0.9 / (k + 1.0)) / L
        for i in range(n):
            for m in range(M):
                s = -C[i, m]
                for j in range(n):
                    s += G[i, j] * A[j, m]
                grad[i, m] = s + (2.0 * lam * A[i, m] if frob else lam)
        for i in range(n):
            for m in range(M):
                v = A[i, m] - step * grad[i, m]
                A[i, m] = v if v > 0.0 else 0.0
    return A


def oracle_solve(X, B, lam: float, penalty_mode=PenaltyMode.L1, iters: int = ORACLE_ITERS) -> np.ndarray:
    """Projected gradient descent on the full activation problem.

    Deliberately simple and independent of the coordinate-descent solver;
    only for small instances.
    """
    X = np.asarray(X, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    if X.shape[0] > ORACLE_MAX_T or X.shape[1] > ORACLE_MAX_T or B.shape[1] > ORACLE_MAX_N:
        raise DimensionTooLarge(f"oracle limited to X <= 8x8 and B <= 8x12, got X {X.shape}, B {B.shape}")
    if B.shape[0] != X.shape[0]:
        raise DimensionTooLarge(f"row mismatch: X {X.shape}, B {B.shape}")
    frob = PenaltyMode(penalty_mode) is PenaltyMode.SQUARED_FROBENIUS
    G = B.T @ B
    C = B.T @ X
    L = float(np.linalg.eigvalsh(G).max()) + (2.0 * lam if frob else 0.0)
    if L <= 0.0:
        return np.zeros((B.shape[1], X.shape[1]))
    return _pgd(G, C, float(lam), frob, L, int(iters))
