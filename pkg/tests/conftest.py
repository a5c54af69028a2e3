import numpy as np
import pytest

from ddsc.core import Dictionary, DisaggModel, TrainConfig, make_dataset


def unit_columns(M):
    M = np.asarray(M, dtype=float)
    return M / np.linalg.norm(M, axis=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def block_model():
    """Two appliances with disjoint row supports (rows 0-1 and rows 2-3), T=4."""
    B1 = unit_columns([[1.0, 0.2], [0.5, 1.0], [0, 0], [0, 0]])
    B2 = unit_columns([[0, 0], [0, 0], [1.0, 0.3], [0.1, 1.0]])
    cfg = TrainConfig(n_bases=2, lam=0.0, tol=1e-12, solver_max_iters=100_000)
    return DisaggModel(("a", "b"), (Dictionary(B1), Dictionary(B2)), (Dictionary(B1), Dictionary(B2)), cfg)


@pytest.fixture
def block_dataset(block_model, rng):
    a1 = rng.random((2, 6)) + 0.1
    a2 = rng.random((2, 6)) + 0.1
    X1 = block_model.recon_bases[0].values @ a1
    X2 = block_model.recon_bases[1].values @ a2
    return make_dataset(("a", "b"), [X1, X2], house_ids=[f"h{m}" for m in range(6)]), a1, a2


MONDAY = 1704067200  # 2024-01-01T00:00:00Z
CHANNEL_MAP = {"ac": "air", "heat": "furnace", "dw": "dishwasher", "fridge": "refrigerator", "misc": "other"}


@pytest.fixture
def make_house():
    """Factory for raw house tables with hourly kWh readings starting on a Monday."""
    from ddsc.dataio import RawReadingsTable

    def build(house_id, rng, hours=168, start=MONDAY, mains=False, unit="kWh", drop=()):
        ts = start + 3600 * np.arange(hours)
        chans = {c: np.round(rng.random(hours) * 2, 3) for c in CHANNEL_MAP}
        if mains:
            chans["mains"] = sum(chans.values()) + 0.25
        for h in drop:
            for v in chans.values():
                v[h] = np.nan
        return RawReadingsTable(house_id, ts, chans, unit, 3600)

    return build
