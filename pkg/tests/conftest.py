import json

import numpy as np
import pandas as pd
import pytest
from hypothesis import HealthCheck, settings

from nordepf import features, panel, synthetic
from nordepf.panel import Availability, ColumnMeta, Frequency, RawSeries

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def hourly_meta(avail="day-ahead"):
    return ColumnMeta(Frequency.HOURLY, Availability(avail))


def make_raw(name, index, values, frequency="hourly", availability="day-ahead"):
    meta = ColumnMeta(Frequency(frequency), Availability(availability))
    return RawSeries(name, meta, pd.Series(np.asarray(values, dtype=float), index=index, name=name))


def toy_panel(days=40, seed=0, start="2021-01-04T00:00Z"):
    """Finalized panel with a price, two hourly columns, daily TTF and weekly reservoir."""
    rng = np.random.default_rng(seed)
    idx = pd.date_range(start, periods=24 * days, freq="h", tz="UTC")
    n = len(idx)
    price = 50 + 10 * np.sin(2 * np.pi * np.arange(n) / 24) + rng.normal(0, 2, n)
    days_idx = pd.date_range(idx[0], periods=days, freq="D", tz="UTC")
    weeks_idx = pd.date_range(idx[0], periods=days // 7 + 1, freq="7D", tz="UTC")
    series = [
        make_raw("temperature", idx, rng.normal(0, 5, n)),
        make_raw("load_forecast", idx, 4000 + rng.normal(0, 100, n)),
        make_raw("ttf", days_idx, 40 + np.cumsum(rng.normal(0, 1, days)), "daily"),
        make_raw("reservoir_level", weeks_idx, 60 + rng.normal(0, 3, len(weeks_idx)), "weekly"),
    ]
    pan, _ = panel.build_panel("NO1", make_raw("price", idx, price), series)
    return pan


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def small_panel():
    return toy_panel()


@pytest.fixture
def small_matrix(small_panel):
    spec = features.FeatureSpec.default(small_panel)
    return features.assemble_matrix(small_panel, spec)


SMALL_SPLIT = {
    "train": ["2021-01-08T00:00Z", "2021-03-01T00:00Z"],
    "validation": ["2021-03-01T00:00Z", "2021-04-01T00:00Z"],
    "test": ["2021-04-01T00:00Z", "2021-04-29T00:00Z"],
}


def write_small_experiment(root, zones=("NO1", "NO2"), seed=0):
    """Four months of synthetic data and a fast config (short GBDT, 4-week backtest)."""
    data = root / "data"
    cfg = synthetic.SyntheticConfig(start="2021-01-01T00:00Z", end="2021-05-01T00:00Z", seed=seed)
    for z in zones:
        synthetic.write_zone(z, data, cfg)
    exp = synthetic.default_experiment("data", list(zones), seed=seed)
    exp["panel"] = {"start": cfg.start, "end": cfg.end, "sparse_threshold": 0.5}
    exp["split"] = SMALL_SPLIT
    exp["models"] = {
        "naive-24h": {}, "naive-168h": {}, "ridge": {},
        "gbdt": {"max_rounds": 40, "early_stopping_patience": 10, "num_leaves": 15},
    }
    exp["backtest"] = {"step": 168, "steps_per_zone": 4, "refit_mode": "frozen-model", "reference": "naive-24h"}
    exp["windows"] = {
        "early": ["2021-01-08T00:00Z", "2021-02-01T00:00Z"],
        "late": ["2021-02-01T00:00Z", "2021-03-01T00:00Z"],
        "all": ["2021-01-08T00:00Z", "2021-03-01T00:00Z"],
    }
    path = root / "experiment.json"
    path.write_text(json.dumps(exp, indent=2))
    return path


@pytest.fixture(scope="session")
def small_experiment(tmp_path_factory):
    return write_small_experiment(tmp_path_factory.mktemp("small"))
