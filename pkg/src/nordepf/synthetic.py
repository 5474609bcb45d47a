"""Seeded synthetic zone snapshots for tests, demos and the end-to-end check.

The price follows a seasonal AR(24) process,

    p_t = phi * p_{t-24} + s(hour, weekday) + eps_t,

with the seasonal term driven by Europe/Oslo local time and heavy-tailed
Student-t shocks. Exogenous sources mimic the real inputs in frequency and
availability (hourly weather and load/wind forecasts, daily TTF closes,
weekly reservoir levels, a post-delivery load actual and a sparse column) but
carry no signal, so they act as decoys in ablations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .features import LOCAL_TZ
from .panel import ZoneId

HOURLY_FILE = "{zone}_hourly.csv"
DAILY_FILE = "{zone}_daily.csv"
WEEKLY_FILE = "{zone}_weekly.csv"


@dataclass(frozen=True)
class SyntheticConfig:
    start: str = "2021-01-01T00:00Z"
    end: str = "2024-01-01T00:00Z"
    phi: float = 0.9
    noise_scale: float = 1.0
    noise_df: float = 3.0
    level: float = 5.0
    seed: int = 0


def seasonal(hour: np.ndarray, weekday: np.ndarray) -> np.ndarray:
    """Morning and evening peaks on working days, a flat midday hump at weekends."""
    h = hour.astype(float)
    workday = 1.5 + 3.0 * np.exp(-0.5 * ((h - 8) / 1.5) ** 2) + 4.0 * np.exp(-0.5 * ((h - 18) / 2.0) ** 2)
    weekend = -1.5 + 1.5 * np.exp(-0.5 * ((h - 13) / 3.0) ** 2)
    return np.where(weekday >= 5, weekend, workday)


def simulate_price(index: pd.DatetimeIndex, cfg: SyntheticConfig, rng: np.random.Generator) -> np.ndarray:
    local = index.tz_convert(LOCAL_TZ)
    s = cfg.level + seasonal(local.hour.to_numpy(), local.dayofweek.to_numpy())
    eps = cfg.noise_scale * rng.standard_t(cfg.noise_df, size=len(index))
    burn = 24 * 60
    s_ext = np.concatenate([np.resize(s[:168], burn), s]) if len(s) >= 168 else s
    e_ext = np.concatenate([cfg.noise_scale * rng.standard_t(cfg.noise_df, size=burn), eps])
    p = np.zeros(len(s_ext))
    base = s_ext.mean() / (1 - cfg.phi)
    p[:24] = base
    for t in range(24, len(p)):
        p[t] = cfg.phi * p[t - 24] + s_ext[t] + e_ext[t]
    return p[burn:]


def _ar1(n: int, rho: float, scale: float, rng: np.random.Generator) -> np.ndarray:
    x = np.empty(n)
    x[0] = 0.0
    shocks = rng.normal(0.0, scale, size=n)
    for t in range(1, n):
        x[t] = rho * x[t - 1] + shocks[t]
    return x


def generate_zone(zone, cfg: SyntheticConfig = SyntheticConfig()) -> dict[str, pd.DataFrame]:
    """Frames for the hourly, daily and weekly snapshots of one zone."""
    zone = ZoneId.parse(zone)
    # Zone-specific but reproducible stream.
    rng = np.random.default_rng([cfg.seed, int(zone.value[-1])])
    index = pd.date_range(cfg.start, cfg.end, freq="h", inclusive="left", tz="UTC")
    doy = index.dayofyear.to_numpy()
    hour = index.hour.to_numpy()
    n = len(index)

    price = simulate_price(index, cfg, rng)
    winter = np.cos(2 * np.pi * (doy - 15) / 365.25)
    temperature = 5.0 - 9.0 * winter - 3.0 * np.cos(2 * np.pi * (hour - 14) / 24) + _ar1(n, 0.98, 0.6, rng)
    wind_forecast = np.abs(400.0 + _ar1(n, 0.995, 25.0, rng))
    load_forecast = 4000.0 + 900.0 * winter + 300.0 * np.sin(2 * np.pi * (hour - 6) / 24) + rng.normal(0, 80, n)
    actual_load = load_forecast + rng.normal(0, 50, n)
    sparse = np.where(rng.random(n) < 0.3, rng.normal(90, 5, n), np.nan)
    hourly = pd.DataFrame(
        {
            "price": price,
            "temperature": temperature,
            "wind_forecast": wind_forecast,
            "load_forecast": load_forecast,
            "actual_load": actual_load,
            "coal_price": sparse,
        },
        index=index,
    )

    days = pd.date_range(index[0], index[-1], freq="D", tz="UTC") + pd.Timedelta(hours=17)
    ttf = 40.0 + np.cumsum(rng.normal(0, 1.0, len(days)))
    daily = pd.DataFrame({"ttf": ttf}, index=days)

    weeks = pd.date_range(index[0], index[-1], freq="W-WED", tz="UTC") + pd.Timedelta(hours=12)
    wdoy = weeks.dayofyear.to_numpy()
    reservoir = 60.0 + 20.0 * np.sin(2 * np.pi * (wdoy - 120) / 365.25) + _ar1(len(weeks), 0.9, 3.0, rng)
    weekly = pd.DataFrame({"reservoir_level": reservoir}, index=weeks)
    return {"hourly": hourly, "daily": daily, "weekly": weekly}


SCHEMA = {
    "hourly": {
        "price": {"frequency": "hourly", "availability": "day-ahead", "unit": "EUR/MWh"},
        "temperature": {"frequency": "hourly", "availability": "day-ahead", "unit": "degC"},
        "wind_forecast": {"frequency": "hourly", "availability": "day-ahead", "unit": "MW"},
        "load_forecast": {"frequency": "hourly", "availability": "day-ahead", "unit": "MW"},
        "actual_load": {"frequency": "hourly", "availability": "post-delivery", "unit": "MW"},
        "coal_price": {"frequency": "hourly", "availability": "day-ahead", "unit": "USD/t"},
    },
    "daily": {"ttf": {"frequency": "daily", "availability": "day-ahead", "unit": "EUR/MWh"}},
    "weekly": {"reservoir_level": {"frequency": "weekly", "availability": "day-ahead", "unit": "%"}},
}

_FILES = {"hourly": HOURLY_FILE, "daily": DAILY_FILE, "weekly": WEEKLY_FILE}


def write_zone(zone, directory, cfg: SyntheticConfig = SyntheticConfig()) -> list[Path]:
    """Write one zone's snapshots and schema sidecars; returns the CSV paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    zone = ZoneId.parse(zone)
    paths = []
    for kind, frame in generate_zone(zone, cfg).items():
        path = directory / _FILES[kind].format(zone=zone.value)
        out = frame.copy()
        out.index = out.index.strftime("%Y-%m-%dT%H:%M:%SZ")
        out.index.name = "timestamp"
        out.to_csv(path, float_format="%.10g", na_rep="")
        sidecar = {"columns": SCHEMA[kind]}
        path.with_suffix(".schema.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
        paths.append(path)
    return paths


def default_experiment(data_dir, zones, out_dir=None, seed: int = 0) -> dict:
    """Experiment config for synthetic data written by :func:`write_zone`."""
    data_dir = Path(data_dir)
    cfg = {
        "zones": {
            z: [str(data_dir / f.format(zone=z)) for f in _FILES.values()] for z in zones
        },
        "panel": {"start": "2021-01-01T00:00Z", "end": "2024-01-01T00:00Z", "sparse_threshold": 0.5},
        "split": {
            "train": ["2021-01-01T00:00Z", "2022-07-01T00:00Z"],
            "validation": ["2022-07-01T00:00Z", "2023-01-01T00:00Z"],
            "test": ["2023-01-01T00:00Z", "2023-12-31T00:00Z"],
        },
        "models": {"naive-24h": {}, "naive-168h": {}, "ridge": {}, "gbdt": {}},
        "backtest": {"step": 168, "steps_per_zone": 52, "refit_mode": "frozen-model", "reference": "naive-24h"},
        "windows": {
            "first-half": ["2021-01-01T00:00Z", "2021-10-01T00:00Z"],
            "second-half": ["2021-10-01T00:00Z", "2022-07-01T00:00Z"],
            "full": ["2021-01-01T00:00Z", "2022-07-01T00:00Z"],
        },
        "analysis": {"ablation": True, "regimes": True, "windows": True, "failures": True, "failures_k": 20},
        "seed": seed,
    }
    if out_dir is not None:
        cfg["output_dir"] = str(out_dir)
    return cfg
