"""Temporal evaluation protocols: fixed causal split, training-window comparison, weekly backtest."""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd

from . import metrics
from .errors import ConfigError, ProtocolError
from .features import FeatureMatrix

logger = logging.getLogger(__name__)


def _ts(x) -> pd.Timestamp:
    t = pd.Timestamp(x)
    return t.tz_localize("UTC") if t.tz is None else t.tz_convert("UTC")


@dataclass(frozen=True)
class Window:
    start: pd.Timestamp
    end: pd.Timestamp

    def __post_init__(self):
        object.__setattr__(self, "start", _ts(self.start))
        object.__setattr__(self, "end", _ts(self.end))
        if not self.start < self.end:
            raise ProtocolError(f"empty window [{self.start}, {self.end})")

    @property
    def hours(self) -> int:
        return int((self.end - self.start) / pd.Timedelta(hours=1))

    def to_list(self) -> list[str]:
        return [self.start.isoformat(), self.end.isoformat()]

    @classmethod
    def parse(cls, obj) -> "Window":
        if isinstance(obj, Window):
            return obj
        if isinstance(obj, dict):
            return cls(obj["start"], obj["end"])
        start, end = obj
        return cls(start, end)


@dataclass(frozen=True)
class SplitSpec:
    """Half-open ``[start, end)`` windows, strictly ordered train < validation < test."""

    train: Window
    validation: Window
    test: Window

    def __post_init__(self):
        for name in ("train", "validation", "test"):
            object.__setattr__(self, name, Window.parse(getattr(self, name)))
        if self.train.end > self.validation.start:
            raise ProtocolError("training window overlaps or follows validation")
        if self.validation.end > self.test.start:
            raise ProtocolError("validation window overlaps or follows the test window")

    @classmethod
    def benchmark_default(cls) -> "SplitSpec":
        return cls(
            train=Window("2019-01-01T00:00Z", "2024-01-01T00:00Z"),
            validation=Window("2024-01-01T00:00Z", "2025-01-01T00:00Z"),
            test=Window("2025-01-01T00:00Z", "2025-12-31T00:00Z"),
        )

    def to_dict(self) -> dict:
        return {"train": self.train.to_list(), "validation": self.validation.to_list(), "test": self.test.to_list()}

    @classmethod
    def from_dict(cls, d: dict) -> "SplitSpec":
        try:
            return cls(train=d["train"], validation=d["validation"], test=d["test"])
        except KeyError as exc:
            raise ConfigError(f"split needs train/validation/test windows, missing {exc}") from None


def fixed_split(matrix: FeatureMatrix, spec: SplitSpec) -> tuple[FeatureMatrix, FeatureMatrix, FeatureMatrix, dict]:
    """Disjoint train / validation / test row subsets plus window and row counts."""
    parts = [matrix.rows(w.start, w.end) for w in (spec.train, spec.validation, spec.test)]
    counts = {}
    for name, w, part in zip(("train", "validation", "test"), (spec.train, spec.validation, spec.test), parts):
        if len(part) == 0:
            raise ProtocolError(f"{name} window {w.to_list()} contains no matrix rows")
        counts[name] = {"window_hours": w.hours, "rows": len(part)}
    return parts[0], parts[1], parts[2], counts


def window_experiment(
    matrix: FeatureMatrix,
    windows: dict,
    validation,
    test,
    factory: Callable,
) -> pd.DataFrame:
    """Train one model per training window; shared validation and test sets.

    ``factory`` returns a fresh, unfitted forecaster. One row per window with
    the four test metrics.
    """
    validation, test = Window.parse(validation), Window.parse(test)
    val = matrix.rows(validation.start, validation.end)
    tst = matrix.rows(test.start, test.end)
    if len(val) == 0 or len(tst) == 0:
        raise ProtocolError("validation and test windows must contain rows")
    rows = []
    for name, w in windows.items():
        w = Window.parse(w)
        if w.end > validation.start:
            raise ProtocolError(f"training window {name!r} overlaps validation")
        train = matrix.rows(w.start, w.end)
        if len(train) == 0:
            raise ProtocolError(f"training window {name!r} contains no rows")
        model = factory().fit(train, val)
        report = metrics.evaluate(tst.target.to_numpy(), model.predict(tst))
        rows.append({
            "zone": matrix.zone, "window": name, "train_start": w.start.isoformat(),
            "train_end": w.end.isoformat(), "train_rows": len(train),
            "best_round": getattr(model, "best_round", None), **report.to_dict(),
        })
    return pd.DataFrame(rows)


class RefitMode(str, Enum):
    EXPANDING = "expanding-refit"
    FROZEN = "frozen-model"


@dataclass(frozen=True)
class BacktestSpec:
    step: int = 168
    steps_per_zone: int = 52
    refit_mode: RefitMode = RefitMode.FROZEN

    def __post_init__(self):
        object.__setattr__(self, "refit_mode", RefitMode(self.refit_mode))
        if self.step < 1 or self.steps_per_zone < 1:
            raise ConfigError("backtest step and step count must be positive")

    def to_dict(self) -> dict:
        return {"step": self.step, "steps_per_zone": self.steps_per_zone, "refit_mode": self.refit_mode.value}


@dataclass
class BacktestResult:
    table: pd.DataFrame
    summary: dict

    def to_csv(self, path) -> None:
        cols = ["zone", "week", "start", "end", "model", "mae", "win", "tie", "refit_mode"]
        out = self.table[cols].copy()
        for c in ("start", "end"):
            out[c] = pd.to_datetime(out[c], utc=True).dt.strftime("%Y-%m-%dT%H:%M:%SZ")
        out.to_csv(path, index=False, float_format="%.10g")

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary, indent=2, sort_keys=True) + "\n")


def _origins(test: FeatureMatrix, start: pd.Timestamp, spec: BacktestSpec) -> list[tuple[pd.Timestamp, pd.Timestamp]]:
    step = pd.Timedelta(hours=spec.step)
    end = test.index[-1] + pd.Timedelta(hours=1)
    total = (end - start) / pd.Timedelta(hours=1)
    n_full = int(total // spec.step)
    if n_full >= spec.steps_per_zone:
        return [(start + i * step, start + (i + 1) * step) for i in range(spec.steps_per_zone)]
    out = [(start + i * step, start + (i + 1) * step) for i in range(n_full)]
    if total > n_full * spec.step:
        tail = start + n_full * step
        warnings.warn(f"test span ends mid-week; final step is {int((end - tail) / pd.Timedelta(hours=1))} h", stacklevel=3)
        out.append((tail, end))
    if len(out) < spec.steps_per_zone:
        logger.warning("backtest has %d steps, fewer than the %d requested", len(out), spec.steps_per_zone)
    return out


def rolling_backtest(
    matrix: FeatureMatrix,
    spec: BacktestSpec,
    models: dict,
    reference: str,
    test_start,
    test_end=None,
    train_start=None,
    validation_hours: int = 8784,
    fit_end=None,
) -> BacktestResult:
    """Weekly rolling-origin evaluation from ``test_start``.

    In frozen mode ``models`` maps names to fitted forecasters and ``fit_end``
    (the end of the data they were fitted/selected on) is recorded for the
    causality audit. In expanding-refit mode ``models`` maps names to
    factories; at every origin a fresh model is trained on
    ``[train_start, origin - validation_hours)`` and early-stopped on the
    ``validation_hours`` before the origin.
    """
    if reference not in models:
        raise ConfigError(f"reference model {reference!r} not among {sorted(models)}")
    test_start = _ts(test_start)
    test = matrix.rows(test_start, test_end)
    if len(test) == 0:
        raise ProtocolError("no test rows for the backtest")
    origins = _origins(test, test_start, spec)

    records = []
    if spec.refit_mode is RefitMode.FROZEN:
        preds = {name: pd.Series(m.predict(test), index=test.index) for name, m in models.items()}
        for week, (a, b) in enumerate(origins, start=1):
            mask = (test.index >= a) & (test.index < b)
            y = test.target[mask].to_numpy()
            for name in models:
                records.append({"week": week, "start": a, "end": b, "model": name,
                                "mae": metrics.mae(y, preds[name][mask].to_numpy()),
                                "fit_end": _ts(fit_end) if fit_end is not None else pd.NaT})
    else:
        vh = pd.Timedelta(hours=validation_hours)
        for week, (a, b) in enumerate(origins, start=1):
            train = matrix.rows(train_start, a - vh)
            val = matrix.rows(a - vh, a)
            window = test.rows(a, b)
            if len(train) == 0 or len(val) == 0:
                raise ProtocolError(f"week {week}: no training or validation rows before origin {a}")
            if not train.index[-1] < window.index[0] or not val.index[-1] < window.index[0]:
                raise ProtocolError(f"week {week}: training rows reach into the forecast window")
            for name, factory in models.items():
                model = factory().fit(train, val)
                records.append({"week": week, "start": a, "end": b, "model": name,
                                "mae": metrics.mae(window.target.to_numpy(), model.predict(window)),
                                "fit_end": a})

    table = pd.DataFrame(records)
    ref = table[table.model == reference].set_index("week")["mae"]
    ref_mae = table["week"].map(ref)
    table["win"] = (table["mae"] < ref_mae) & (table.model != reference)
    table["tie"] = table["mae"] == ref_mae
    table.insert(0, "zone", matrix.zone)
    table["refit_mode"] = spec.refit_mode.value
    ties = int(table[table.model != reference]["tie"].sum())
    if ties:
        logger.info("%s: %d weekly ties against %s", matrix.zone, ties, reference)
    return BacktestResult(table=table, summary=summarize_backtest(table, reference))


def summarize_backtest(table: pd.DataFrame, reference: str) -> dict:
    """Win rates, quarterly mean weekly MAE and the CDF of weekly MAE reduction vs the reference."""
    out = {"reference": reference, "refit_mode": table["refit_mode"].iloc[0] if len(table) else None, "models": {}}
    for (zone, name), g in table.groupby(["zone", "model"], sort=True):
        ref = table[(table.zone == zone) & (table.model == reference)].set_index("week")["mae"]
        g = g.set_index("week")
        reduction = 100.0 * (1.0 - g["mae"] / ref.reindex(g.index))
        quarters = pd.to_datetime(g["start"], utc=True).dt.quarter
        cdf_x = np.sort(reduction.to_numpy())
        entry = {
            "steps": int(len(g)),
            "wins": int(g["win"].sum()),
            "ties": int(g["tie"].sum()) if name != reference else 0,
            "win_rate": float(g["win"].mean()),
            "mean_weekly_mae": float(g["mae"].mean()),
            "quarterly_mean_mae": {f"Q{q}": float(v) for q, v in g["mae"].groupby(quarters.to_numpy()).mean().items()},
            "reduction_cdf": {
                "reduction_pct": [float(x) for x in cdf_x],
                "cumulative_prob": [float((i + 1) / len(cdf_x)) for i in range(len(cdf_x))],
            },
        }
        out["models"].setdefault(str(zone), {})[name] = entry
    total_steps = table[table.model != reference].groupby("model").size()
    out["totals"] = {
        m: {"steps": int(total_steps[m]), "wins": int(table[(table.model == m)]["win"].sum())}
        for m in total_steps.index
    }
    return out
