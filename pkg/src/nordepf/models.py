"""Uniform fit/predict wrappers over the naive, ridge and GBDT forecasters."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import gbdt, linmod
from .errors import ConfigError, DataError, ProtocolError
from .features import FeatureMatrix

MODEL_NAMES = ("naive-24h", "naive-168h", "ridge", "gbdt")


class NaiveForecaster:
    """Repeats the price observed ``lag`` hours earlier."""

    def __init__(self, lag: int, name: str | None = None):
        self.lag = int(lag)
        self.name = name or f"naive-{self.lag}h"

    def fit(self, train: FeatureMatrix, val: FeatureMatrix | None = None) -> "NaiveForecaster":
        return self

    def predict(self, m: FeatureMatrix) -> np.ndarray:
        shifted = m.history.shift(self.lag).reindex(m.index)
        if shifted.isna().any():
            raise DataError(f"{self.name}: history does not reach {self.lag} h before every row")
        return shifted.to_numpy()

    def to_dict(self) -> dict:
        return {"kind": "naive", "lag": self.lag}


class RidgeForecaster:
    def __init__(self, grid=linmod.LAMBDA_GRID, name: str = "ridge"):
        self.grid = tuple(float(g) for g in grid)
        self.name = name
        self.model: linmod.RidgeModel | None = None
        self.val_scores: dict[float, float] = {}

    def fit(self, train: FeatureMatrix, val: FeatureMatrix | None = None) -> "RidgeForecaster":
        if val is None or len(val) == 0:
            raise ProtocolError("ridge needs a validation set to select lambda")
        self.model, self.val_scores = linmod.select_lambda(
            train.X.to_numpy(), train.target.to_numpy(), val.X.to_numpy(), val.target.to_numpy(),
            self.grid, columns=train.columns,
        )
        return self

    def predict(self, m: FeatureMatrix) -> np.ndarray:
        return linmod.ridge_predict(self.model, m.X.to_numpy(), columns=m.columns)

    def to_dict(self) -> dict:
        d = self.model.to_dict()
        d["validation_mae"] = {str(k): v for k, v in self.val_scores.items()}
        return d


class GBDTForecaster:
    """Early-stopped on the validation set unless ``rounds`` fixes the tree count."""

    def __init__(self, config: gbdt.GBDTConfig = gbdt.GBDTConfig(), rounds: int | None = None, name: str = "gbdt"):
        self.config = config
        self.rounds = rounds
        self.name = name
        self.model: gbdt.GBDTModel | None = None

    def fit(self, train: FeatureMatrix, val: FeatureMatrix | None = None) -> "GBDTForecaster":
        Xv = val.X.to_numpy() if val is not None else None
        yv = val.target.to_numpy() if val is not None else None
        self.model = gbdt.fit(
            train.X.to_numpy(), train.target.to_numpy(), Xv, yv, self.config,
            rounds=self.rounds, feature_names=train.columns,
        )
        return self

    def predict(self, m: FeatureMatrix) -> np.ndarray:
        return gbdt.predict(self.model, m.X.to_numpy(), feature_names=m.columns)

    @property
    def best_round(self) -> int:
        return self.model.best_round

    def to_dict(self) -> dict:
        return self.model.to_dict()


def make_forecaster(name: str, params: dict | None = None, seed: int | None = None):
    """Build a roster entry from its config block."""
    params = dict(params or {})
    if name.startswith("naive-"):
        lag = params.pop("lag", None) or int(name.removeprefix("naive-").removesuffix("h"))
        return NaiveForecaster(lag, name=name)
    if name == "ridge":
        return RidgeForecaster(params.get("grid", linmod.LAMBDA_GRID))
    if name == "gbdt":
        rounds = params.pop("rounds", None)
        if seed is not None and "seed" not in params:
            params["seed"] = seed
        return GBDTForecaster(gbdt.GBDTConfig.from_dict(params), rounds=rounds)
    raise ConfigError(f"unknown model {name!r}; expected one of {MODEL_NAMES}")


def save_forecaster(f, path) -> None:
    Path(path).write_text(json.dumps(f.to_dict()) + "\n")


def load_forecaster(path, name: str | None = None):
    """Inverse of :func:`save_forecaster`."""
    path = Path(path)
    d = json.loads(path.read_text())
    name = name or path.stem
    if d.get("kind") == "naive":
        return NaiveForecaster(d["lag"], name=name)
    if d.get("kind") == "ridge":
        f = RidgeForecaster(name=name)
        f.model = linmod.RidgeModel.from_dict(d)
        f.val_scores = {float(k): v for k, v in d.get("validation_mae", {}).items()}
        return f
    if d.get("format") == gbdt.boosting.FORMAT_VERSION:
        model = gbdt.GBDTModel.from_dict(d)
        f = GBDTForecaster(model.config, name=name)
        f.model = model
        return f
    raise DataError(f"{path}: unrecognised model file")
