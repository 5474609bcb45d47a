"""Ridge-regularised ARX model on standardized features and target."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from . import metrics
from .errors import ProtocolError, SchemaError, SolverError

logger = logging.getLogger(__name__)

LAMBDA_GRID = (0.1, 1.0, 10.0, 100.0)


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray
    target_mean: float
    target_std: float

    @classmethod
    def fit(cls, X, y) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        mu = X.mean(axis=0)
        sd = X.std(axis=0)
        # Constant columns keep a unit divisor; their weights shrink to zero.
        sd = np.where(sd > 0, sd, 1.0)
        ty = float(y.std())
        return cls(mean=mu, std=sd, target_mean=float(y.mean()), target_std=ty if ty > 0 else 1.0)

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def transform_target(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.target_mean) / self.target_std

    def inverse_target(self, z) -> np.ndarray:
        return np.asarray(z) * self.target_std + self.target_mean


def solve_ridge(X, p, lam: float) -> np.ndarray:
    """Closed-form ``argmin ||p - Xw||^2 + lam ||w||^2`` via the regularized normal equations."""
    X = np.asarray(X, dtype=float)
    p = np.asarray(p, dtype=float)
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    A = X.T @ X + lam * np.eye(X.shape[1])
    b = X.T @ p
    try:
        if lam > 0:
            return scipy.linalg.cho_solve(scipy.linalg.cho_factor(A), b)
        return np.linalg.solve(A, b)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SolverError(f"normal equations are singular at lambda={lam}: {exc}") from None


@dataclass(frozen=True)
class RidgeModel:
    weights: np.ndarray        # on standardized features / target
    intercept: float           # on the original price scale
    lam: float
    standardizer: Standardizer
    columns: tuple[str, ...] = ()

    def raw_coefficients(self) -> np.ndarray:
        """Weights expressed on the original feature and price scales."""
        s = self.standardizer
        return self.weights * s.target_std / s.std

    def to_dict(self) -> dict:
        s = self.standardizer
        return {
            "kind": "ridge",
            "columns": list(self.columns),
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "lambda": self.lam,
            "standardizer": {
                "mean": s.mean.tolist(), "std": s.std.tolist(),
                "target_mean": s.target_mean, "target_std": s.target_std,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RidgeModel":
        s = d["standardizer"]
        st = Standardizer(np.asarray(s["mean"]), np.asarray(s["std"]), s["target_mean"], s["target_std"])
        return cls(np.asarray(d["weights"]), d["intercept"], d["lambda"], st, tuple(d["columns"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "RidgeModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def ridge_fit(X, p, lam: float, columns=None) -> RidgeModel:
    """Standardize on these rows, solve in standardized space, keep the moments for prediction."""
    X = np.asarray(X, dtype=float)
    p = np.asarray(p, dtype=float)
    if X.shape[0] != p.shape[0]:
        raise SchemaError(f"{X.shape[0]} feature rows vs {p.shape[0]} targets")
    st = Standardizer.fit(X, p)
    w = solve_ridge(st.transform(X), st.transform_target(p), lam)
    # Centering makes the standardized intercept zero; map it back to prices.
    intercept = float(st.target_mean - st.target_std * (st.mean / st.std) @ w)
    cols = tuple(columns) if columns is not None else tuple(f"x{i}" for i in range(X.shape[1]))
    return RidgeModel(weights=w, intercept=intercept, lam=float(lam), standardizer=st, columns=cols)


def ridge_predict(model: RidgeModel, X, columns=None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if columns is not None and tuple(columns) != model.columns:
        raise SchemaError("feature columns differ from the ones the model was fitted on")
    if X.ndim != 2 or X.shape[1] != model.weights.size:
        raise SchemaError(f"expected {model.weights.size} feature columns, got {X.shape}")
    z = model.standardizer.transform(X) @ model.weights
    return model.standardizer.inverse_target(z)


def select_lambda(X_train, p_train, X_val, p_val, grid=LAMBDA_GRID, columns=None) -> tuple[RidgeModel, dict[float, float]]:
    """Fit one model per grid value on train, keep the lowest validation MAE.

    Ties go to the larger lambda. Returns the chosen model and the
    validation MAE of every candidate.
    """
    if len(p_val) == 0:
        raise ProtocolError("validation set is empty")
    if not grid:
        raise ProtocolError("lambda grid is empty")
    scores: dict[float, float] = {}
    models = {}
    for lam in sorted(float(g) for g in grid):
        m = ridge_fit(X_train, p_train, lam, columns)
        models[lam] = m
        scores[lam] = metrics.mae(p_val, ridge_predict(m, X_val))
    best = min(scores.values())
    chosen = max(lam for lam, s in scores.items() if s == best)
    logger.debug("ridge validation MAE by lambda: %s -> %s", scores, chosen)
    return models[chosen], scores
