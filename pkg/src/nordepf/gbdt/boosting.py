"""Gradient boosting with an L1 objective and validation early stopping."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd

from ..errors import ConfigError, ProtocolError, SchemaError
from .binning import apply_bins, build_bins
from .tree import Tree, grow_tree

logger = logging.getLogger(__name__)

FORMAT_VERSION = "nordepf-gbdt/1"


@dataclass(frozen=True)
class GBDTConfig:
    num_leaves: int = 63
    learning_rate: float = 0.05
    row_subsample: float = 0.8
    column_subsample: float = 0.8
    l2_leaf_penalty: float = 1.0
    max_rounds: int = 1000
    early_stopping_patience: int = 50
    histogram_bins: int = 255
    min_samples_per_leaf: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.num_leaves < 2:
            raise ConfigError("num_leaves must be >= 2")
        for name in ("learning_rate", "row_subsample", "column_subsample"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ConfigError(f"{name} must be in (0, 1], got {v}")
        if self.early_stopping_patience < 1:
            raise ConfigError("early_stopping_patience must be >= 1")
        if self.max_rounds < 0:
            raise ConfigError("max_rounds must be >= 0")
        if self.l2_leaf_penalty < 0:
            raise ConfigError("l2_leaf_penalty must be >= 0")
        if self.min_samples_per_leaf < 1:
            raise ConfigError("min_samples_per_leaf must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "GBDTConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown GBDT config keys {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class GBDTModel:
    trees: tuple[Tree, ...]
    base_score: float
    best_round: int
    config: GBDTConfig
    bin_edges: tuple[np.ndarray, ...]
    feature_names: tuple[str, ...] = ()
    # Per-round history: round, train_mae, val_mae (NaN without validation).
    log: pd.DataFrame | None = None

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "base_score": self.base_score,
            "best_round": self.best_round,
            "feature_names": list(self.feature_names),
            "bin_edges": [e.tolist() for e in self.bin_edges],
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GBDTModel":
        if d.get("format") != FORMAT_VERSION:
            raise SchemaError(f"unsupported model format {d.get('format')!r}")
        return cls(
            trees=tuple(Tree.from_dict(t) for t in d["trees"]),
            base_score=float(d["base_score"]),
            best_round=int(d["best_round"]),
            config=GBDTConfig.from_dict(d["config"]),
            bin_edges=tuple(np.asarray(e, dtype=float) for e in d["bin_edges"]),
            feature_names=tuple(d["feature_names"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "GBDTModel":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def write_log(self, path) -> None:
        if self.log is None:
            raise ValueError("model carries no training log")
        self.log.to_csv(path, index=False, float_format="%.10g")


def _l1_gradients(pred: np.ndarray, y: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    resid = y - pred
    grad = -np.sign(resid)
    # Treat rounding-level residuals as exact hits so translated targets give identical trees.
    grad[np.abs(resid) <= tol] = 0.0
    return grad, resid


def _mae(a, b) -> float:
    return float(np.mean(np.abs(a - b)))


def fit(
    X_train,
    p_train,
    X_val=None,
    p_val=None,
    config: GBDTConfig = GBDTConfig(),
    rounds: int | None = None,
    feature_names=None,
) -> GBDTModel:
    """Boost L1 regression trees.

    With validation data, training stops once validation MAE has not improved
    for ``early_stopping_patience`` rounds and ``best_round`` is the round with
    the lowest validation MAE. Passing ``rounds`` instead trains exactly that
    many trees with no early stopping (validation, if given, is only logged).
    """
    X_train = np.asarray(X_train, dtype=float)
    y = np.asarray(p_train, dtype=float)
    if X_train.shape[0] != y.shape[0]:
        raise SchemaError("train features and target differ in length")
    if y.size == 0:
        raise ProtocolError("training set is empty")
    use_val = X_val is not None
    if rounds is None:
        if not use_val or len(p_val) == 0:
            raise ProtocolError("early stopping needs a non-empty validation set (or pass rounds=)")
        max_rounds = config.max_rounds
    else:
        if rounds < 0:
            raise ConfigError("rounds must be >= 0")
        max_rounds = int(rounds)

    edges = build_bins(X_train, config.histogram_bins)
    Xb = apply_bins(X_train, edges)
    n, n_feat = Xb.shape
    if use_val:
        yv = np.asarray(p_val, dtype=float)
        Xvb = apply_bins(X_val, edges)
    base = float(np.median(y))
    pred = np.full(n, base)
    pred_val = np.full(len(yv), base) if use_val else None
    tol = 1e-10 * (1.0 + float(np.std(y)))

    rng = np.random.default_rng(config.seed)
    n_rows = max(1, int(round(config.row_subsample * n)))
    n_cols = max(1, int(round(config.column_subsample * n_feat))) if n_feat else 0

    trees: list[Tree] = []
    history = []
    best_val, best_round, since_best = np.inf, 0, 0
    t0 = time.perf_counter()
    for it in range(1, max_rounds + 1):
        rows = np.sort(rng.choice(n, size=n_rows, replace=False)) if n_rows < n else np.arange(n)
        cols = np.sort(rng.choice(n_feat, size=n_cols, replace=False)) if n_cols < n_feat else np.arange(n_feat)
        grad, resid = _l1_gradients(pred, y, tol)
        tree = grow_tree(
            Xb, grad, resid,
            num_leaves=config.num_leaves,
            l2_leaf_penalty=config.l2_leaf_penalty,
            min_samples_per_leaf=config.min_samples_per_leaf,
            learning_rate=config.learning_rate,
            rows=rows, features=cols, edges=edges,
        )
        trees.append(tree)
        pred = pred + tree.predict_binned(Xb)
        train_mae = _mae(y, pred)
        val_mae = np.nan
        if use_val:
            pred_val = pred_val + tree.predict_binned(Xvb)
            val_mae = _mae(yv, pred_val)
        history.append((it, train_mae, val_mae))

        if rounds is not None:
            continue
        if val_mae < best_val:
            best_val, best_round, since_best = val_mae, it, 0
        else:
            since_best += 1
            if since_best >= config.early_stopping_patience:
                break

    if rounds is not None:
        best_round = max_rounds
    log = pd.DataFrame(history, columns=["round", "train_mae", "val_mae"])
    logger.info(
        "gbdt: %d trees grown in %.1fs, best_round=%d, val_mae=%.4f",
        len(trees), time.perf_counter() - t0, best_round, best_val if rounds is None else np.nan,
    )
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{i}" for i in range(n_feat))
    return GBDTModel(
        trees=tuple(trees), base_score=base, best_round=best_round, config=config,
        bin_edges=tuple(edges), feature_names=names, log=log,
    )


def predict(model: GBDTModel, X, rounds: int | None = None, feature_names=None) -> np.ndarray:
    """``base_score`` plus the outputs of the first ``rounds`` trees (default ``best_round``)."""
    if feature_names is not None and tuple(feature_names) != model.feature_names:
        raise SchemaError("feature columns differ from the ones the model was fitted on")
    rounds = model.best_round if rounds is None else int(rounds)
    if not 0 <= rounds <= len(model.trees):
        raise ConfigError(f"rounds must be in [0, {len(model.trees)}], got {rounds}")
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(model.bin_edges):
        raise SchemaError(f"expected {len(model.bin_edges)} feature columns, got shape {X.shape}")
    Xb = apply_bins(X, list(model.bin_edges))
    out = np.full(X.shape[0], model.base_score)
    for tree in model.trees[:rounds]:
        out = out + tree.predict_binned(Xb)
    return out


def truncated(model: GBDTModel, rounds: int | None = None) -> GBDTModel:
    """Copy keeping only the trees up to ``rounds`` (default ``best_round``)."""
    rounds = model.best_round if rounds is None else rounds
    return replace(model, trees=model.trees[:rounds], best_round=min(model.best_round, rounds))
