"""Feature-group ablation, hydro/gas regime analysis and worst-error extraction."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import gbdt, metrics
from .errors import DataError, DegenerateError
from .features import EXOGENOUS_GROUPS, LOCAL_TZ, FeatureGroup, FeatureMatrix, group_mask
from .models import GBDTForecaster

logger = logging.getLogger(__name__)

ABLATION_FIELDS = ("zone", "variant", "mae", "r2", "delta_mae", "delta_r2", "rounds", "n_features")


@dataclass
class AblationResult:
    """Ablation table plus the test forecasts of every variant."""

    table: pd.DataFrame
    forecasts: dict[str, np.ndarray] = field(default_factory=dict)

    def row(self, variant: str) -> pd.Series:
        return self.table.set_index("variant").loc[variant]


def _fit_fixed(train: FeatureMatrix, test: FeatureMatrix, rounds: int, config: gbdt.GBDTConfig) -> tuple[np.ndarray, int]:
    model = GBDTForecaster(config, rounds=rounds).fit(train)
    if len(model.model.trees) != rounds:
        raise AssertionError("fixed-round retrain must not stop early")
    return model.predict(test), len(model.model.trees)


def _variant_row(zone, variant, actual, pred, full, rounds, n_features, r2_sign) -> dict:
    m, r = metrics.mae(actual, pred), metrics.r2(actual, pred)
    return {
        "zone": zone, "variant": variant, "mae": m, "r2": r,
        "delta_mae": m - full[0],
        # LOGO: R2_full - R2_without; group-only: R2_lags+g - R2_full.
        "delta_r2": (full[1] - r) if r2_sign < 0 else (r - full[1]),
        "rounds": rounds, "n_features": n_features,
    }


def _full_variant(train, test, rounds, config):
    pred, n = _fit_fixed(train, test, rounds, config)
    actual = test.target.to_numpy()
    full = (metrics.mae(actual, pred), metrics.r2(actual, pred))
    row = {"zone": test.zone, "variant": "full", "mae": full[0], "r2": full[1],
           "delta_mae": 0.0, "delta_r2": 0.0, "rounds": n, "n_features": len(train.columns)}
    return pred, full, row


def logo_ablation(train: FeatureMatrix, test: FeatureMatrix, full_model_rounds: int, config: gbdt.GBDTConfig) -> AblationResult:
    """Retrain without each group in turn, rounds fixed to the full model's early-stopping choice.

    ``delta_mae = MAE_without - MAE_full`` and ``delta_r2 = R2_full - R2_without``;
    positive values mean the removed group was useful.
    """
    pred_full, full, full_row = _full_variant(train, test, full_model_rounds, config)
    rows, forecasts = [full_row], {"full": pred_full}
    actual = test.target.to_numpy()
    present = train.present_groups()
    for group in FeatureGroup:
        if group not in present:
            logger.warning("%s: group %s absent; skipped", train.zone, group)
            continue
        tr = group_mask(train, exclude=group)
        te = group_mask(test, exclude=group)
        if not tr.columns:
            logger.warning("%s: removing %s leaves no features; skipped", train.zone, group)
            continue
        pred, n = _fit_fixed(tr, te, full_model_rounds, config)
        name = f"without-{group.value}"
        forecasts[name] = pred
        rows.append(_variant_row(train.zone, name, actual, pred, full, n, len(tr.columns), r2_sign=-1))
    return AblationResult(pd.DataFrame(rows, columns=ABLATION_FIELDS), forecasts)


def group_only(train: FeatureMatrix, test: FeatureMatrix, full_model_rounds: int, config: gbdt.GBDTConfig) -> AblationResult:
    """Lags alone, then lags plus one exogenous group at a time, against the full model.

    ``delta_mae = MAE_lags+g - MAE_full`` and ``delta_r2 = R2_lags+g - R2_full``.
    """
    pred_full, full, full_row = _full_variant(train, test, full_model_rounds, config)
    rows, forecasts = [full_row], {"full": pred_full}
    actual = test.target.to_numpy()
    present = train.present_groups()
    if FeatureGroup.LAGS not in present:
        raise DataError("group-only ablation needs the lag group")
    variants = [("lags-only", {FeatureGroup.LAGS})]
    for group in EXOGENOUS_GROUPS:
        if group not in present:
            logger.warning("%s: group %s absent; skipped", train.zone, group)
            continue
        variants.append((f"lags-plus-{group.value}", {FeatureGroup.LAGS, group}))
    for name, keep in variants:
        tr, te = group_mask(train, keep=keep), group_mask(test, keep=keep)
        pred, n = _fit_fixed(tr, te, full_model_rounds, config)
        forecasts[name] = pred
        rows.append(_variant_row(train.zone, name, actual, pred, full, n, len(tr.columns), r2_sign=+1))
    return AblationResult(pd.DataFrame(rows, columns=ABLATION_FIELDS), forecasts)


CELLS = ("HH", "HL", "LH", "LL")  # reservoir level first, TTF second


def regime_partition(reservoir_anomaly, ttf) -> tuple[np.ndarray, dict]:
    """Label each hour by median splits: strictly above the median is high, ties go low.

    Returns the labels (``"HL"`` = high reservoir, low TTF) and the medians.
    """
    res = np.asarray(reservoir_anomaly, dtype=float)
    gas = np.asarray(ttf, dtype=float)
    if res.shape != gas.shape:
        raise DataError("state columns differ in length")
    if np.isnan(res).any() or np.isnan(gas).any():
        raise DataError("state columns must be observed at every evaluated hour")
    for name, v in (("reservoir anomaly", res), ("TTF", gas)):
        if v.size == 0 or np.all(v == v[0]):
            raise DegenerateError(f"{name} is constant; median split is degenerate")
    med_r, med_g = float(np.median(res)), float(np.median(gas))
    hi_r = np.where(res > med_r, "H", "L")
    hi_g = np.where(gas > med_g, "H", "L")
    labels = np.char.add(hi_r, hi_g)
    return labels, {"reservoir_median": med_r, "ttf_median": med_g}


@dataclass
class RegimeReport:
    cells: pd.DataFrame      # model, cell, smape, rmse, n
    marginals: dict          # model -> {"marginal_reservoir", "marginal_gas", "incomplete"}
    medians: dict
    zone: str = ""
    anomaly_scope: str = "zone-local"

    def to_dict(self) -> dict:
        return {"zone": self.zone, "medians": self.medians, "marginals": self.marginals,
                "anomaly_scope": self.anomaly_scope}


def _mean_available(values):
    vals = [v for v in values if not np.isnan(v)]
    return float(np.mean(vals)) if vals else float("nan")


def regime_metrics(labels, actual, forecasts: dict, medians: dict | None = None, zone: str = "") -> RegimeReport:
    """Per-cell sMAPE/RMSE for each model and the two marginal contrasts.

    marginal_reservoir = mean sMAPE over low-reservoir cells - over high-reservoir cells;
    marginal_gas = mean sMAPE over high-TTF cells - over low-TTF cells. Both are
    unweighted means of cell values; empty cells are reported as NaN and flagged.
    """
    labels = np.asarray(labels)
    actual = np.asarray(actual, dtype=float)
    if labels.shape != actual.shape:
        raise DataError("labels must cover every evaluated hour")
    rows, marginals = [], {}
    for model, pred in forecasts.items():
        pred = np.asarray(pred, dtype=float)
        cell_smape = {}
        for cell in CELLS:
            mask = labels == cell
            n = int(mask.sum())
            if n:
                s, r = metrics.smape(actual[mask], pred[mask]), metrics.rmse(actual[mask], pred[mask])
            else:
                s = r = float("nan")
            cell_smape[cell] = s
            rows.append({"zone": zone, "model": model, "cell": cell, "smape": s, "rmse": r, "n": n})
        marginals[model] = {
            "marginal_reservoir": _mean_available([cell_smape["LH"], cell_smape["LL"]])
            - _mean_available([cell_smape["HH"], cell_smape["HL"]]),
            "marginal_gas": _mean_available([cell_smape["HH"], cell_smape["LH"]])
            - _mean_available([cell_smape["HL"], cell_smape["LL"]]),
            "incomplete": any(np.isnan(v) for v in cell_smape.values()),
        }
    return RegimeReport(cells=pd.DataFrame(rows), marginals=marginals, medians=medians or {}, zone=zone)


FAILURE_FIELDS = ("rank", "timestamp", "actual", "forecast", "abs_error", "direction", "weekday", "hour")


def worst_errors(actual: pd.Series, forecast, state_columns: pd.DataFrame | None = None, k: int = 20) -> tuple[pd.DataFrame, dict]:
    """Top-``k`` hours by absolute error, with local weekday/hour and state diagnostics.

    Ties in absolute error are ordered by timestamp. Returns the records and
    tallies of direction, weekday and hour.
    """
    if k > len(actual):
        raise DataError(f"k={k} exceeds the {len(actual)} evaluated hours")
    f = np.asarray(forecast, dtype=float)
    a = actual.to_numpy(dtype=float)
    err = np.abs(a - f)
    # Stable sort on -error, with rows already in time order, breaks ties by time.
    order = np.argsort(-err, kind="stable")[:k]
    idx = actual.index[order]
    local = idx.tz_convert(LOCAL_TZ)
    out = pd.DataFrame({
        "rank": np.arange(1, len(order) + 1),
        "timestamp": idx.strftime("%Y-%m-%dT%H:%M:%SZ"),
        "local_time": local.strftime("%Y-%m-%d %H:%M"),
        "actual": a[order],
        "forecast": f[order],
        "abs_error": err[order],
        "direction": np.where(a[order] > f[order], "under", np.where(a[order] < f[order], "over", "exact")),
        "weekday": local.day_name(),
        "hour": local.hour,
    })
    if state_columns is not None:
        for c in state_columns.columns:
            out[c] = state_columns[c].reindex(idx).to_numpy()
    tallies = {
        "k": int(len(out)),
        "direction": {str(k_): int(v) for k_, v in out["direction"].value_counts().sort_index().items()},
        "weekday": {str(k_): int(v) for k_, v in out["weekday"].value_counts().sort_index().items()},
        "hour": {str(int(k_)): int(v) for k_, v in out["hour"].value_counts().sort_index().items()},
    }
    return out, tallies
