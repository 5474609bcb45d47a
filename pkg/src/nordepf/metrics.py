"""Point-forecast accuracy metrics: MAE, RMSE, sMAPE and R^2."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DataError, InsufficientDataError


def _pair(actual, forecast) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(actual, dtype=float).ravel()
    f = np.asarray(forecast, dtype=float).ravel()
    if a.shape != f.shape:
        raise DataError(f"length mismatch: {a.size} actual vs {f.size} forecast values")
    if a.size == 0:
        raise InsufficientDataError("metrics need at least one observation")
    return a, f


def mae(actual, forecast) -> float:
    a, f = _pair(actual, forecast)
    return float(np.mean(np.abs(a - f)))


def rmse(actual, forecast) -> float:
    a, f = _pair(actual, forecast)
    return float(np.sqrt(np.mean((a - f) ** 2)))


def smape_terms(actual, forecast) -> np.ndarray:
    """Per-hour sMAPE contributions in percent; a 0/0 term counts as 0."""
    a, f = _pair(actual, forecast)
    denom = np.abs(a) + np.abs(f)
    num = 2.0 * np.abs(a - f)
    out = np.zeros_like(denom)
    np.divide(num, denom, out=out, where=denom > 0)
    return 100.0 * out


def smape(actual, forecast) -> float:
    return float(np.mean(smape_terms(actual, forecast)))


def r2(actual, forecast) -> float:
    """1 - SS_res / SS_tot, centred on the mean of ``actual``."""
    a, f = _pair(actual, forecast)
    if a.size < 2:
        raise InsufficientDataError("r2 needs at least two observations")
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0:
        raise InsufficientDataError("r2 undefined for a constant actual series")
    return 1.0 - float(np.sum((a - f) ** 2)) / ss_tot


@dataclass(frozen=True)
class MetricReport:
    mae: float
    rmse: float
    smape: float
    r2: float
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


CSV_FIELDS = ("mae", "rmse", "smape", "r2", "n")


def evaluate(actual, forecast) -> MetricReport:
    a, f = _pair(actual, forecast)
    return MetricReport(mae=mae(a, f), rmse=rmse(a, f), smape=smape(a, f), r2=r2(a, f), n=int(a.size))
