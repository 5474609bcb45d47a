"""Diebold-Mariano forecast comparison with Newey-West variance and the HLN correction.

Convention: the loss differential is ``d_t = e_A,t**2 - e_B,t**2``, so a
negative statistic means model A (the left model) is more accurate. The test
is one-sided against the alternative that A has lower expected squared error,
i.e. the p-value is the lower Student-t tail of the corrected statistic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd
from scipy.special import betainc

from .errors import ConfigError, DataError, InsufficientDataError

VARIANCE_FLOOR = 1e-300

DEFAULT_PAIRS = (("gbdt", "ridge"), ("gbdt", "naive-24h"), ("ridge", "naive-24h"))


@dataclass(frozen=True)
class DMConfig:
    horizon: int = 24
    one_sided: bool = True

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")

    @property
    def bandwidth(self) -> int:
        return self.horizon - 1


@dataclass(frozen=True)
class DMResult:
    d_bar: float
    dm_stat: float
    hln_stat: float
    p_value: float
    stars: str
    n: int
    # "dominance" when the differential has zero variance but nonzero mean.
    degenerate: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def loss_differential(actual, forecast_a, forecast_b) -> np.ndarray:
    a = np.asarray(actual, dtype=float)
    fa = np.asarray(forecast_a, dtype=float)
    fb = np.asarray(forecast_b, dtype=float)
    if not (a.shape == fa.shape == fb.shape):
        raise DataError("actual and both forecasts must have equal length")
    return (a - fa) ** 2 - (a - fb) ** 2


def autocovariances(d, max_lag: int) -> np.ndarray:
    """Biased (divide-by-n) sample autocovariances for lags 0..max_lag."""
    d = np.asarray(d, dtype=float)
    n = d.size
    c = d - d.mean()
    return np.array([c[k:] @ c[: n - k] / n for k in range(max_lag + 1)])


def newey_west_variance(d, bandwidth: int) -> float:
    """Long-run variance with Bartlett weights ``1 - k / (bandwidth + 1)``."""
    d = np.asarray(d, dtype=float)
    if bandwidth < 0:
        raise ConfigError("bandwidth must be >= 0")
    if d.size <= bandwidth:
        raise InsufficientDataError(f"need more than {bandwidth} observations, got {d.size}")
    gamma = autocovariances(d, bandwidth)
    k = np.arange(1, bandwidth + 1)
    weights = 1.0 - k / (bandwidth + 1.0)
    lrv = gamma[0] + 2.0 * np.sum(weights * gamma[1:])
    return float(max(lrv, VARIANCE_FLOOR))


def hln_factor(n: int, h: int) -> float:
    inner = (n + 1 - 2 * h + h * (h - 1) / n) / n
    if inner <= 0:
        raise InsufficientDataError(f"sample of {n} too short for horizon {h}")
    return math.sqrt(inner)


def student_t_cdf(x: float, df: float) -> float:
    """Student-t CDF through the regularized incomplete beta function."""
    if math.isinf(x):
        return 1.0 if x > 0 else 0.0
    tail = 0.5 * betainc(0.5 * df, 0.5, df / (df + x * x))
    return float(1.0 - tail if x > 0 else tail)


def significance_stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return "ns"


def dm_test(d, config: DMConfig = DMConfig()) -> DMResult:
    d = np.asarray(d, dtype=float)
    n = d.size
    h = config.horizon
    if n <= config.bandwidth or n < 2:
        raise InsufficientDataError(f"need more than {config.bandwidth} differentials, got {n}")
    d_bar = float(d.mean())
    if np.all(d == d[0]):
        # Zero variance: the statistic is undefined, report by convention.
        if d_bar == 0.0:
            return DMResult(d_bar, 0.0, 0.0, 0.5, "ns", n)
        p = 0.0 if d_bar < 0 else 1.0
        stat = math.copysign(math.inf, d_bar)
        return DMResult(d_bar, stat, stat, p, significance_stars(p), n, degenerate="dominance")
    lrv = newey_west_variance(d, config.bandwidth)
    dm = d_bar / math.sqrt(lrv / n)
    hln = dm * hln_factor(n, h)
    p = student_t_cdf(hln, n - 1)
    if not config.one_sided:
        p = 2.0 * min(p, 1.0 - p)
    return DMResult(d_bar, dm, hln, p, significance_stars(p), n)


def pairwise_matrix(actual, forecasts: dict, pairs=None, config: DMConfig = DMConfig(), zone: str = "") -> pd.DataFrame:
    """DM results per ordered pair; ``pairs`` defaults to gbdt/ridge/naive-24h pairs when present, else all pairs.

    Negative ``dm_stat`` means ``model_a`` is more accurate.
    """
    if len(forecasts) < 2:
        raise ConfigError("need at least two models to compare")
    if pairs is None:
        pairs = [p for p in DEFAULT_PAIRS if p[0] in forecasts and p[1] in forecasts]
        if not pairs:
            pairs = list(itertools.combinations(forecasts, 2))
    rows = []
    for a, b in pairs:
        for name in (a, b):
            if name not in forecasts:
                raise ConfigError(f"model {name!r} has no forecasts")
        res = dm_test(loss_differential(actual, forecasts[a], forecasts[b]), config)
        rows.append({"zone": zone, "model_a": a, "model_b": b, **res.to_dict()})
    return pd.DataFrame(rows)
