"""Causal, group-tagged feature matrices.

Target-derived features only ever look at prices strictly before the row's
hour: lags are at least 24 h (the day-ahead auction clears all hours of a day
at once) and rolling statistics are computed on a series shifted by one hour
before windowing. Calendar fields are evaluated in Europe/Oslo local time on
top of the UTC spine. Every column carries exactly one of six group tags,
which is what the ablation experiments operate on.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError, DegenerateError
from .panel import WARMUP_HOURS, HourlyPanel

logger = logging.getLogger(__name__)

LOCAL_TZ = "Europe/Oslo"


class FeatureGroup(str, Enum):
    LAGS = "lags"
    CALENDAR = "calendar"
    WEATHER = "weather"
    RESERVOIR = "reservoir"
    COMMODITIES = "commodities"
    LOAD_WSF = "load_wsf"

    def __str__(self) -> str:
        return self.value


EXOGENOUS_GROUPS = tuple(g for g in FeatureGroup if g is not FeatureGroup.LAGS)

# Substring hints used when a spec does not list a column explicitly.
_GROUP_HINTS = (
    (FeatureGroup.RESERVOIR, ("reservoir", "hydro_fill", "magasin")),
    (FeatureGroup.COMMODITIES, ("ttf", "gas", "coal", "brent", "oil", "eua", "carbon", "co2")),
    (FeatureGroup.LOAD_WSF, ("load", "wind_forecast", "solar_forecast", "wsf", "res_forecast")),
    (FeatureGroup.WEATHER, ("temp", "wind_speed", "precip", "radiation", "cloud", "humidity", "weather")),
)

_CYCLIC_UNITS = ("hour_of_day", "day_of_week", "day_of_year")


def infer_groups(columns) -> dict[str, FeatureGroup]:
    """Guess a group for each exogenous column from its name; unknown names are skipped."""
    out = {}
    for c in columns:
        low = c.lower()
        for group, hints in _GROUP_HINTS:
            if any(h in low for h in hints):
                out[c] = group
                break
        else:
            logger.warning("no feature group inferred for column %r; it will be ignored", c)
    return out


@dataclass(frozen=True)
class FeatureSpec:
    lag_hours: tuple[int, ...] = (24, 48, 72, 96, 120, 144, 168)
    rolling_windows: tuple[tuple[int, str], ...] = ((24, "mean"), (24, "std"), (168, "mean"), (168, "std"))
    cyclic_encodings: tuple[tuple[str, float], ...] = (
        ("hour_of_day", 24),
        ("day_of_week", 7),
        ("day_of_year", 365.25),
    )
    weekend_flag: bool = True
    exogenous_column_groups: dict[str, FeatureGroup] = field(default_factory=dict)
    # Inclusive year range for the reservoir seasonal normal; None uses all panel years.
    anomaly_years: tuple[int, int] | None = None
    rolling_offset: int = 1
    warmup_hours: int = WARMUP_HOURS

    def __post_init__(self):
        if any(int(k) < 24 for k in self.lag_hours):
            raise ConfigError("target-price lags must be >= 24 h to respect day-ahead availability")
        for w, stat in self.rolling_windows:
            if stat not in ("mean", "std"):
                raise ConfigError(f"unknown rolling statistic {stat!r}")
            if int(w) < 2:
                raise ConfigError("rolling windows must span at least 2 hours")
        for unit, period in self.cyclic_encodings:
            if unit not in _CYCLIC_UNITS:
                raise ConfigError(f"unknown cyclic unit {unit!r}")
            if period < 2:
                raise ConfigError("cyclic period must be >= 2")
        if self.rolling_offset < 1:
            raise ConfigError("rolling_offset must be >= 1 to exclude the current hour")
        groups = {k: FeatureGroup(v) for k, v in self.exogenous_column_groups.items()}
        if any(g is FeatureGroup.LAGS for g in groups.values()):
            raise ConfigError("exogenous columns cannot be tagged 'lags'")
        object.__setattr__(self, "exogenous_column_groups", groups)

    @property
    def is_empty(self) -> bool:
        return not (
            self.lag_hours or self.rolling_windows or self.cyclic_encodings
            or self.weekend_flag or self.exogenous_column_groups
        )

    @classmethod
    def default(cls, panel: HourlyPanel | None = None, **overrides) -> "FeatureSpec":
        if panel is not None and "exogenous_column_groups" not in overrides:
            overrides["exogenous_column_groups"] = infer_groups(panel.exogenous)
        return cls(**overrides)

    def to_dict(self) -> dict:
        return {
            "lag_hours": list(self.lag_hours),
            "rolling_windows": [[w, s] for w, s in self.rolling_windows],
            "cyclic_encodings": [[u, p] for u, p in self.cyclic_encodings],
            "weekend_flag": self.weekend_flag,
            "exogenous_column_groups": {k: v.value for k, v in sorted(self.exogenous_column_groups.items())},
            "anomaly_years": list(self.anomaly_years) if self.anomaly_years else None,
            "rolling_offset": self.rolling_offset,
            "warmup_hours": self.warmup_hours,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSpec":
        kw = dict(d)
        if "lag_hours" in kw:
            kw["lag_hours"] = tuple(int(k) for k in kw["lag_hours"])
        if "rolling_windows" in kw:
            kw["rolling_windows"] = tuple((int(w), str(s)) for w, s in kw["rolling_windows"])
        if "cyclic_encodings" in kw:
            kw["cyclic_encodings"] = tuple((str(u), float(p)) for u, p in kw["cyclic_encodings"])
        if kw.get("anomaly_years") is not None:
            kw["anomaly_years"] = tuple(int(y) for y in kw["anomaly_years"])
        unknown = set(kw) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown feature spec keys {sorted(unknown)}")
        return cls(**kw)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "FeatureSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class FeatureMatrix:
    """Design matrix aligned to target hours.

    ``history`` keeps the full target series (warm-up included) so that
    repetition baselines can look back past the first matrix row.
    """

    X: pd.DataFrame
    target: pd.Series
    groups: dict[str, FeatureGroup]
    history: pd.Series
    zone: str = ""

    def __post_init__(self):
        if list(self.groups) != list(self.X.columns):
            raise DataError("group tags must cover the matrix columns in order")
        if not self.X.index.equals(self.target.index):
            raise DataError("features and target are not aligned")

    def __len__(self) -> int:
        return len(self.X)

    @property
    def index(self) -> pd.DatetimeIndex:
        return self.X.index

    @property
    def columns(self) -> list[str]:
        return list(self.X.columns)

    def present_groups(self) -> list[FeatureGroup]:
        seen = set(self.groups.values())
        return [g for g in FeatureGroup if g in seen]

    def columns_of(self, group: FeatureGroup) -> list[str]:
        return [c for c, g in self.groups.items() if g is group]

    def select(self, columns) -> "FeatureMatrix":
        columns = list(columns)
        return replace(self, X=self.X[columns], groups={c: self.groups[c] for c in columns})

    def rows(self, start=None, end=None) -> "FeatureMatrix":
        """Rows with timestamps in ``[start, end)``."""
        idx = self.X.index
        mask = np.ones(len(idx), dtype=bool)
        if start is not None:
            mask &= idx >= pd.Timestamp(start)
        if end is not None:
            mask &= idx < pd.Timestamp(end)
        return replace(self, X=self.X[mask], target=self.target[mask])

    def to_csv(self, path) -> None:
        path = Path(path)
        frame = self.X.copy()
        frame.insert(0, "target", self.target)
        frame.index = frame.index.strftime("%Y-%m-%dT%H:%M:%SZ")
        frame.index.name = "timestamp"
        frame.to_csv(path, float_format="%.17g")
        sidecar = {"zone": self.zone, "groups": {c: g.value for c, g in self.groups.items()}}
        path.with_suffix(".groups.json").write_text(json.dumps(sidecar, indent=2) + "\n")


def encode_cyclic(value, period):
    """Project a position on a cycle of length ``period`` onto the unit circle.

    Works on scalars and arrays; returns ``(sin, cos)``.
    """
    if period < 2:
        raise ConfigError(f"period must be >= 2, got {period}")
    v = np.asarray(value, dtype=float)
    if ((v < 0) | (v >= period)).any():
        raise ConfigError(f"cyclic value outside [0, {period})")
    angle = 2.0 * math.pi * v / period
    s, c = np.sin(angle), np.cos(angle)
    if v.ndim == 0:
        return float(s), float(c)
    return s, c


def make_lags(series: pd.Series, lag_hours) -> pd.DataFrame:
    """Causal shifts; ``<name>_lag<k>`` at row t holds the value at t - k hours."""
    out = {}
    for k in sorted(int(k) for k in lag_hours):
        if k <= 0:
            raise ConfigError(f"lags must be positive, got {k}")
        if k >= len(series):
            raise DegenerateError(f"lag {k} is not shorter than the series ({len(series)} rows)")
        out[f"{series.name}_lag{k}"] = series.shift(k)
    return pd.DataFrame(out, index=series.index)


def make_rolling(series: pd.Series, window: int, statistic: str, offset: int = 1) -> pd.Series:
    """Rolling mean/std over ``{t - window, ..., t - 1}`` (for the default offset of 1)."""
    if window < 2:
        raise ConfigError("window must be >= 2")
    if window >= len(series):
        raise DegenerateError(f"window {window} is not shorter than the series ({len(series)} rows)")
    roller = series.shift(offset).rolling(window, min_periods=window)
    if statistic == "mean":
        values = roller.mean()
    elif statistic == "std":
        values = roller.std()
    else:
        raise ConfigError(f"unknown rolling statistic {statistic!r}")
    return values.rename(f"{series.name}_roll{window}_{statistic}")


def calendar_fields(index: pd.DatetimeIndex) -> pd.DataFrame:
    """Local-time hour, weekday (Mon=0) and zero-based day of year for each UTC hour."""
    local = index.tz_convert(LOCAL_TZ)
    return pd.DataFrame(
        {
            "hour_of_day": local.hour.to_numpy(),
            "day_of_week": local.dayofweek.to_numpy(),
            "day_of_year": local.dayofyear.to_numpy() - 1,
        },
        index=index,
    )


def reservoir_climatology(values: pd.Series, years=None) -> pd.Series:
    """Mean level per ISO week (local time) over the given inclusive year range."""
    local = values.index.tz_convert(LOCAL_TZ)
    mask = np.ones(len(values), dtype=bool)
    if years is not None:
        lo, hi = years
        mask = (local.year >= lo) & (local.year <= hi)
        if not mask.any():
            raise DataError(f"{values.name}: no data in climatology years {lo}-{hi}")
    weeks = local.isocalendar().week.to_numpy()
    clim = pd.Series(values.to_numpy()[mask]).groupby(weeks[mask]).mean()
    return clim.reindex(range(1, 54))


def reservoir_anomaly(values: pd.Series, climatology: pd.Series) -> pd.Series:
    """Level minus the seasonal normal; ISO week 53 falls back to week 52 when unseen."""
    clim = climatology.copy()
    if np.isnan(clim.get(53, np.nan)):
        clim[53] = clim.get(52, np.nan)
    clim = clim.interpolate(limit_direction="both")
    weeks = values.index.tz_convert(LOCAL_TZ).isocalendar().week.to_numpy()
    normal = clim.reindex(weeks).to_numpy()
    return pd.Series(values.to_numpy() - normal, index=values.index, name=f"{values.name}_anomaly")


def fit_climatologies(panel: HourlyPanel, spec: FeatureSpec, years=None) -> dict[str, pd.Series]:
    """Seasonal normals for every reservoir-tagged level column present in the panel."""
    years = years if years is not None else spec.anomaly_years
    out = {}
    for col, group in spec.exogenous_column_groups.items():
        if group is FeatureGroup.RESERVOIR and col in panel.data.columns and not col.endswith("_anomaly"):
            out[col] = reservoir_climatology(panel.data[col], years)
    return out


def assemble_matrix(
    panel: HourlyPanel,
    spec: FeatureSpec,
    climatology: dict[str, pd.Series] | None = None,
) -> FeatureMatrix:
    """Build the feature matrix for a finalized panel.

    ``climatology`` supplies reservoir seasonal normals fitted elsewhere
    (normally on the training window). When omitted they are computed from the
    panel over ``spec.anomaly_years``. With a fixed climatology, every row
    depends only on panel values at earlier hours (target) or at its own hour
    (day-ahead exogenous columns).
    """
    if spec.is_empty:
        raise ConfigError("feature spec selects no features")
    if panel.data.isna().any().any():
        raise DataError("panel must be finalized (no missing values) before assembling features")

    y = panel.data[panel.target]
    pieces: list[pd.DataFrame | pd.Series] = []
    groups: dict[str, FeatureGroup] = {}

    def add(obj, group):
        frame = obj.to_frame() if isinstance(obj, pd.Series) else obj
        pieces.append(frame)
        for c in frame.columns:
            if c in groups:
                raise ConfigError(f"duplicate feature column {c!r}")
            groups[c] = group

    if spec.lag_hours:
        add(make_lags(y, spec.lag_hours), FeatureGroup.LAGS)
    for window, stat in spec.rolling_windows:
        add(make_rolling(y, int(window), stat, spec.rolling_offset), FeatureGroup.LAGS)

    if spec.cyclic_encodings or spec.weekend_flag:
        cal = calendar_fields(panel.index)
        for unit, period in spec.cyclic_encodings:
            s, c = encode_cyclic(cal[unit].to_numpy(), period)
            add(pd.DataFrame({f"{unit}_sin": s, f"{unit}_cos": c}, index=panel.index), FeatureGroup.CALENDAR)
        if spec.weekend_flag:
            add((cal["day_of_week"] >= 5).astype(float).rename("is_weekend"), FeatureGroup.CALENDAR)

    if climatology is None:
        climatology = fit_climatologies(panel, spec)
    for col, group in spec.exogenous_column_groups.items():
        if col not in panel.data.columns:
            logger.warning("%s: spec column %r not in panel (dropped upstream?)", panel.zone, col)
            continue
        add(panel.data[col].astype(float), group)
        if col in climatology:
            add(reservoir_anomaly(panel.data[col], climatology[col]), group)
    ignored = set(panel.exogenous) - set(spec.exogenous_column_groups)
    if ignored:
        logger.info("%s: panel columns without a group are ignored: %s", panel.zone, sorted(ignored))

    X = pd.concat(pieces, axis=1)
    warm = max(
        spec.warmup_hours,
        max(spec.lag_hours, default=0),
        max((w + spec.rolling_offset - 1 for w, _ in spec.rolling_windows), default=0),
    )
    if warm >= len(X):
        raise DegenerateError(f"panel of {len(X)} rows is shorter than the {warm}-hour warm-up")
    X = X.iloc[warm:]
    if X.isna().any().any():
        bad = X.columns[X.isna().any()].tolist()
        raise DataError(f"missing values after warm-up in {bad}")
    return FeatureMatrix(
        X=X.astype(float), target=y.iloc[warm:].astype(float), groups=groups,
        history=y.astype(float), zone=str(panel.zone),
    )


def group_mask(matrix: FeatureMatrix, exclude=None, keep=None) -> FeatureMatrix:
    """Column subset by group: drop one group (``exclude``) or retain a set (``keep``)."""
    if exclude is not None and keep is not None:
        raise ConfigError("pass either exclude or keep, not both")
    if exclude is not None:
        exclude = FeatureGroup(exclude)
        if exclude not in matrix.present_groups():
            logger.warning("group %s absent from matrix; nothing removed", exclude)
            return matrix
        return matrix.select([c for c, g in matrix.groups.items() if g is not exclude])
    if keep is not None:
        keep = {FeatureGroup(g) for g in keep}
        return matrix.select([c for c, g in matrix.groups.items() if g in keep])
    return matrix
