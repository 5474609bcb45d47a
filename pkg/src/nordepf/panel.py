"""Leakage-free hourly panels built from mixed-frequency CSV snapshots.

Every zone gets its own UTC hourly spine. Lower-frequency sources (daily
commodity closes, weekly reservoir statistics) are forward-filled onto it so
that each hour carries the most recent value published at or before that hour.
Columns that are only observable after delivery are removed, sparse columns
are dropped and the remaining edge gaps are filled forward then backward.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (
    AlignmentError,
    ConfigError,
    DataError,
    EmptyInputError,
    InsufficientDataError,
    UnfillableColumnError,
)

logger = logging.getLogger(__name__)

HOUR = pd.Timedelta(hours=1)
WARMUP_HOURS = 168
TARGET = "price"


class ZoneId(str, Enum):
    NO1 = "NO1"
    NO2 = "NO2"
    NO3 = "NO3"
    NO4 = "NO4"
    NO5 = "NO5"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "ZoneId":
        try:
            return cls(str(text).upper())
        except ValueError:
            raise ConfigError(f"unknown bidding zone {text!r}; expected one of NO1..NO5") from None


class Frequency(str, Enum):
    HOURLY = "hourly"
    DAILY = "daily"
    WEEKLY = "weekly"

    @property
    def nominal(self) -> pd.Timedelta:
        return {"hourly": HOUR, "daily": pd.Timedelta(days=1), "weekly": pd.Timedelta(weeks=1)}[self.value]


class Availability(str, Enum):
    DAY_AHEAD = "day-ahead"
    POST_DELIVERY = "post-delivery"


@dataclass(frozen=True)
class ColumnMeta:
    frequency: Frequency
    availability: Availability
    unit: str = ""
    # How the snapshot timestamps relate to the moment a value becomes usable.
    timestamp_convention: str = "publication"
    effective_offset_hours: float = 0.0

    def to_dict(self) -> dict:
        return {
            "frequency": self.frequency.value,
            "availability": self.availability.value,
            "unit": self.unit,
            "timestamp_convention": self.timestamp_convention,
            "effective_offset_hours": self.effective_offset_hours,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ColumnMeta":
        try:
            return cls(
                frequency=Frequency(d["frequency"]),
                availability=Availability(d["availability"]),
                unit=d.get("unit", ""),
                timestamp_convention=d.get("timestamp_convention", "publication"),
                effective_offset_hours=float(d.get("effective_offset_hours", 0.0)),
            )
        except (KeyError, ValueError) as exc:
            raise DataError(f"invalid column metadata {d!r}: {exc}") from None


@dataclass(frozen=True)
class RawSeries:
    """One source series as published, before alignment.

    ``observations`` is a float Series indexed by tz-aware UTC timestamps that
    are already shifted to the moment the value becomes available.
    """

    name: str
    meta: ColumnMeta
    observations: pd.Series

    def __post_init__(self):
        idx = self.observations.index
        if not isinstance(idx, pd.DatetimeIndex) or idx.tz is None:
            raise DataError(f"{self.name}: timestamps must be a tz-aware DatetimeIndex")
        if len(idx) > 1:
            steps = np.diff(idx.as_unit("ns").asi8)
            if (steps <= 0).any():
                raise DataError(f"{self.name}: timestamps are not strictly increasing")
            # Gaps are allowed; spacing tighter than ~90% of nominal is not.
            if steps.min() < 0.9 * self.meta.frequency.nominal.value:
                raise DataError(
                    f"{self.name}: observation spacing shorter than declared {self.meta.frequency.value} frequency"
                )

    @property
    def frequency(self) -> Frequency:
        return self.meta.frequency

    @property
    def availability(self) -> Availability:
        return self.meta.availability


@dataclass(frozen=True)
class HourlyPanel:
    """Zone-scoped hourly table: target price plus exogenous columns.

    ``data`` holds the target in column ``target`` and every exogenous column;
    ``column_meta`` has an entry for each of them.
    """

    zone: ZoneId
    data: pd.DataFrame
    column_meta: dict[str, ColumnMeta]
    target: str = TARGET

    def __post_init__(self):
        idx = self.data.index
        if not isinstance(idx, pd.DatetimeIndex) or idx.tz is None:
            raise DataError("panel index must be tz-aware")
        if idx.has_duplicates:
            raise DataError("panel index has duplicate timestamps")
        if len(idx) > 1 and not (np.diff(idx.as_unit("ns").asi8) == HOUR.value).all():
            raise DataError("panel index is not contiguous hourly")
        if self.target not in self.data.columns:
            raise DataError(f"panel lacks target column {self.target!r}")
        missing = set(self.data.columns) - set(self.column_meta)
        if missing:
            raise DataError(f"no metadata for columns {sorted(missing)}")

    @property
    def index(self) -> pd.DatetimeIndex:
        return self.data.index

    @property
    def exogenous(self) -> list[str]:
        return [c for c in self.data.columns if c != self.target]

    def __len__(self) -> int:
        return len(self.data)

    def with_data(self, data: pd.DataFrame) -> "HourlyPanel":
        meta = {c: self.column_meta[c] for c in data.columns}
        return replace(self, data=data, column_meta=meta)


def build_hourly_index(start, end) -> pd.DatetimeIndex:
    """Contiguous UTC hours in ``[start, end)``.

    >>> len(build_hourly_index("2019-01-01T00Z", "2019-01-01T03Z"))
    3
    """
    start, end = pd.Timestamp(start), pd.Timestamp(end)
    start = start.tz_localize("UTC") if start.tz is None else start.tz_convert("UTC")
    end = end.tz_localize("UTC") if end.tz is None else end.tz_convert("UTC")
    for ts in (start, end):
        if ts != ts.floor("h"):
            raise AlignmentError(f"{ts} is not aligned to a whole hour")
    if not start < end:
        raise AlignmentError(f"start {start} must precede end {end}")
    return pd.date_range(start, end, freq="h", inclusive="left", name="timestamp")


def align_forward_fill(series: RawSeries, index: pd.DatetimeIndex) -> pd.Series:
    """Map a series onto ``index`` carrying the latest observation at or before each hour.

    Hours before the first observation are NaN. Only observations with a
    timestamp <= t can influence the value at t.
    """
    obs = series.observations.dropna()
    if obs.empty:
        raise EmptyInputError(f"{series.name}: no observations")
    stamps = obs.index.tz_convert("UTC").as_unit("ns").asi8
    pos = np.searchsorted(stamps, index.as_unit("ns").asi8, side="right") - 1
    values = np.where(pos >= 0, obs.to_numpy(dtype=float)[np.clip(pos, 0, None)], np.nan)
    if np.isnan(values).all():
        logger.warning("%s: no observation overlaps the panel index", series.name)
    return pd.Series(values, index=index, name=series.name)


def align_exact(series: RawSeries, index: pd.DatetimeIndex) -> pd.Series:
    """Hourly series onto the spine without filling; gaps stay NaN."""
    obs = series.observations
    if obs.dropna().empty:
        raise EmptyInputError(f"{series.name}: no observations")
    out = obs.astype(float).reindex(index.tz_convert(obs.index.tz)).to_numpy()
    return pd.Series(out, index=index, name=series.name)


def leakage_filter(panel: HourlyPanel) -> tuple[HourlyPanel, list[str]]:
    """Remove every post-delivery exogenous column. Returns the panel and the removed names."""
    removed = [
        c for c in panel.exogenous if panel.column_meta[c].availability is Availability.POST_DELIVERY
    ]
    if removed:
        logger.info("%s: leakage filter removed %s", panel.zone, removed)
    return panel.with_data(panel.data.drop(columns=removed)), removed


def drop_sparse_columns(panel: HourlyPanel, threshold: float = 0.5) -> tuple[HourlyPanel, dict[str, float]]:
    """Drop exogenous columns whose missing fraction strictly exceeds ``threshold``.

    Returns the panel and a log mapping each dropped column to its missing fraction.
    """
    if not 0 < threshold <= 1:
        raise ConfigError(f"threshold must be in (0, 1], got {threshold}")
    frac = panel.data[panel.exogenous].isna().mean()
    dropped = {c: float(f) for c, f in frac.items() if f > threshold}
    if dropped:
        logger.info("%s: dropping sparse columns %s", panel.zone, dropped)
    return panel.with_data(panel.data.drop(columns=list(dropped))), dropped


def fill_edges(panel: HourlyPanel) -> tuple[HourlyPanel, dict[str, int]]:
    """Forward-then-back fill every column; returns the panel and per-column fill counts."""
    data = panel.data
    empty = [c for c in data.columns if data[c].isna().all()]
    if empty:
        raise UnfillableColumnError(f"columns with no observed value: {empty}")
    counts = {c: int(n) for c, n in data.isna().sum().items() if n}
    filled = data.ffill().bfill()
    return panel.with_data(filled), counts


def build_panel(
    zone,
    target: RawSeries,
    exogenous: list[RawSeries],
    start=None,
    end=None,
    sparse_threshold: float = 0.5,
) -> tuple[HourlyPanel, dict]:
    """Full pipeline: spine, alignment, leakage filter, sparse drop, edge fill.

    The spine runs from the first to the last target hour unless ``start`` /
    ``end`` are given. Returns the finalized panel and an integrity report.
    """
    zone = ZoneId.parse(zone)
    if target.frequency is not Frequency.HOURLY:
        raise DataError("target price must be an hourly series")
    obs = target.observations.dropna()
    if obs.empty:
        raise EmptyInputError("target has no observations")
    if start is None:
        start = obs.index[0].tz_convert("UTC").floor("h")
    if end is None:
        end = obs.index[-1].tz_convert("UTC").floor("h") + HOUR
    index = build_hourly_index(start, end)

    columns = {TARGET: align_exact(target, index)}
    meta = {TARGET: target.meta}
    for s in exogenous:
        if s.name in columns:
            raise DataError(f"duplicate column {s.name!r}")
        aligned = align_exact(s, index) if s.frequency is Frequency.HOURLY else align_forward_fill(s, index)
        columns[s.name] = aligned
        meta[s.name] = s.meta
    panel = HourlyPanel(zone=zone, data=pd.DataFrame(columns, index=index), column_meta=meta)

    panel, leaked = leakage_filter(panel)
    panel, sparse = drop_sparse_columns(panel, sparse_threshold)
    panel, fills = fill_edges(panel)

    warm_end = index[min(WARMUP_HOURS, len(index)) - 1] + HOUR
    report = {
        "zone": str(zone),
        "rows": len(panel),
        "index_start": index[0].isoformat(),
        "index_end_exclusive": (index[-1] + HOUR).isoformat(),
        "leakage_removed": leaked,
        "sparse_dropped": sparse,
        "sparse_threshold": sparse_threshold,
        "fill_counts": fills,
        "warmup": {"start": index[0].isoformat(), "end_exclusive": warm_end.isoformat(), "hours": WARMUP_HOURS},
        "timestamp_conventions": {
            c: {"convention": m.timestamp_convention, "effective_offset_hours": m.effective_offset_hours}
            for c, m in meta.items()
        },
        "columns": panel.exogenous,
    }
    return panel, report


def _moment_stats(x: np.ndarray) -> tuple[float, float]:
    centered = x - x.mean()
    m2 = np.mean(centered**2)
    if m2 == 0:
        return 0.0, float("nan")
    skew = np.mean(centered**3) / m2**1.5
    kurt = np.mean(centered**4) / m2**2
    return float(skew), float(kurt)


def descriptive_stats(panel: HourlyPanel) -> dict:
    """Summary of the target: moments, negative-price share and calendar-year means.

    Kurtosis is the raw fourth standardized moment (3 for a normal
    distribution). Skewness and kurtosis use population moments.
    """
    y = panel.data[panel.target].dropna()
    if len(y) < 4:
        raise InsufficientDataError(f"need at least 4 observations, got {len(y)}")
    x = y.to_numpy(dtype=float)
    skew, kurt = _moment_stats(x)
    annual = y.groupby(y.index.year).mean()
    return {
        "zone": str(panel.zone),
        "n": int(len(x)),
        "mean": float(x.mean()),
        "std": float(x.std(ddof=1)),
        "skewness": skew,
        "kurtosis": kurt,
        "negative_share": float((x < 0).mean()),
        "annual_means": {int(k): float(v) for k, v in annual.items()},
    }


# ---------------------------------------------------------------------------
# snapshot I/O
# ---------------------------------------------------------------------------


def schema_path_for(csv_path: Path) -> Path:
    return Path(csv_path).with_suffix(".schema.json")


def read_snapshot(csv_path, schema_path=None) -> list[RawSeries]:
    """Read one CSV snapshot and its schema sidecar into raw series.

    The sidecar is JSON of the form ``{"columns": {name: {"frequency": ...,
    "availability": ..., "unit": ..., "effective_offset_hours": ...}}}``.
    ``effective_offset_hours`` shifts the stamped times to the moment each
    value becomes usable. Errors name the offending CSV line.
    """
    csv_path = Path(csv_path)
    schema_path = Path(schema_path) if schema_path else schema_path_for(csv_path)
    if not csv_path.exists():
        raise DataError(f"{csv_path}: file not found")
    if not schema_path.exists():
        raise DataError(f"{schema_path}: schema sidecar not found")
    try:
        schema = json.loads(schema_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{schema_path}: invalid JSON ({exc})") from None

    raw = pd.read_csv(csv_path, dtype=str, keep_default_na=False)
    if raw.shape[1] < 2:
        raise DataError(f"{csv_path}: need a timestamp column and at least one value column")
    ts_col = raw.columns[0]
    stamps = pd.to_datetime(raw[ts_col], utc=True, errors="coerce", format="ISO8601")
    bad = np.flatnonzero(stamps.isna().to_numpy())
    if bad.size:
        lines = (bad[:5] + 2).tolist()
        raise DataError(f"{csv_path}: unparseable timestamp on line(s) {lines}")

    col_schema = schema.get("columns", {})
    series = []
    for name in raw.columns[1:]:
        if name not in col_schema:
            raise DataError(f"{csv_path}: column {name!r} missing from schema {schema_path.name}")
        meta = ColumnMeta.from_dict(col_schema[name])
        text = raw[name].str.strip()
        values = pd.to_numeric(text, errors="coerce")
        bad = np.flatnonzero((values.isna() & text.ne("") & ~text.str.lower().eq("nan")).to_numpy())
        if bad.size:
            lines = (bad[:5] + 2).tolist()
            raise DataError(f"{csv_path}: non-numeric value in column {name!r} on line(s) {lines}")
        s = pd.Series(values.to_numpy(dtype=float), index=pd.DatetimeIndex(stamps), name=name).dropna()
        if meta.effective_offset_hours:
            s.index = s.index + pd.Timedelta(hours=meta.effective_offset_hours)
        try:
            series.append(RawSeries(name=name, meta=meta, observations=s))
        except DataError as exc:
            raise DataError(f"{csv_path}: {exc}") from None
    return series


def load_zone(zone, csv_paths, start=None, end=None, sparse_threshold: float = 0.5) -> tuple[HourlyPanel, dict]:
    """Read every snapshot for a zone and build its finalized panel."""
    all_series: list[RawSeries] = []
    for p in csv_paths:
        all_series.extend(read_snapshot(p))
    targets = [s for s in all_series if s.name == TARGET]
    if len(targets) != 1:
        raise DataError(f"{zone}: expected exactly one {TARGET!r} column across snapshots, found {len(targets)}")
    exog = [s for s in all_series if s.name != TARGET]
    return build_panel(zone, targets[0], exog, start=start, end=end, sparse_threshold=sparse_threshold)


def write_panel(panel: HourlyPanel, csv_path) -> None:
    """Write the panel CSV plus a schema sidecar so it can be reloaded losslessly."""
    csv_path = Path(csv_path)
    frame = panel.data.copy()
    frame.index = frame.index.strftime("%Y-%m-%dT%H:%M:%SZ")
    frame.index.name = "timestamp"
    frame.to_csv(csv_path, float_format="%.17g")
    sidecar = {"zone": str(panel.zone), "target": panel.target,
               "columns": {c: m.to_dict() for c, m in panel.column_meta.items()}}
    schema_path_for(csv_path).write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def read_panel(csv_path) -> HourlyPanel:
    csv_path = Path(csv_path)
    sidecar_path = schema_path_for(csv_path)
    if not csv_path.exists() or not sidecar_path.exists():
        raise DataError(f"{csv_path}: finalized panel not found")
    sidecar = json.loads(sidecar_path.read_text())
    frame = pd.read_csv(csv_path, index_col=0)
    frame.index = pd.DatetimeIndex(pd.to_datetime(frame.index, utc=True), name="timestamp", freq="h")
    meta = {c: ColumnMeta.from_dict(m) for c, m in sidecar["columns"].items()}
    return HourlyPanel(zone=ZoneId.parse(sidecar["zone"]), data=frame.astype(float),
                       column_meta=meta, target=sidecar.get("target", TARGET))
