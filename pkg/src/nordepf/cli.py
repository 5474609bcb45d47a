"""Batch command-line front end.

Every command reads one JSON experiment config and writes into a run
directory::

    nordepf ingest    --config exp.json --out runs/a
    nordepf run       --config exp.json --out runs/a
    nordepf backtest  --config exp.json --out runs/a
    nordepf ablate | regimes | windows | failures  (same flags)

``nordepf synth`` writes a synthetic data set and a matching config. Log
verbosity comes from ``NORDEPF_LOG_LEVEL`` (default WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import analysis, features, metrics, models, panel, protocol, rundir, stats, synthetic
from .errors import ConfigError, DataError, MissingArtifactError, NumericalError
from .features import FeatureGroup

logger = logging.getLogger("nordepf")

LOG_ENV = "NORDEPF_LOG_LEVEL"
EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
TS_FORMAT = "%Y-%m-%dT%H:%M:%SZ"

DEFAULT_ROSTER = {"naive-24h": {}, "naive-168h": {}, "ridge": {}, "gbdt": {}}
DEFAULT_ANALYSIS = {"ablation": True, "regimes": True, "windows": True, "failures": True, "failures_k": 20}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    zones: dict[str, list[str]]
    panel: dict = field(default_factory=dict)
    features: dict = field(default_factory=dict)
    split: protocol.SplitSpec = field(default_factory=protocol.SplitSpec.benchmark_default)
    models: dict = field(default_factory=lambda: dict(DEFAULT_ROSTER))
    backtest: dict = field(default_factory=dict)
    windows: dict = field(default_factory=dict)
    analysis: dict = field(default_factory=lambda: dict(DEFAULT_ANALYSIS))
    output_dir: str | None = None
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if not d.get("zones"):
            raise ConfigError("config must list at least one zone under 'zones'")
        zones = {}
        for z, paths in d["zones"].items():
            zone = panel.ZoneId.parse(z).value
            if isinstance(paths, str):
                paths = [paths]
            resolved = []
            for p in paths:
                p = Path(p)
                if base is not None and not p.is_absolute():
                    p = base / p
                resolved.append(str(p))
            zones[zone] = resolved
        kw = {k: d[k] for k in known & set(d) if k not in ("zones", "split")}
        split = protocol.SplitSpec.from_dict(d["split"]) if "split" in d else protocol.SplitSpec.benchmark_default()
        cfg = cls(zones=zones, split=split, **kw)
        for name in cfg.models:
            models.make_forecaster(name, cfg.models[name])  # validates names and params
        try:
            cfg.seed = int(cfg.seed)
        except (TypeError, ValueError):
            raise ConfigError(f"seed must be an integer, got {cfg.seed!r}") from None
        cfg.analysis = {**DEFAULT_ANALYSIS, **cfg.analysis}
        return cfg

    def to_dict(self) -> dict:
        return {
            "zones": self.zones, "panel": self.panel, "features": self.features,
            "split": self.split.to_dict(), "models": self.models, "backtest": self.backtest,
            "windows": {k: protocol.Window.parse(v).to_list() for k, v in self.windows.items()},
            "analysis": self.analysis, "output_dir": self.output_dir, "seed": self.seed,
        }

    def zone_seed(self, zone: str) -> int:
        # Derived from the run seed and zone only, so independent of worker count.
        return int(np.random.SeedSequence([self.seed, int(zone[-1])]).generate_state(1)[0])

    def backtest_spec(self) -> protocol.BacktestSpec:
        b = {k: v for k, v in self.backtest.items() if k != "reference"}
        return protocol.BacktestSpec(**b)

    @property
    def reference(self) -> str:
        return self.backtest.get("reference", "naive-24h")


def load_config(path, out=None, seed=None, zones=None) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    cfg = ExperimentConfig.from_dict(raw, base=path.parent)
    if seed is not None:
        cfg.seed = int(seed)
    if out is not None:
        cfg.output_dir = str(out)
    if cfg.output_dir is None:
        raise ConfigError("no output directory: pass --out or set output_dir")
    if zones:
        wanted = [panel.ZoneId.parse(z).value for z in zones]
        missing = [z for z in wanted if z not in cfg.zones]
        if missing:
            raise ConfigError(f"zones {missing} not in config")
        cfg.zones = {z: cfg.zones[z] for z in wanted}
    return cfg


# ---------------------------------------------------------------------------
# shared per-zone helpers
# ---------------------------------------------------------------------------


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(f"{path} is missing; run `nordepf {producer}` first")
    return path


def _panel_path(out: Path, zone: str) -> Path:
    return out / "panels" / f"{zone}.csv"


@dataclass
class ZoneData:
    zone: str
    matrix: features.FeatureMatrix
    train: features.FeatureMatrix
    val: features.FeatureMatrix
    test: features.FeatureMatrix
    spec: features.FeatureSpec
    counts: dict


def _feature_spec(cfg: ExperimentConfig, pan: panel.HourlyPanel) -> features.FeatureSpec:
    overrides = dict(cfg.features)
    if "exogenous_column_groups" in overrides:
        overrides["exogenous_column_groups"] = {
            c: FeatureGroup(g) for c, g in overrides["exogenous_column_groups"].items() if c in pan.data.columns
        }
    spec = features.FeatureSpec.from_dict({k: v for k, v in overrides.items() if k != "exogenous_column_groups"})
    groups = overrides.get("exogenous_column_groups") or features.infer_groups(pan.exogenous)
    return replace(spec, exogenous_column_groups=groups)


def zone_data(cfg: ExperimentConfig, out: Path, zone: str) -> ZoneData:
    pan = panel.read_panel(_require(_panel_path(out, zone), "ingest"))
    spec = _feature_spec(cfg, pan)
    if spec.anomaly_years is None:
        # Seasonal normals come from the training window only.
        tr = cfg.split.train
        fit_on = pan.with_data(pan.data[(pan.index >= tr.start) & (pan.index < tr.end)])
        clim = features.fit_climatologies(fit_on, spec)
    else:
        clim = features.fit_climatologies(pan, spec)
    matrix = features.assemble_matrix(pan, spec, climatology=clim)
    train, val, test, counts = protocol.fixed_split(matrix, cfg.split)
    return ZoneData(zone, matrix, train, val, test, spec, counts)


def _ts_strings(index: pd.DatetimeIndex) -> np.ndarray:
    return np.asarray(index.strftime(TS_FORMAT))


def _state_columns(zd: ZoneData, cfg: ExperimentConfig) -> pd.DataFrame:
    """Reservoir anomaly, TTF and lag-24 price at each test hour."""
    a = cfg.analysis
    cols = zd.test.columns
    res = a.get("reservoir_column") or next(
        (c for c in zd.test.columns_of(FeatureGroup.RESERVOIR) if c.endswith("_anomaly")), None
    )
    ttf = a.get("ttf_column") or next((c for c in zd.test.columns_of(FeatureGroup.COMMODITIES) if "ttf" in c.lower()), None)
    lag = f"{zd.matrix.target.name}_lag24"
    for name, c in (("reservoir anomaly", res), ("TTF", ttf)):
        if c is None or c not in cols:
            raise DataError(f"{zd.zone}: no {name} column in the feature matrix")
    frame = zd.test.X[[res, ttf]].copy()
    frame.columns = ["reservoir_anomaly", "ttf"]
    if lag in cols:
        frame["price_lag24"] = zd.test.X[lag]
    return frame


def _map_zones(cfg: ExperimentConfig, fn, jobs: int) -> list:
    zones = list(cfg.zones)
    if jobs <= 1 or len(zones) == 1:
        return [fn(cfg, z) for z in zones]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker) as pool:
        return list(pool.map(fn, [cfg] * len(zones), zones))


def _init_worker() -> None:
    configure_logging()


# ---------------------------------------------------------------------------
# per-zone workers (module level so they pickle)
# ---------------------------------------------------------------------------


def _ingest_zone(cfg: ExperimentConfig, zone: str):
    p = cfg.panel
    pan, report = panel.load_zone(
        zone, cfg.zones[zone], start=p.get("start"), end=p.get("end"),
        sparse_threshold=float(p.get("sparse_threshold", 0.5)),
    )
    report["descriptive"] = panel.descriptive_stats(pan)
    return pan, report


def _run_zone(cfg: ExperimentConfig, zone: str):
    out = Path(cfg.output_dir)
    zd = zone_data(cfg, out, zone)
    seed = cfg.zone_seed(zone)
    y = zd.test.target.to_numpy()
    fitted, preds, rows, extras = {}, {}, [], {}
    for name, params in cfg.models.items():
        f = models.make_forecaster(name, params, seed=seed).fit(zd.train, zd.val)
        fitted[name] = f
        preds[name] = f.predict(zd.test)
        rows.append({"zone": zone, "model": name, **metrics.evaluate(y, preds[name]).to_dict()})
        if isinstance(f, models.GBDTForecaster):
            extras[name] = {"best_round": f.best_round, "log": f.model.log}
    dm = stats.pairwise_matrix(y, preds, zone=zone) if len(preds) > 1 else pd.DataFrame()
    return {
        "zone": zone, "metrics": rows, "dm": dm, "models": {k: v.to_dict() for k, v in fitted.items()},
        "extras": extras, "predictions": pd.DataFrame({"timestamp": _ts_strings(zd.test.index), "actual": y, **preds}),
        "counts": zd.counts, "feature_spec": zd.spec.to_dict(), "columns": zd.matrix.columns,
    }


def _load_models(cfg: ExperimentConfig, out: Path, zone: str) -> dict:
    loaded = {}
    for name in cfg.models:
        loaded[name] = models.load_forecaster(_require(out / "models" / zone / f"{name}.json", "run"), name=name)
    return loaded


def _backtest_zone(cfg: ExperimentConfig, zone: str):
    out = Path(cfg.output_dir)
    spec = cfg.backtest_spec()
    zd = zone_data(cfg, out, zone)
    test = cfg.split.test
    if spec.refit_mode is protocol.RefitMode.FROZEN:
        roster = _load_models(cfg, out, zone)
        return protocol.rolling_backtest(
            zd.matrix, spec, roster, cfg.reference, test.start, test.end, fit_end=cfg.split.validation.end,
        ).table
    seed = cfg.zone_seed(zone)
    factories = {n: (lambda n=n, p=p: models.make_forecaster(n, p, seed=seed)) for n, p in cfg.models.items()}
    return protocol.rolling_backtest(
        zd.matrix, spec, factories, cfg.reference, test.start, test.end,
        train_start=cfg.split.train.start, validation_hours=cfg.split.validation.hours,
    ).table


def _gbdt_name(cfg: ExperimentConfig) -> str:
    names = [n for n in cfg.models if n == "gbdt"]
    if not names:
        raise ConfigError("this command needs 'gbdt' in the model roster")
    return names[0]


def _ablate_zone(cfg: ExperimentConfig, zone: str):
    out = Path(cfg.output_dir)
    name = _gbdt_name(cfg)
    full = models.load_forecaster(_require(out / "models" / zone / f"{name}.json", "run"), name=name)
    zd = zone_data(cfg, out, zone)
    rounds, config = full.best_round, full.model.config
    logo = analysis.logo_ablation(zd.train, zd.test, rounds, config)
    only = analysis.group_only(zd.train, zd.test, rounds, config)
    table = pd.concat([logo.table, only.table[only.table.variant != "full"]], ignore_index=True)
    preds = pd.DataFrame({"timestamp": _ts_strings(zd.test.index), "actual": zd.test.target.to_numpy(),
                          **logo.forecasts, **{k: v for k, v in only.forecasts.items() if k != "full"}})
    return table, preds


def _windows_zone(cfg: ExperimentConfig, zone: str):
    out = Path(cfg.output_dir)
    zd = zone_data(cfg, out, zone)
    name = _gbdt_name(cfg)
    params, seed = cfg.models[name], cfg.zone_seed(zone)
    return protocol.window_experiment(
        zd.matrix, cfg.windows, cfg.split.validation, cfg.split.test,
        lambda: models.make_forecaster(name, params, seed=seed),
    )


def _read_predictions(path: Path, producer: str) -> pd.DataFrame:
    frame = pd.read_csv(_require(path, producer))
    frame.index = pd.DatetimeIndex(pd.to_datetime(frame["timestamp"], utc=True))
    return frame


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_ingest(cfg: ExperimentConfig, jobs: int = 1) -> None:
    out = Path(cfg.output_dir)
    for z, paths in cfg.zones.items():
        for p in paths:
            if not Path(p).exists():
                raise DataError(f"{z}: input file {p} not found")
    results = _map_zones(cfg, _ingest_zone, jobs)
    with rundir.stage(out, "ingest", cfg.to_dict()) as st:
        integrity = {}
        for zone, (pan, report) in zip(cfg.zones, results):
            panel.write_panel(pan, st.path(f"panels/{zone}.csv"))
            integrity[zone] = report
        st.write_json("panels/integrity.json", integrity)


def cmd_run(cfg: ExperimentConfig, jobs: int = 1) -> None:
    out = Path(cfg.output_dir)
    for z in cfg.zones:
        _require(_panel_path(out, z), "ingest")
    results = _map_zones(cfg, _run_zone, jobs)
    with rundir.stage(out, "run", cfg.to_dict()) as st:
        rows, dms, splits = [], [], {}
        for r in results:
            z = r["zone"]
            rows.extend(r["metrics"])
            dms.append(r["dm"])
            splits[z] = r["counts"]
            for name, d in r["models"].items():
                st.write_text(f"models/{z}/{name}.json", json.dumps(d) + "\n")
            for name, extra in r["extras"].items():
                st.write_csv(f"models/{z}/{name}_log.csv", extra["log"])
            st.write_json(f"models/{z}/feature_spec.json", r["feature_spec"])
            st.write_csv(f"predictions/{z}.csv", r["predictions"])
        st.write_csv("tables/metrics.csv", pd.DataFrame(rows, columns=["zone", "model", *metrics.CSV_FIELDS]))
        dm = pd.concat(dms, ignore_index=True) if dms else pd.DataFrame()
        st.write_csv("tables/dm.csv", dm)
        st.write_json("tables/dm.json", json.loads(dm.to_json(orient="records")))
        st.write_json("tables/split_counts.json", splits)


def cmd_backtest(cfg: ExperimentConfig, jobs: int = 1) -> None:
    out = Path(cfg.output_dir)
    if cfg.reference not in cfg.models:
        raise ConfigError(f"backtest reference {cfg.reference!r} is not in the model roster")
    tables = _map_zones(cfg, _backtest_zone, jobs)
    table = pd.concat(tables, ignore_index=True)
    result = protocol.BacktestResult(table, protocol.summarize_backtest(table, cfg.reference))
    with rundir.stage(out, "backtest", cfg.to_dict()) as st:
        result.to_csv(st.path("tables/backtest.csv"))
        st.write_json("tables/backtest_summary.json", result.summary)


def cmd_ablate(cfg: ExperimentConfig, jobs: int = 1) -> None:
    out = Path(cfg.output_dir)
    results = _map_zones(cfg, _ablate_zone, jobs)
    with rundir.stage(out, "ablate", cfg.to_dict()) as st:
        for zone, (_, preds) in zip(cfg.zones, results):
            st.write_csv(f"predictions/{zone}_ablation.csv", preds)
        st.write_csv("tables/ablation.csv", pd.concat([t for t, _ in results], ignore_index=True))


REGIME_MODELS = {"full": None, "lags+calendar": "lags-plus-calendar"}


def cmd_regimes(cfg: ExperimentConfig, jobs: int = 1) -> None:
    out = Path(cfg.output_dir)
    name = _gbdt_name(cfg)
    cells, marg_rows, marginals = [], [], {}
    for zone in cfg.zones:
        main = _read_predictions(out / "predictions" / f"{zone}.csv", "run")
        abl = _read_predictions(out / "predictions" / f"{zone}_ablation.csv", "ablate")
        zd = zone_data(cfg, out, zone)
        state = _state_columns(zd, cfg).reindex(main.index)
        labels, medians = analysis.regime_partition(state["reservoir_anomaly"], state["ttf"])
        forecasts = {"full": main[name].to_numpy(), "lags+calendar": abl["lags-plus-calendar"].to_numpy()}
        rep = analysis.regime_metrics(labels, main["actual"].to_numpy(), forecasts, medians=medians, zone=zone)
        cells.append(rep.cells)
        marginals[zone] = rep.to_dict()
        for model, m in rep.marginals.items():
            marg_rows.append({"zone": zone, "model": model, **m})
    with rundir.stage(out, "regimes", cfg.to_dict()) as st:
        # Full precision so the marginals can be recomputed exactly from the cells.
        st.write_csv("tables/regimes.csv", pd.concat(cells, ignore_index=True), float_format="%.17g")
        st.write_csv("tables/regime_marginals.csv", pd.DataFrame(marg_rows))
        st.write_json("tables/regime_marginals.json", marginals)


def cmd_windows(cfg: ExperimentConfig, jobs: int = 1) -> None:
    out = Path(cfg.output_dir)
    if not cfg.windows:
        raise ConfigError("config defines no training windows")
    tables = _map_zones(cfg, _windows_zone, jobs)
    with rundir.stage(out, "windows", cfg.to_dict()) as st:
        st.write_csv("tables/windows.csv", pd.concat(tables, ignore_index=True))


def cmd_failures(cfg: ExperimentConfig, jobs: int = 1) -> None:
    out = Path(cfg.output_dir)
    name = _gbdt_name(cfg)
    k = int(cfg.analysis.get("failures_k", 20))
    records, tallies = [], {}
    for zone in cfg.zones:
        preds = _read_predictions(out / "predictions" / f"{zone}.csv", "run")
        zd = zone_data(cfg, out, zone)
        state = _state_columns(zd, cfg)
        recs, tally = analysis.worst_errors(preds["actual"], preds[name].to_numpy(), state, k=k)
        recs.insert(0, "zone", zone)
        records.append(recs)
        tallies[zone] = tally
    with rundir.stage(out, "failures", cfg.to_dict()) as st:
        st.write_csv("tables/failures.csv", pd.concat(records, ignore_index=True))
        st.write_json("tables/failures_summary.json", tallies)


COMMANDS = {
    "ingest": cmd_ingest,
    "run": cmd_run,
    "backtest": cmd_backtest,
    "ablate": cmd_ablate,
    "regimes": cmd_regimes,
    "windows": cmd_windows,
    "failures": cmd_failures,
}


COMMAND_HELP = {
    "ingest": "build finalized hourly panels and the integrity report",
    "run": "fit the model roster on the fixed split; metrics and DM tables",
    "backtest": "weekly rolling-origin backtest against the reference model",
    "ablate": "leave-one-group-out and group-only feature ablation",
    "regimes": "reservoir/TTF regime cells and marginal contrasts",
    "windows": "compare training windows on a shared validation and test set",
    "failures": "largest absolute test errors with state diagnostics",
}


def cmd_synth(out: Path, zones: list[str], seed: int) -> Path:
    """Write synthetic snapshots under ``out/data`` and a config at ``out/experiment.json``."""
    cfg = synthetic.SyntheticConfig(seed=seed)
    data = out / "data"
    for z in zones:
        synthetic.write_zone(z, data, cfg)
    exp = synthetic.default_experiment("data", zones, seed=seed)
    path = out / "experiment.json"
    path.write_text(rundir.canonical_json(exp))
    return path


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def configure_logging() -> None:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _zones_arg(text: str) -> list[str]:
    return [z.strip() for z in text.split(",") if z.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nordepf", description="Day-ahead price forecasting benchmark")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=COMMAND_HELP[name])
        p.add_argument("--config", required=True, help="experiment JSON")
        p.add_argument("--out", help="run directory (overrides output_dir)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--zones", type=_zones_arg, help="comma-separated subset of zones")
        p.add_argument("--jobs", type=int, default=1, help="parallel zone workers")
    p = sub.add_parser("synth", help="write a synthetic data set and experiment config")
    p.add_argument("--out", required=True, help="directory for data/ and experiment.json")
    p.add_argument("--zones", type=_zones_arg, default=["NO1"], help="comma-separated zones (default NO1)")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    return parser


def main(argv=None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            path = cmd_synth(Path(args.out), [panel.ZoneId.parse(z).value for z in args.zones], args.seed)
            print(path)
            return EXIT_OK
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg = load_config(args.config, out=args.out, seed=args.seed, zones=args.zones)
        COMMANDS[args.command](cfg, jobs=args.jobs)
    except ConfigError as exc:
        print(f"nordepf {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"nordepf {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"nordepf {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
