"""Command-line front end: ingest, build, select, fit, diagnose, report, pipeline.

Exit codes: 0 success, 2 ingest error, 3 order-selection failure, 4 numerical
failure (singular or undersized design, unit root in a multiplier).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as dt
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .ardl import (
    REGRESSORS,
    ArdlError,
    ArdlOrders,
    Target,
    dynamic_multipliers,
    fit_ardl,
    long_run_multiplier,
)
from .diagnostics import DegenerateInputError, diagnose
from .osv import OsvError, read_events_csv, scan_snapshot, write_events_csv
from .selection import SelectionError, select_orders
from .series import (
    DEFAULT_WINDOW,
    Granularity,
    aggregate,
    descriptive_report,
    ecosystem_breakdown,
    read_series_csv,
    write_series_csv,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger("osvardl")

EXIT_OK = 0
EXIT_INGEST = 2
EXIT_SELECTION = 3
EXIT_NUMERICAL = 4

TARGET_LABELS = {Target.MAL_FREQ: "Frequency", Target.MAL_SHARE: "Share"}


@dataclasses.dataclass
class RunConfig:
    snapshot_path: Path | None = None
    events_path: Path | None = None
    window_start: dt.date = DEFAULT_WINDOW[0]
    window_end: dt.date = DEFAULT_WINDOW[1]
    granularities: tuple[Granularity, ...] = tuple(Granularity)
    target: str = "both"
    p_max: int = 30
    output_dir: Path = Path("out")
    seed: int = 0
    jobs: int = 1
    stop_rule: str = "current"
    partial_weeks: bool = False
    ma_window: int = 9
    dm_horizon: int = 50
    orders: ArdlOrders | None = None

    def __post_init__(self):
        if self.window_start >= self.window_end:
            raise ValueError("window_start must precede window_end")
        if self.p_max < 1:
            raise ValueError("p_max must be at least 1")
        if self.target not in ("freq", "share", "both"):
            raise ValueError("target must be freq, share or both")

    @property
    def targets(self) -> tuple[Target, ...]:
        if self.target == "both":
            return (Target.MAL_FREQ, Target.MAL_SHARE)
        return (Target(self.target),)

    def model_dir(self, granularity: Granularity, target: Target) -> Path:
        return self.output_dir / "models" / f"{granularity.value}_{target.value}"


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- ingest/build


def cmd_ingest(config: RunConfig) -> int:
    if config.snapshot_path is None:
        logger.error("ingest needs --snapshot")
        return EXIT_INGEST
    try:
        scan = scan_snapshot(config.snapshot_path)
    except OsvError as exc:
        logger.error("ingest failed: %s", exc)
        return EXIT_INGEST
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_events_csv(scan.rows, out / "events.csv")
    breakdown = ecosystem_breakdown(scan.rows)
    # Share is rounded to two decimals for the human-readable breakdown.
    write_csv(
        out / "breakdown.csv",
        ("ecosystem", "all_entries", "malware_entries", "malware_share"),
        ((b.ecosystem.value, b.all_entries, b.malware_entries, f"{b.malware_share:.2f}")
         for b in breakdown),
    )
    write_json(out / "ingest.json", {
        "records_read": scan.records_read,
        "event_rows": len(scan.rows),
        "dropped_out_of_scope": scan.dropped,
        "dropped_by_directory": dict(sorted(scan.dropped_by_ecosystem.items())),
        "unreadable": scan.unreadable,
    })
    print(f"records read: {scan.records_read}; event rows: {len(scan.rows)}; "
          f"dropped (other ecosystems): {scan.dropped}; unreadable: {scan.unreadable}")
    return EXIT_OK


def _load_events(config: RunConfig):
    path = config.events_path or config.output_dir / "events.csv"
    if not path.exists():
        rc = cmd_ingest(config)
        if rc != EXIT_OK:
            raise OsvError(f"no events available at {path}")
    return read_events_csv(path)


def cmd_build(config: RunConfig) -> int:
    try:
        rows = _load_events(config)
    except (OsvError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_INGEST
    for gran in config.granularities:
        bundle = aggregate(rows, gran, config.window_start, config.window_end, config.partial_weeks)
        write_series_csv(bundle, config.output_dir / f"series_{gran.value}.csv")
        report = descriptive_report(bundle, config.ma_window)
        write_csv(
            config.output_dir / f"descriptive_{gran.value}.csv",
            ("series", "median", "mean", "min", "max"),
            ((s.name, s.median, s.mean, s.min, s.max) for s in report.summaries),
        )
        write_csv(
            config.output_dir / f"moving_average_{gran.value}.csv",
            ("period", "mal_share", "moving_average"),
            zip(bundle.periods, bundle.mal_share, report.share_moving_average),
        )
        print(f"{gran.value}: T = {bundle.T}")
    return EXIT_OK


def _load_bundle(config: RunConfig, gran: Granularity):
    path = config.output_dir / f"series_{gran.value}.csv"
    if not path.exists():
        rc = cmd_build(dataclasses.replace(config, granularities=(gran,)))
        if rc != EXIT_OK:
            raise OsvError(f"cannot build {path}")
    return read_series_csv(path, gran)


# ---------------------------------------------------------------- models


@dataclasses.dataclass
class ModelOutcome:
    granularity: Granularity
    target: Target
    status: str = "ok"
    message: str = ""
    summary: dict = dataclasses.field(default_factory=dict)
    lrms: list = dataclasses.field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return {"ok": EXIT_OK, "selection_failed": EXIT_SELECTION}.get(self.status, EXIT_NUMERICAL)


def _write_orders(path: Path, orders: ArdlOrders) -> None:
    write_json(path, {"orders": list(orders.as_tuple())})


def _read_orders(path: Path) -> ArdlOrders:
    return ArdlOrders(*json.loads(path.read_text(encoding="utf-8"))["orders"])


def _select(config: RunConfig, bundle, gran: Granularity, target: Target) -> ArdlOrders:
    mdir = config.model_dir(gran, target)
    mdir.mkdir(parents=True, exist_ok=True)
    try:
        orders, trace = select_orders(bundle, target, p_max=config.p_max, stop_rule=config.stop_rule)
    except SelectionError as exc:
        exc.trace.write_jsonl(mdir / "trace.jsonl")
        raise
    trace.write_jsonl(mdir / "trace.jsonl")
    _write_orders(mdir / "orders.json", orders)
    return orders


def _fit_outputs(config: RunConfig, bundle, gran: Granularity, target: Target,
                 orders: ArdlOrders, outcome: ModelOutcome) -> None:
    mdir = config.model_dir(gran, target)
    fit = fit_ardl(bundle, target, orders)
    write_json(mdir / "fit.json", fit.to_dict())

    lrms = []
    for reg in REGRESSORS:
        res = long_run_multiplier(fit, reg)
        lrms.append(res)
        dms = dynamic_multipliers(fit, reg, config.dm_horizon)
        write_csv(mdir / f"dm_{reg}.csv", ("step", "value"), enumerate(dms))
    write_csv(
        mdir / "lrm.csv",
        ("regressor", "value", "std_error", "t_value", "critical_value", "significant"),
        ((r.regressor, r.value, r.std_error, r.t_value, r.critical_value, r.significant_95)
         for r in lrms),
    )
    outcome.lrms = lrms

    diag = diagnose(fit, bundle.series(target.series_name))
    write_csv(mdir / "acf.csv", ("lag", "acf", "band"),
              ((lag, v, diag.acf.band) for lag, v in zip(diag.acf.lags, diag.acf.values)))
    write_csv(mdir / "qq.csv", ("theoretical", "sample"), diag.qq)
    offset = orders.maxlag
    write_csv(mdir / "fitted.csv", ("index", "fitted", "residual", "observed"),
              ((offset + i, f, r, o) for i, (f, r, o) in
               enumerate(zip(fit.fitted, fit.residuals, fit.observed))))
    write_json(mdir / "diagnostics.json", diag.to_dict())

    outcome.summary = {
        "orders": list(orders.as_tuple()),
        "r_squared": fit.r_squared,
        "sigma2": fit.sigma2,
        "dof": fit.dof,
        "nobs": fit.nobs,
        **{k: v for k, v in diag.to_dict().items()},
        "lrm": {r.regressor: {"value": r.value, "std_error": r.std_error,
                              "significant": r.significant_95} for r in lrms},
    }


def run_model(config: RunConfig, gran: Granularity, target: Target,
              select: bool = True, fit: bool = True) -> ModelOutcome:
    outcome = ModelOutcome(gran, target)
    label = f"{gran.value}/{target.value}"
    try:
        bundle = _load_bundle(config, gran)
        mdir = config.model_dir(gran, target)
        if config.orders is not None:
            orders = config.orders
            _write_orders(mdir / "orders.json", orders)
        elif select or not (mdir / "orders.json").exists():
            orders = _select(config, bundle, gran, target)
        else:
            orders = _read_orders(mdir / "orders.json")
        outcome.summary = {"orders": list(orders.as_tuple())}
        if fit:
            _fit_outputs(config, bundle, gran, target, orders, outcome)
    except SelectionError as exc:
        outcome.status, outcome.message = "selection_failed", f"{label}: {exc}"
    except (ArdlError, DegenerateInputError, np.linalg.LinAlgError) as exc:
        outcome.status, outcome.message = "numerical_failure", f"{label}: {exc}"
    except OsvError as exc:
        outcome.status, outcome.message = "ingest_failure", f"{label}: {exc}"
    if outcome.status != "ok":
        logger.error("%s", outcome.message)
    return outcome


def _run_models(config: RunConfig, select: bool, fit: bool) -> list[ModelOutcome]:
    jobs = [(g, t) for g in config.granularities for t in config.targets]
    # Series files are shared inputs; build them before fanning out.
    for gran in config.granularities:
        if not (config.output_dir / f"series_{gran.value}.csv").exists():
            cmd_build(dataclasses.replace(config, granularities=(gran,)))
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            return list(pool.map(lambda gt: run_model(config, *gt, select=select, fit=fit), jobs))
    return [run_model(config, g, t, select=select, fit=fit) for g, t in jobs]


def _exit_code(outcomes: Sequence[ModelOutcome]) -> int:
    codes = {o.exit_code for o in outcomes}
    if any(o.status == "ingest_failure" for o in outcomes):
        return EXIT_INGEST
    for code in (EXIT_SELECTION, EXIT_NUMERICAL):
        if code in codes:
            return code
    return EXIT_OK


def cmd_select(config: RunConfig) -> int:
    outcomes = _run_models(config, select=True, fit=False)
    for o in outcomes:
        if o.status == "ok":
            print(f"{o.granularity.value:8s} {o.target.value:6s} {tuple(o.summary['orders'])}")
    return _exit_code(outcomes)


def cmd_fit(config: RunConfig) -> int:
    outcomes = _run_models(config, select=False, fit=True)
    for o in outcomes:
        if o.status == "ok":
            print(f"{o.granularity.value:8s} {o.target.value:6s} R2 = {o.summary['r_squared']:.3f}")
    return _exit_code(outcomes)


def cmd_diagnose(config: RunConfig) -> int:
    return cmd_fit(config)


def _collect(config: RunConfig) -> list[ModelOutcome]:
    outcomes = []
    for gran in config.granularities:
        for target in config.targets:
            mdir = config.model_dir(gran, target)
            outcome = ModelOutcome(gran, target)
            if not (mdir / "fit.json").exists():
                outcome.status = "missing"
                outcomes.append(outcome)
                continue
            fit_info = json.loads((mdir / "fit.json").read_text(encoding="utf-8"))
            diag = json.loads((mdir / "diagnostics.json").read_text(encoding="utf-8"))
            with open(mdir / "lrm.csv", newline="", encoding="utf-8") as fh:
                lrm_rows = list(csv.DictReader(fh))
            outcome.summary = {
                "orders": fit_info["orders"],
                "r_squared": fit_info["r_squared"],
                "sigma2": fit_info["sigma2"],
                "dof": fit_info["dof"],
                "nobs": fit_info["nobs"],
                **diag,
                "lrm": {r["regressor"]: {"value": float(r["value"]),
                                         "std_error": float(r["std_error"]),
                                         "significant": r["significant"] == "true"}
                        for r in lrm_rows},
            }
            outcomes.append(outcome)
    return outcomes


def write_report(config: RunConfig, outcomes: Sequence[ModelOutcome]) -> None:
    out = config.output_dir
    by_key = {(o.granularity, o.target): o for o in outcomes}
    grans = list(config.granularities)

    def orders_cell(o):
        if o is None or "orders" not in o.summary:
            return "NA"
        return "(" + ", ".join(str(p) for p in o.summary["orders"]) + ")"

    write_csv(out / "orders.csv", ("target",) + tuple(g.value for g in grans),
              ((TARGET_LABELS[t],) + tuple(orders_cell(by_key.get((g, t))) for g in grans)
               for t in config.targets))

    lrm_rows = []
    for reg in REGRESSORS:
        for g in grans:
            for t in config.targets:
                o = by_key.get((g, t))
                if o is None or "lrm" not in o.summary:
                    continue
                cell = o.summary["lrm"][reg]
                lrm_rows.append((reg, g.value, t.value, cell["value"], cell["std_error"],
                                 cell["significant"]))
    write_csv(out / "lrm.csv",
              ("regressor", "granularity", "target", "value", "std_error", "significant"),
              lrm_rows)

    models = {}
    r2 = []
    for o in outcomes:
        key = f"{o.granularity.value}_{o.target.value}"
        models[key] = {"status": o.status, "message": o.message, **o.summary}
        if o.status == "ok" and "r_squared" in o.summary:
            r2.append(o.summary["r_squared"])
    write_json(out / "summary.json", {
        "window": [config.window_start.isoformat(), config.window_end.isoformat()],
        "p_max": config.p_max,
        "stop_rule": config.stop_rule,
        "models": models,
        "r_squared": {
            "min": min(r2) if r2 else None,
            "max": max(r2) if r2 else None,
            "mean": float(np.mean(r2)) if r2 else None,
        },
    })


def cmd_report(config: RunConfig) -> int:
    outcomes = _collect(config)
    write_report(config, outcomes)
    missing = [o for o in outcomes if o.status == "missing"]
    for o in missing:
        logger.warning("no fit found for %s/%s", o.granularity.value, o.target.value)
    print(f"report written to {config.output_dir}")
    return EXIT_OK


def cmd_pipeline(config: RunConfig) -> int:
    if config.events_path is None and config.snapshot_path is not None:
        rc = cmd_ingest(config)
        if rc != EXIT_OK:
            return rc
    rc = cmd_build(config)
    if rc != EXIT_OK:
        return rc
    outcomes = _run_models(config, select=True, fit=True)
    write_report(config, outcomes)
    for o in outcomes:
        if o.status == "ok":
            print(f"{o.granularity.value:8s} {o.target.value:6s} orders {tuple(o.summary['orders'])} "
                  f"R2 = {o.summary['r_squared']:.3f}")
    return _exit_code(outcomes)


def cmd_simulate(config: RunConfig) -> int:
    from .simulate import simulate_snapshot

    if config.snapshot_path is None:
        logger.error("simulate needs --snapshot for the destination directory")
        return EXIT_INGEST
    n = simulate_snapshot(config.snapshot_path, config.window_start, config.window_end, config.seed)
    print(f"wrote {n} synthetic records to {config.snapshot_path}")
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "build": cmd_build,
    "select": cmd_select,
    "fit": cmd_fit,
    "diagnose": cmd_diagnose,
    "report": cmd_report,
    "pipeline": cmd_pipeline,
    "simulate": cmd_simulate,
}


# ---------------------------------------------------------------- arguments


def _parse_orders(text: str) -> ArdlOrders:
    parts = [int(p) for p in text.replace("(", "").replace(")", "").split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("orders must be four comma-separated integers")
    return ArdlOrders(*parts)


def _parse_granularities(value) -> tuple[Granularity, ...]:
    if isinstance(value, str):
        value = value.split(",")
    return tuple(Granularity(v.strip().lower()) for v in value if v.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="osvardl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="TOML file with RunConfig keys")
        p.add_argument("--snapshot", dest="snapshot_path", type=Path)
        p.add_argument("--events", dest="events_path", type=Path)
        p.add_argument("--window-start", type=dt.date.fromisoformat)
        p.add_argument("--window-end", type=dt.date.fromisoformat)
        p.add_argument("--granularities", type=_parse_granularities,
                       help="comma-separated subset of daily,weekly,monthly")
        p.add_argument("--target", choices=("freq", "share", "both"))
        p.add_argument("--p-max", type=int)
        p.add_argument("--output-dir", type=Path)
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--stop-rule", choices=("current", "lower"))
        p.add_argument("--partial-weeks", action="store_const", const=True, default=None)
        p.add_argument("--ma-window", type=int)
        p.add_argument("--dm-horizon", type=int)
        p.add_argument("--orders", type=_parse_orders, help="fixed orders p1,p2,p3,p4 (skips selection)")
    return parser


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, value):
    if key in ("snapshot_path", "events_path", "output_dir"):
        return Path(value)
    if key in ("window_start", "window_end") and isinstance(value, str):
        return dt.date.fromisoformat(value)
    if key == "granularities":
        return _parse_granularities(value)
    if key == "orders" and not isinstance(value, ArdlOrders):
        return _parse_orders(",".join(str(v) for v in value) if isinstance(value, list) else value)
    return value


def load_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config is not None:
        with open(args.config, "rb") as fh:
            raw = tomllib.load(fh)
        unknown = set(raw) - _CONFIG_FIELDS
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        base = args.config.parent
        for key, value in raw.items():
            value = _coerce(key, value)
            if isinstance(value, Path) and not value.is_absolute():
                value = base / value
            values[key] = value
    for key in _CONFIG_FIELDS:
        value = getattr(args, key, None)
        if value is not None:
            values[key] = _coerce(key, value)
    return RunConfig(**values)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args)
    except (ValueError, OSError, tomllib.TOMLDecodeError) as exc:
        parser.error(str(exc))
    return COMMANDS[args.command](config)


if __name__ == "__main__":
    sys.exit(main())
