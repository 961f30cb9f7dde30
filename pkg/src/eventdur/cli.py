"""Command-line entry point.

Every run writes ``manifest.json`` next to its outputs; passing that file
back with ``--manifest`` repeats the run exactly.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from datetime import date
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .duration_model import DecisionRule, EmptyPosteriorError, sample_poisson_prior
from .forecast_ingest import (
    DEFAULT_T0,
    DailyAggregate,
    DegenerateDistributionError,
    RecordError,
    aggregate_daily,
    apply_filters,
    ground_truth_horizon,
    read_forecasts,
    to_prediction,
)
from .prior_recovery import (
    NoCandidateError,
    RecoveredPrior,
    RecoveryFailure,
    RecoveryTable,
    build_table,
    recover_trajectory,
)
from .scenario_sim import ScenarioConfig, ScenarioMode, run_scenario, trajectory_csv
from .signal_analysis import (
    AlignmentError,
    FitError,
    InsufficientDataError,
    MalformedSeriesError,
    fit_trend,
    joint_dynamics,
    load_case_counts,
    rolling_mean,
    sdar_change_points,
    transform_cases,
)

log = logging.getLogger("eventdur")

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 1, 2, 3
OUTPUT_ENV = "EVENTDUR_OUTPUT_DIR"
INPUT_ERRORS = (RecordError, MalformedSeriesError, FitError, AlignmentError,
                InsufficientDataError, DegenerateDistributionError, FileNotFoundError,
                json.JSONDecodeError)
INFEASIBLE_ERRORS = (NoCandidateError, EmptyPosteriorError)


class CLIError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT, kind: str = "input-error",
                 location: str | None = None, details: list | None = None):
        super().__init__(message)
        self.code = code
        self.kind = kind
        self.location = location
        self.details = details or []


# -- argument helpers ----------------------------------------------------------

def parse_range(text: str) -> list[float]:
    """``"30..49"`` -> 30, 31, ..., 49; ``"1,5,9"`` -> explicit list."""
    text = text.strip()
    if ".." in text:
        lo, hi = (float(x) for x in text.split("..", 1))
        if hi < lo:
            raise argparse.ArgumentTypeError(f"empty range {text!r}")
        return [lo + i for i in range(int(math.floor(hi - lo)) + 1)]
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad range {text!r}") from None


def parse_span(text: str) -> tuple[float, float]:
    lo, _, hi = text.partition("..")
    try:
        return float(lo), float(hi or lo)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad span {text!r}") from None


def parse_sdar(text: str) -> tuple[float, int, int]:
    try:
        r, order, smooth = text.split(",")
        return float(r), int(order), int(smooth)
    except ValueError:
        raise argparse.ArgumentTypeError("--sdar takes RATE,ORDER,SMOOTHING") from None


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())


def write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_pairs(path) -> list[tuple[float, float]]:
    pairs = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"t_past", "t_predicted"} - set(reader.fieldnames or ())
        if missing:
            raise CLIError(f"missing column(s): {', '.join(sorted(missing))}",
                           location=str(path))
        for rowno, row in enumerate(reader, start=2):
            try:
                pairs.append((float(row["t_past"]), float(row["t_predicted"])))
            except ValueError as exc:
                raise CLIError(str(exc), location=f"{path}:row {rowno}") from exc
    return pairs


# -- shared stages ---------------------------------------------------------------

def _table(cfg: dict, t_past_grid: Sequence[float]) -> RecoveryTable:
    if cfg.get("table"):
        log.info("loading recovery table %s", cfg["table"])
        try:
            return RecoveryTable.load(cfg["table"])
        except (KeyError, ValueError) as exc:
            raise CLIError(f"bad table file: {exc}", location=cfg["table"]) from exc
    lo, hi = cfg["lambda"]
    log.info("building table lambda %s..%s step %s, %d t_past values", lo, hi, cfg["step"],
             len(t_past_grid))
    return build_table(lo, hi, cfg["step"], t_past_grid, cfg["samples"], cfg["seed"],
                       cfg["rule"])


def _recovered_rows(results):
    for r in results:
        if isinstance(r, RecoveredPrior):
            yield r.lam, r.prior_mean, r.prior_median, r.match_error, "ok"
        else:
            yield None, None, None, None, f"failed: {r.reason}"


def _failures(results, labels) -> list[dict]:
    return [{"record": lab, "t_past": r.observed_t_past, "t_predicted": r.observed_t_predicted,
             "reason": r.reason}
            for r, lab in zip(results, labels) if isinstance(r, RecoveryFailure)]


# -- subcommands -------------------------------------------------------------------

def cmd_build_table(cfg: dict, out: Path) -> dict:
    table = _table({**cfg, "table": None}, cfg["t_past"])
    table.save(out / "table.json")
    return {"cells": int(table.predictions.size), "infeasible": int((~table.feasible).sum())}


def cmd_recover(cfg: dict, out: Path) -> dict:
    pairs = read_pairs(cfg["predictions"])
    grid = cfg["t_past"] or list(range(0, int(max((p[0] for p in pairs), default=0)) + 1))
    table = _table(cfg, grid)
    results = recover_trajectory(table, pairs)
    write_csv(out / "recovered.csv",
              ("t_past", "t_predicted", "lambda", "prior_mean", "prior_median",
               "match_error", "status"),
              ((tp, tq, *rest) for (tp, tq), rest in zip(pairs, _recovered_rows(results))))
    failures = _failures(results, [f"row {i + 2}" for i in range(len(pairs))])
    if failures:
        raise CLIError(f"{len(failures)} prediction(s) could not be recovered",
                       EXIT_INFEASIBLE, "infeasible-recovery", details=failures)
    return {"recovered": len(results)}


def cmd_simulate(cfg: dict, out: Path) -> dict:
    t_range = cfg["t_past"]
    if not t_range:
        raise CLIError("--t-past is required for simulate")
    rule = DecisionRule(cfg["rule"])
    if cfg["mode"] == "invariant-prediction":
        grid = list(range(0, int(max(t_range)) + 1))
        table = _table(cfg, sorted(set(grid) | {float(t) for t in t_range}))
        config = ScenarioConfig(ScenarioMode.INVARIANT_PREDICTION, cfg["fixed"], t_range,
                                table=table, unit=cfg["unit"], decision_rule=rule)
    else:
        prior = sample_poisson_prior(cfg["fixed"], cfg["samples"], cfg["seed"])
        config = ScenarioConfig(ScenarioMode.INVARIANT_PRIOR, cfg["fixed"], t_range,
                                prior=prior, unit=cfg["unit"], decision_rule=rule)
    points = run_scenario(config)
    (out / "trajectory.csv").write_text(trajectory_csv(points, cfg["unit"]))
    return {"points": len(points), "flagged": sum(p.status != "ok" for p in points)}


def _ingest(cfg: dict, out: Path):
    records = read_forecasts(cfg["forecasts"])
    t0 = date.fromisoformat(cfg["t0"])
    predictions = []
    for i, rec in enumerate(records, start=1):
        try:
            predictions.append(to_prediction(rec, t0))
        except DegenerateDistributionError as exc:
            raise CLIError(str(exc), location=f"{cfg['forecasts']}:record {i}") from exc
    kept, report = apply_filters(predictions, t_0=t0)
    write_json(out / "filter_report.json", report.as_dict())
    write_csv(out / "predictions.csv",
              ("participant_id", "prediction_date", "predicted_date", "t_past", "t_predicted",
               "horizon"),
              ((p.participant_id, p.prediction_date, p.predicted_date, p.t_past,
                p.t_predicted, p.horizon) for p in kept))
    daily = aggregate_daily(kept)
    return kept, report, daily


def _daily_rows(daily, cfg, extra=None):
    peak = date.fromisoformat(cfg["peak"]) if cfg.get("peak") else None
    gt = ground_truth_horizon([d.date for d in daily], peak) if peak else [None] * len(daily)
    ma_pred = rolling_mean([d.mean_t_predicted for d in daily], 4, center=False)
    ma_hor = rolling_mean([d.mean_horizon for d in daily], 4, center=False)
    extra = extra or [()] * len(daily)
    for d, g, mp, mh, ex in zip(daily, gt, ma_pred, ma_hor, extra):
        yield (d.date, d.mean_t_predicted, d.mean_horizon, d.n, mp, mh, g, *ex)


DAILY_HEADER = ("date", "mean_t_predicted", "mean_horizon", "n", "ma4_t_predicted",
                "ma4_horizon", "ground_truth_horizon")


def cmd_ingest(cfg: dict, out: Path) -> dict:
    kept, report, daily = _ingest(cfg, out)
    write_csv(out / "daily.csv", DAILY_HEADER, _daily_rows(daily, cfg))
    return {"filter_report": report.as_dict(), "days": len(daily)}


def _analyze_cases(cfg: dict, out: Path):
    dates, cum = load_case_counts(cfg["cases"], cfg["date_column"], cfg["count_column"])
    series = transform_cases(dates, cum)
    series = series.between(date.fromisoformat(cfg["start"]), date.fromisoformat(cfg["end"]))
    rate, order, smooth = cfg["sdar"]
    cp = sdar_change_points(series.smoothed, rate, order, smooth, cfg["top_k"],
                            cfg["threshold"])
    fit = fit_trend(series.dates, series.smoothed, cfg["degree"])
    write_csv(out / "cases.csv",
              ("date", "raw", "smoothed", "fitted", "d1", "d2", "cp_score"),
              zip(series.dates, series.daily, series.smoothed, fit.fitted, fit.d1, fit.d2,
                  cp.scores))
    write_json(out / "change_points.json", {
        "params": {"discount_rate": rate, "order": order, "smoothing_days": smooth,
                   "top_k": cfg["top_k"], "threshold": cfg["threshold"],
                   "burn_in": cp.burn_in},
        "change_points": [{"rank": k + 1, "date": series.dates[i].isoformat(), "index": i,
                           "score": float(cp.scores[i])} for k, i in enumerate(cp.detected)],
    })
    return series, fit, cp


def _prediction_trend(daily, cfg, out: Path):
    fit = fit_trend([d.date for d in daily], [d.mean_t_predicted for d in daily],
                    cfg["degree"])
    write_csv(out / "prediction_trend.csv", ("date", "mean_t_predicted", "fitted", "d1", "d2"),
              zip(fit.dates, [d.mean_t_predicted for d in daily], fit.fitted, fit.d1, fit.d2))
    return fit


def _joint(case_fit, pred_fit, out: Path) -> float:
    joint = joint_dynamics(case_fit, pred_fit)
    write_csv(out / "joint_dynamics.csv", ("date", "case_d1", "prediction_d1"),
              zip(joint.dates, joint.case_d1, joint.prediction_d1))
    return joint.sign_opposition


def cmd_analyze(cfg: dict, out: Path) -> dict:
    _, case_fit, cp = _analyze_cases(cfg, out)
    summary = {"change_points": len(cp.detected)}
    if cfg.get("daily"):
        daily = _read_daily(cfg["daily"])
        pred_fit = _prediction_trend(daily, cfg, out)
        summary["sign_opposition"] = _joint(case_fit, pred_fit, out)
    return summary


def _read_daily(path):
    rows = []
    with open(path, newline="") as fh:
        for rowno, row in enumerate(csv.DictReader(fh), start=2):
            try:
                rows.append(DailyAggregate(date.fromisoformat(row["date"]),
                                           float(row["mean_t_predicted"]),
                                           float(row["mean_horizon"]), int(row["n"])))
            except (KeyError, ValueError) as exc:
                raise CLIError(f"bad daily row: {exc}", location=f"{path}:row {rowno}") from exc
    return rows


def cmd_pipeline(cfg: dict, out: Path) -> dict:
    kept, report, daily = _ingest(cfg, out)
    if not kept:
        raise CLIError("no predictions survived filtering", location=cfg["forecasts"])

    max_t_past = max(p.t_past for p in kept)
    table = _table(cfg, list(range(0, max_t_past + 1)))
    table.save(out / "table.json")
    results = recover_trajectory(table, [(p.t_past, p.t_predicted) for p in kept])
    write_csv(out / "recovered_priors.csv",
              ("participant_id", "prediction_date", "t_past", "t_predicted", "horizon",
               "lambda", "prior_mean", "prior_median", "match_error", "status"),
              ((p.participant_id, p.prediction_date, p.t_past, p.t_predicted, p.horizon, *rest)
               for p, rest in zip(kept, _recovered_rows(results))))

    by_day: dict[date, list[RecoveredPrior]] = {}
    for p, r in zip(kept, results):
        if isinstance(r, RecoveredPrior):
            by_day.setdefault(p.prediction_date, []).append(r)

    def day_means(d):
        rs = by_day.get(d)
        if not rs:
            return math.nan, math.nan
        return (math.fsum(r.prior_mean for r in rs) / len(rs),
                math.fsum(r.prior_median for r in rs) / len(rs))

    write_csv(out / "daily.csv", DAILY_HEADER + ("mean_prior", "mean_prior_median"),
              _daily_rows(daily, cfg, [day_means(d.date) for d in daily]))

    # limiting-case baselines anchored at the first day of predictions
    first = daily[0]
    t0 = date.fromisoformat(cfg["t0"])
    fixed = float(round(first.mean_t_predicted))
    start_tp = (first.date - t0).days
    t_range = [float(t) for t in range(start_tp, min(max_t_past, int(fixed)) + 1)]
    inv_pred = run_scenario(ScenarioConfig(ScenarioMode.INVARIANT_PREDICTION, fixed, t_range,
                                           table=table, unit="days",
                                           decision_rule=table.decision_rule))
    (out / "scenario_invariant_prediction.csv").write_text(trajectory_csv(inv_pred, "days"))
    anchor = next((r for r in results if isinstance(r, RecoveredPrior)), None)
    if anchor is not None:
        prior = table.prior_for(int(np.searchsorted(table.lambda_grid, anchor.lam)))
        inv_prior = run_scenario(ScenarioConfig(ScenarioMode.INVARIANT_PRIOR, anchor.lam,
                                                [float(t) for t in range(start_tp,
                                                                         max_t_past + 1)],
                                                prior=prior, unit="days",
                                                decision_rule=table.decision_rule))
        (out / "scenario_invariant_prior.csv").write_text(trajectory_csv(inv_prior, "days"))

    summary = {"filter_report": report.as_dict(), "days": len(daily),
               "recovered": sum(isinstance(r, RecoveredPrior) for r in results)}
    if cfg.get("cases"):
        _, case_fit, cp = _analyze_cases(cfg, out)
        pred_fit = _prediction_trend(daily, cfg, out)
        summary["change_points"] = len(cp.detected)
        summary["sign_opposition"] = _joint(case_fit, pred_fit, out)
    write_json(out / "summary.json", summary)

    failures = _failures(results, [f"{p.participant_id}@{p.prediction_date}" for p in kept])
    if failures:
        raise CLIError(f"{len(failures)} prediction(s) could not be recovered",
                       EXIT_INFEASIBLE, "infeasible-recovery", details=failures)
    return summary


COMMANDS = {
    "build-table": cmd_build_table,
    "recover": cmd_recover,
    "simulate": cmd_simulate,
    "ingest": cmd_ingest,
    "analyze": cmd_analyze,
    "pipeline": cmd_pipeline,
}


# -- parser ------------------------------------------------------------------------

def _add_table_args(p: argparse.ArgumentParser, t_past_default=None) -> None:
    g = p.add_argument_group("recovery table")
    g.add_argument("--table", help="reuse a prebuilt table file (no sampling)")
    g.add_argument("--lambda", dest="lambda_", default="20..200", type=parse_span,
                   help="lambda range LO..HI (default 20..200)")
    g.add_argument("--step", type=float, default=1.0)
    g.add_argument("--samples", type=int, default=1000)
    g.add_argument("--seed", type=int, default=7)
    g.add_argument("--rule", choices=[r.value for r in DecisionRule], default="median")
    g.add_argument("--t-past", type=parse_range, default=t_past_default,
                   help="t_past values: LO..HI or comma list")


def _add_forecast_args(p: argparse.ArgumentParser, required=True) -> None:
    p.add_argument("--forecasts", required=required, help="JSON-lines forecast file")
    p.add_argument("--t0", default=DEFAULT_T0.isoformat())
    p.add_argument("--peak", default="2022-01-13", help="ground-truth peak date ('' to omit)")


def _add_analysis_args(p: argparse.ArgumentParser, cases_required=True) -> None:
    p.add_argument("--cases", required=cases_required, help="case-count file")
    p.add_argument("--date-column", default="Report Date")
    p.add_argument("--count-column", default="Total Cases")
    p.add_argument("--start", default="2021-11-12")
    p.add_argument("--end", default="2022-01-14")
    p.add_argument("--degree", type=int, default=6)
    p.add_argument("--sdar", type=parse_sdar, default=(0.01, 3, 5),
                   help="RATE,ORDER,SMOOTHING (default 0.01,3,5)")
    p.add_argument("--top-k", type=int, default=3)
    p.add_argument("--threshold", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eventdur",
                                     description="Bayesian event-duration prediction toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-o", "--out", help=f"output directory (default ${OUTPUT_ENV} or "
                                            "./eventdur-out)")
    parser.add_argument("--manifest", help="re-run the configuration stored in a manifest")
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--out", default=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command")
    _add_parser = sub.add_parser

    def add_parser(name, **kw):
        return _add_parser(name, parents=[common], **kw)

    sub.add_parser = add_parser

    p = sub.add_parser("build-table", help="tabulate model predictions over (lambda, t_past)")
    _add_table_args(p, t_past_default=parse_range("0..200"))

    p = sub.add_parser("recover", help="recover priors for (t_past, t_predicted) pairs")
    p.add_argument("--predictions", required=True, help="CSV with t_past,t_predicted columns")
    _add_table_args(p)

    p = sub.add_parser("simulate", help="run a limiting-case scenario")
    p.add_argument("--mode", choices=["invariant-prediction", "invariant-prior"],
                   required=True)
    p.add_argument("--fixed", type=float, required=True,
                   help="held prediction (invariant-prediction) or prior lambda")
    p.add_argument("--unit", default="days")
    _add_table_args(p)

    p = sub.add_parser("ingest", help="forecasts -> filtered predictions and daily means")
    _add_forecast_args(p)

    p = sub.add_parser("analyze", help="case-count transform, trends and change points")
    _add_analysis_args(p)
    p.add_argument("--daily", help="daily.csv from ingest, for joint dynamics")

    p = sub.add_parser("pipeline", help="ingest -> recover -> scenarios -> case analysis")
    _add_forecast_args(p)
    _add_analysis_args(p, cases_required=False)
    _add_table_args(p)
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in vars(args).items()
           if k not in ("out", "manifest", "verbose", "command")}
    if "lambda_" in cfg:
        cfg["lambda"] = list(cfg.pop("lambda_"))
    if "sdar" in cfg:
        cfg["sdar"] = list(cfg["sdar"])
    return cfg


def _error_report(err: CLIError, out: Path | None) -> None:
    doc = {"error": err.kind, "message": str(err), "exit_code": err.code}
    if err.location:
        doc["location"] = err.location
    if err.details:
        doc["details"] = err.details
    text = json.dumps(doc, indent=2, sort_keys=True)
    print(text, file=sys.stderr)
    if out is not None and out.is_dir():
        (out / "error.json").write_text(text + "\n")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.manifest:
        try:
            manifest = json.loads(Path(args.manifest).read_text())
            command, cfg = manifest["command"], manifest["config"]
        except (OSError, KeyError, ValueError) as exc:
            _error_report(CLIError(f"unreadable manifest: {exc}", location=args.manifest), None)
            return EXIT_INPUT
    elif args.command:
        command, cfg = args.command, resolve_config(args)
    else:
        parser.print_help(sys.stderr)
        return EXIT_INPUT

    out = Path(args.out or os.environ.get(OUTPUT_ENV) or "eventdur-out")
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "manifest.json",
                   {"command": command, "config": cfg, "version": __version__})
        summary = COMMANDS[command](cfg, out)
    except CLIError as err:
        _error_report(err, out)
        return err.code
    except INFEASIBLE_ERRORS as exc:
        _error_report(CLIError(str(exc), EXIT_INFEASIBLE, "infeasible-model"), out)
        return EXIT_INFEASIBLE
    except (*INPUT_ERRORS, ValueError, OSError) as exc:
        loc = getattr(exc, "filename", None)
        _error_report(CLIError(f"{type(exc).__name__}: {exc}", location=loc), out)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        _error_report(CLIError(f"{type(exc).__name__}: {exc}", EXIT_INTERNAL,
                               "internal-error"), None)
        return EXIT_INTERNAL
    if summary:
        print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
