"""The two limiting cases of the duration model.

Holding the prediction fixed while ``t_past`` approaches it forces the
recovered prior down ("prior crash"); holding the prior fixed forces the
prediction up.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .duration_model import DecisionRule, EmptyPosteriorError, SampledPrior, predict
from .prior_recovery import NoCandidateError, RecoveryTable, recover_prior


class ScenarioMode(str, Enum):
    INVARIANT_PREDICTION = "invariant_prediction"
    INVARIANT_PRIOR = "invariant_prior"


@dataclass(frozen=True)
class ScenarioConfig:
    mode: ScenarioMode
    fixed_value: float
    t_past_range: Sequence[float]
    table: RecoveryTable | None = None
    prior: SampledPrior | None = None
    unit: str = "days"
    decision_rule: DecisionRule = DecisionRule.MEDIAN

    def __post_init__(self):
        object.__setattr__(self, "mode", ScenarioMode(self.mode))
        object.__setattr__(self, "decision_rule", DecisionRule(self.decision_rule))
        t = np.asarray(self.t_past_range, dtype=float)
        if t.size == 0 or np.any(np.diff(t) <= 0):
            raise ValueError("t_past_range must be non-empty and strictly increasing")
        if self.mode is ScenarioMode.INVARIANT_PREDICTION:
            if self.table is None:
                raise ValueError("invariant_prediction mode needs a recovery table")
            if t.max() > self.fixed_value:
                raise ValueError("t_past may not exceed the fixed prediction")
        elif self.prior is None:
            raise ValueError("invariant_prior mode needs a sampled prior")


@dataclass(frozen=True)
class TrajectoryPoint:
    """One probe of the scenario.

    ``status`` is ``"ok"``, ``"no-candidate"`` (no prior reproduces the
    fixed prediction) or ``"end"`` (the fixed prior has no mass left).
    Flagged points carry NaN in the fields they could not fill.
    """

    t_past: float
    t_predicted: float
    prior_mean: float
    prior_median: float
    lam: float = math.nan
    status: str = "ok"

    @property
    def horizon(self) -> float:
        return self.t_predicted - self.t_past


def run_invariant_prediction(config: ScenarioConfig) -> list[TrajectoryPoint]:
    if config.mode is not ScenarioMode.INVARIANT_PREDICTION:
        raise ValueError("config is not in invariant_prediction mode")
    points = []
    for t_past in config.t_past_range:
        t_past = float(t_past)
        try:
            rec = recover_prior(config.table, t_past, config.fixed_value)
        except NoCandidateError:
            points.append(TrajectoryPoint(t_past, config.fixed_value, math.nan, math.nan,
                                          status="no-candidate"))
            continue
        points.append(TrajectoryPoint(t_past, config.fixed_value, rec.prior_mean,
                                      rec.prior_median, rec.lam))
    return points


def run_invariant_prior(config: ScenarioConfig) -> list[TrajectoryPoint]:
    if config.mode is not ScenarioMode.INVARIANT_PRIOR:
        raise ValueError("config is not in invariant_prior mode")
    prior = config.prior
    points = []
    for t_past in config.t_past_range:
        t_past = float(t_past)
        try:
            t_pred = predict(prior, t_past, 1, config.decision_rule)
        except EmptyPosteriorError:
            points.append(TrajectoryPoint(t_past, math.nan, prior.mean, prior.median,
                                          prior.lam, status="end"))
            break
        points.append(TrajectoryPoint(t_past, t_pred, prior.mean, prior.median, prior.lam))
    return points


def run_scenario(config: ScenarioConfig) -> list[TrajectoryPoint]:
    if config.mode is ScenarioMode.INVARIANT_PREDICTION:
        return run_invariant_prediction(config)
    return run_invariant_prior(config)


TRAJECTORY_COLUMNS = ("t_past", "t_predicted", "prior_mean", "prior_median", "horizon",
                      "lambda", "status", "unit")


def _fmt(x: float) -> str:
    return "" if isinstance(x, float) and math.isnan(x) else repr(float(x))


def trajectory_csv(points: Sequence[TrajectoryPoint], unit: str = "days") -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRAJECTORY_COLUMNS)
    for p in points:
        writer.writerow([_fmt(p.t_past), _fmt(p.t_predicted), _fmt(p.prior_mean),
                         _fmt(p.prior_median), _fmt(p.horizon), _fmt(p.lam), p.status, unit])
    return buf.getvalue()
