"""Recover the prior implied by an observed prediction.

A :class:`RecoveryTable` holds the model prediction for every
(lambda, t_past) pair on a grid. Inverting it is a nearest-match search
down the t_past column.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .duration_model import (
    DecisionRule,
    EmptyPosteriorError,
    SampledPrior,
    predict,
    sample_poisson_prior,
)

log = logging.getLogger(__name__)

TABLE_FORMAT = "eventdur.recovery-table"
TABLE_VERSION = 1


class NoCandidateError(ValueError):
    """Every table entry at the requested t_past is infeasible."""


def lambda_seed(seed: int, index: int) -> int:
    """Per-lambda seed: base seed XOR grid index."""
    return int(seed) ^ int(index)


def lambda_grid(lambda_min: float, lambda_max: float, lambda_step: float) -> np.ndarray:
    if not lambda_min > 0:
        raise ValueError(f"lambda_min must be positive, got {lambda_min}")
    if lambda_max < lambda_min:
        raise ValueError("lambda_max must be >= lambda_min")
    if not lambda_step > 0:
        raise ValueError(f"lambda_step must be positive, got {lambda_step}")
    count = int(math.floor((lambda_max - lambda_min) / lambda_step + 1e-9)) + 1
    return lambda_min + lambda_step * np.arange(count, dtype=float)


@dataclass(frozen=True)
class RecoveryTable:
    """Dense grid of model predictions; NaN marks an infeasible cell.

    ``predictions[i, j]`` is the prediction for ``lambda_grid[i]`` at
    ``t_past_grid[j]``. Per-lambda prior summaries are stored alongside so
    lookups never need to resample.
    """

    lambda_grid: np.ndarray
    t_past_grid: np.ndarray
    predictions: np.ndarray
    prior_means: np.ndarray
    prior_medians: np.ndarray
    sample_count: int
    seed: int
    decision_rule: DecisionRule = DecisionRule.MEDIAN
    n_observations: int = 1

    def __post_init__(self):
        shape = (len(self.lambda_grid), len(self.t_past_grid))
        if self.predictions.shape != shape:
            raise ValueError(f"predictions shape {self.predictions.shape} != {shape}")
        if len(self.prior_means) != shape[0] or len(self.prior_medians) != shape[0]:
            raise ValueError("prior summaries must have one entry per lambda")

    @property
    def feasible(self) -> np.ndarray:
        return np.isfinite(self.predictions)

    def prior_for(self, lam_index: int) -> SampledPrior:
        """Re-derive the sampled prior behind row ``lam_index``."""
        return sample_poisson_prior(float(self.lambda_grid[lam_index]), self.sample_count,
                                    lambda_seed(self.seed, lam_index))

    def snap_t_past(self, t_past: float) -> int:
        """Index of the grid t_past nearest ``t_past`` (lower one on ties)."""
        grid = self.t_past_grid
        j = int(np.argmin(np.abs(grid - t_past)))
        if grid[j] != t_past:
            log.info("t_past %s not on grid; snapped to %s", t_past, grid[j])
        return j

    def params(self) -> dict:
        return {
            "lambda_grid": [float(x) for x in self.lambda_grid],
            "t_past_grid": [float(x) for x in self.t_past_grid],
            "sample_count": int(self.sample_count),
            "seed": int(self.seed),
            "decision_rule": self.decision_rule.value,
            "n_observations": int(self.n_observations),
        }

    def to_json(self) -> str:
        def cell(x):
            return float(x) if math.isfinite(x) else None

        doc = {
            "format": TABLE_FORMAT,
            "version": TABLE_VERSION,
            "params": self.params(),
            "prior_means": [float(x) for x in self.prior_means],
            "prior_medians": [float(x) for x in self.prior_medians],
            "predictions": [[cell(x) for x in row] for row in self.predictions],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> RecoveryTable:
        doc = json.loads(text)
        if doc.get("format") != TABLE_FORMAT:
            raise ValueError(f"not a recovery table (format={doc.get('format')!r})")
        if doc.get("version") != TABLE_VERSION:
            raise ValueError(f"unsupported table version {doc.get('version')!r}")
        p = doc["params"]
        preds = np.array([[np.nan if x is None else x for x in row] for row in doc["predictions"]],
                         dtype=float).reshape(len(p["lambda_grid"]), len(p["t_past_grid"]))
        return cls(
            lambda_grid=np.array(p["lambda_grid"], dtype=float),
            t_past_grid=np.array(p["t_past_grid"], dtype=float),
            predictions=preds,
            prior_means=np.array(doc["prior_means"], dtype=float),
            prior_medians=np.array(doc["prior_medians"], dtype=float),
            sample_count=p["sample_count"],
            seed=p["seed"],
            decision_rule=DecisionRule(p["decision_rule"]),
            n_observations=p["n_observations"],
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> RecoveryTable:
        return cls.from_json(Path(path).read_text())


def _table_row(lam: float, index: int, t_past_grid: np.ndarray, sample_count: int,
               seed: int, rule: DecisionRule, n_observations: int):
    prior = sample_poisson_prior(lam, sample_count, lambda_seed(seed, index))
    row = np.full(len(t_past_grid), np.nan)
    for j, t_past in enumerate(t_past_grid):
        try:
            row[j] = predict(prior, float(t_past), n_observations, rule)
        except EmptyPosteriorError:
            # t_past beyond every sampled duration; higher t_past cannot do better
            break
    return row, prior.mean, prior.median


def build_table(lambda_min: float = 20.0, lambda_max: float = 200.0, lambda_step: float = 1.0,
                t_past_grid: Sequence[float] = tuple(range(0, 201)), sample_count: int = 1000,
                seed: int = 7, decision_rule: DecisionRule | str = DecisionRule.MEDIAN,
                n_observations: int = 1) -> RecoveryTable:
    """Tabulate predictions over an arithmetic lambda grid and a t_past grid.

    The prior at grid index ``i`` is drawn with seed ``seed ^ i`` so any row
    can be rebuilt on its own. Cells where ``t_past`` exceeds every sampled
    duration are stored as NaN.
    """
    rule = DecisionRule(decision_rule)
    lams = lambda_grid(lambda_min, lambda_max, lambda_step)
    t_grid = np.asarray(t_past_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValueError("t_past_grid must be a non-empty list")
    if np.any(t_grid < 0) or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_past_grid must be non-negative and strictly increasing")

    preds = np.empty((lams.size, t_grid.size))
    means = np.empty(lams.size)
    medians = np.empty(lams.size)
    for i, lam in enumerate(lams):
        preds[i], means[i], medians[i] = _table_row(float(lam), i, t_grid, sample_count,
                                                    seed, rule, n_observations)
    return RecoveryTable(lams, t_grid, preds, means, medians, int(sample_count), int(seed),
                         rule, int(n_observations))


@dataclass(frozen=True)
class RecoveredPrior:
    lam: float
    prior_median: float
    prior_mean: float
    match_error: float
    observed_t_past: float
    observed_t_predicted: float
    table_t_past: float
    table_t_predicted: float


@dataclass(frozen=True)
class RecoveryFailure:
    observed_t_past: float
    observed_t_predicted: float
    reason: str


def recover_prior(table: RecoveryTable, t_past: float, observed_t_predicted: float) -> RecoveredPrior:
    """Find the lambda whose prediction at ``t_past`` is closest to the observation.

    Off-grid ``t_past`` is snapped to the nearest grid value. Distance is the
    absolute difference in predicted duration; the smallest lambda wins ties.

    Raises:
        ValueError: if ``observed_t_predicted < t_past``.
        NoCandidateError: if no lambda is feasible at this t_past.
    """
    if observed_t_predicted < t_past:
        raise ValueError(f"observed t_predicted {observed_t_predicted} is below t_past {t_past}")
    j = table.snap_t_past(t_past)
    column = table.predictions[:, j]
    feasible = np.isfinite(column)
    if not feasible.any():
        raise NoCandidateError(f"no feasible prior at t_past={table.t_past_grid[j]}")
    err = np.where(feasible, np.abs(column - observed_t_predicted), np.inf)
    i = int(np.argmin(err))  # first minimum = smallest lambda
    return RecoveredPrior(
        lam=float(table.lambda_grid[i]),
        prior_median=float(table.prior_medians[i]),
        prior_mean=float(table.prior_means[i]),
        match_error=float(err[i]),
        observed_t_past=float(t_past),
        observed_t_predicted=float(observed_t_predicted),
        table_t_past=float(table.t_past_grid[j]),
        table_t_predicted=float(column[i]),
    )


def recover_trajectory(table: RecoveryTable, predictions: Iterable[tuple[float, float]]
                       ) -> list[RecoveredPrior | RecoveryFailure]:
    """Recover a prior independently for each ``(t_past, t_predicted)`` pair.

    A pair that cannot be recovered yields a :class:`RecoveryFailure` in its
    slot instead of aborting the batch.
    """
    out: list[RecoveredPrior | RecoveryFailure] = []
    for t_past, t_pred in predictions:
        try:
            out.append(recover_prior(table, t_past, t_pred))
        except ValueError as exc:
            out.append(RecoveryFailure(float(t_past), float(t_pred), str(exc)))
    return out
