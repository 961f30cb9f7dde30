"""Turn raw forecast submissions into (t_past, t_predicted, horizon) measures.

A forecast is either a 101-bin pmf over the prediction window or a mixture
of up to five two-piece logistic components. Component centres and widths
are in window-normalised units: 0 is ``window_start`` and 1 is
``window_end``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

N_BINS = 101
MAX_COMPONENTS = 5
DEFAULT_T0 = date(2021, 11, 29)


class DegenerateDistributionError(ValueError):
    pass


class RecordError(ValueError):
    """A forecast record failed to parse or validate."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class LogisticComponent:
    center: float
    left_width: float
    right_width: float
    weight: float = 1.0

    def __post_init__(self):
        if not (self.left_width > 0 and self.right_width > 0):
            raise ValueError("component widths must be positive")
        if not self.weight >= 0:
            raise ValueError("component weight must be non-negative")

    def density(self, x: np.ndarray) -> np.ndarray:
        """Two-piece logistic density, continuous at the centre.

        Each side is a logistic with its own scale; the shared height
        ``1 / (2 (s_l + s_r))`` at the centre makes the whole density
        integrate to one.
        """
        x = np.asarray(x, dtype=float)
        scale = np.where(x < self.center, self.left_width, self.right_width)
        e = np.exp(-np.abs(x - self.center) / scale)
        return 2.0 / (self.left_width + self.right_width) * e / (1.0 + e) ** 2


@dataclass(frozen=True)
class ForecastRecord:
    participant_id: str
    created_at: datetime
    window_start: date
    window_end: date
    pmf: np.ndarray | None = None
    components: tuple[LogisticComponent, ...] | None = None

    def __post_init__(self):
        if self.window_end <= self.window_start:
            raise ValueError("window_end must be after window_start")
        if (self.pmf is None) == (self.components is None):
            raise ValueError("a record carries exactly one of pmf or components")
        if self.pmf is not None:
            pmf = np.asarray(self.pmf, dtype=float)
            if pmf.shape != (N_BINS,):
                raise ValueError(f"pmf must have {N_BINS} entries, got {pmf.size}")
            if np.any(pmf < 0) or abs(pmf.sum() - 1.0) > 1e-6:
                raise ValueError("pmf entries must be non-negative and sum to 1")
            object.__setattr__(self, "pmf", pmf)
        else:
            comps = tuple(self.components)
            if not 1 <= len(comps) <= MAX_COMPONENTS:
                raise ValueError(f"mixture needs 1 to {MAX_COMPONENTS} components")
            if abs(sum(c.weight for c in comps) - 1.0) > 1e-6:
                raise ValueError("mixture weights must sum to 1")
            object.__setattr__(self, "components", comps)
        created = self.created_at
        if created.tzinfo is None:
            created = created.replace(tzinfo=timezone.utc)
        object.__setattr__(self, "created_at", created.astimezone(timezone.utc))

    @property
    def prediction_date(self) -> date:
        return self.created_at.date()

    def distribution(self) -> np.ndarray:
        return self.pmf if self.pmf is not None else discretize_mixture(self)


@dataclass(frozen=True)
class Prediction:
    participant_id: str
    prediction_date: date
    predicted_date: date
    t_past: int
    t_predicted: int
    median_bin: int | None = field(default=None, compare=False)
    window_start: date | None = field(default=None, compare=False)
    window_end: date | None = field(default=None, compare=False)

    @property
    def horizon(self) -> int:
        return self.t_predicted - self.t_past

    @classmethod
    def from_dates(cls, participant_id: str, prediction_date: date, predicted_date: date,
                   t_0: date = DEFAULT_T0, **extra) -> Prediction:
        return cls(participant_id, prediction_date, predicted_date,
                   (prediction_date - t_0).days, (predicted_date - t_0).days, **extra)


@dataclass(frozen=True)
class FilterReport:
    input_count: int
    removed_endpoint: int
    removed_pre_t0: int
    removed_impossible: int
    output_count: int
    participants_in: int
    participants_out: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def bin_midpoints() -> np.ndarray:
    return (np.arange(N_BINS) + 0.5) / N_BINS


def discretize_mixture(record: ForecastRecord) -> np.ndarray:
    """Evaluate the mixture at the 101 bin midpoints and renormalise."""
    if record.components is None:
        raise ValueError("record does not hold a mixture")
    x = bin_midpoints()
    dens = sum(c.weight * c.density(x) for c in record.components)
    total = dens.sum()
    if not total > 0:
        raise DegenerateDistributionError("mixture has no mass inside the prediction window")
    return dens / total


def median_bin(pmf: np.ndarray) -> int:
    """Smallest bin index whose cumulative mass reaches 0.5.

    The slack only absorbs summation rounding; it must stay far below the
    genuine tail mass of narrow mixtures or the crossing lands early.
    """
    cdf = np.cumsum(pmf)
    return min(int(np.searchsorted(cdf, 0.5 - 1e-14, side="left")), len(cdf) - 1)


def bin_date(index: int, window_start: date, window_days: int = 84) -> date:
    """Calendar day containing the start of bin ``index``."""
    return window_start + timedelta(days=(index * window_days) // N_BINS)


def median_date(pmf: np.ndarray, window_start: date, window_days: int = 84) -> date:
    return bin_date(median_bin(pmf), window_start, window_days)


def to_prediction(record: ForecastRecord, t_0: date = DEFAULT_T0) -> Prediction:
    pmf = record.distribution()
    window_days = (record.window_end - record.window_start).days
    idx = median_bin(pmf)
    return Prediction.from_dates(record.participant_id, record.prediction_date,
                                 bin_date(idx, record.window_start, window_days), t_0,
                                 median_bin=idx, window_start=record.window_start,
                                 window_end=record.window_end)


def _is_endpoint(p: Prediction, window_start: date | None, window_end: date | None) -> bool:
    lo = p.window_start or window_start
    hi = p.window_end or window_end
    if p.median_bin is not None and p.median_bin in (0, N_BINS - 1):
        return True
    return p.predicted_date in (lo, hi)


def apply_filters(predictions: Sequence[Prediction], window_start: date | None = None,
                  window_end: date | None = None, t_0: date = DEFAULT_T0
                  ) -> tuple[list[Prediction], FilterReport]:
    """Drop end-point, pre-t_0 and impossible predictions, in that order.

    A prediction is an end-point forecast when its median sits in the first
    or last bin, or its predicted date equals a window bound. Per-record
    windows take precedence over the arguments. "Pre-t_0" covers both a
    prediction made before t_0 and a predicted date before t_0; either would
    give a negative duration. "Impossible" means t_predicted < t_past.
    """
    stage1 = [p for p in predictions if not _is_endpoint(p, window_start, window_end)]
    stage2 = [p for p in stage1 if p.prediction_date >= t_0 and p.predicted_date >= t_0]
    stage3 = [p for p in stage2 if p.t_predicted >= p.t_past]
    report = FilterReport(
        input_count=len(predictions),
        removed_endpoint=len(predictions) - len(stage1),
        removed_pre_t0=len(stage1) - len(stage2),
        removed_impossible=len(stage2) - len(stage3),
        output_count=len(stage3),
        participants_in=len({p.participant_id for p in predictions}),
        participants_out=len({p.participant_id for p in stage3}),
    )
    return stage3, report


@dataclass(frozen=True)
class DailyAggregate:
    date: date
    mean_t_predicted: float
    mean_horizon: float
    n: int


def aggregate_daily(predictions: Iterable[Prediction]) -> list[DailyAggregate]:
    """Average t_predicted and horizon over each UTC prediction day."""
    groups: dict[date, list[Prediction]] = {}
    for p in predictions:
        groups.setdefault(p.prediction_date, []).append(p)
    rows = []
    for day in sorted(groups):
        grp = groups[day]
        rows.append(DailyAggregate(
            day,
            math.fsum(p.t_predicted for p in grp) / len(grp),
            math.fsum(p.horizon for p in grp) / len(grp),
            len(grp),
        ))
    return rows


def ground_truth_horizon(dates: Iterable[date], peak_date: date = date(2022, 1, 13)) -> list[int]:
    return [(peak_date - d).days for d in dates]


# -- interchange file -------------------------------------------------------

def _parse_date(value: str) -> date:
    return date.fromisoformat(value)


def _parse_timestamp(value: str) -> datetime:
    ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def record_from_dict(doc: dict) -> ForecastRecord:
    pmf = doc.get("pmf")
    comps = doc.get("components")
    if isinstance(pmf, str):
        pmf = [float(x) for x in pmf.split(",")]
    return ForecastRecord(
        participant_id=str(doc["participant_id"]),
        created_at=_parse_timestamp(doc["created_at"]),
        window_start=_parse_date(doc["window_start"]),
        window_end=_parse_date(doc["window_end"]),
        pmf=None if pmf is None else np.asarray(pmf, dtype=float),
        components=None if comps is None else tuple(LogisticComponent(*c) for c in comps),
    )


def record_to_dict(record: ForecastRecord) -> dict:
    doc = {
        "participant_id": record.participant_id,
        "created_at": record.created_at.isoformat().replace("+00:00", "Z"),
        "window_start": record.window_start.isoformat(),
        "window_end": record.window_end.isoformat(),
    }
    if record.pmf is not None:
        doc["pmf"] = [float(x) for x in record.pmf]
    else:
        doc["components"] = [[c.center, c.left_width, c.right_width, c.weight]
                             for c in record.components]
    return doc


def read_forecasts(path) -> list[ForecastRecord]:
    """Read a JSON-lines forecast file; blank lines and ``#`` comments are skipped."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                records.append(record_from_dict(json.loads(line)))
            except (KeyError, TypeError, ValueError) as exc:
                raise RecordError(f"{type(exc).__name__}: {exc}", line=lineno) from exc
    return records


def write_forecasts(records: Iterable[ForecastRecord], path) -> None:
    lines = [json.dumps(record_to_dict(r), sort_keys=True) for r in records]
    Path(path).write_text("\n".join(lines) + "\n")
