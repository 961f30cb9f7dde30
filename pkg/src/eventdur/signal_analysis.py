"""Case-count transform, polynomial trends and SDAR change-point scoring."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from typing import Sequence

import numpy as np


class MalformedSeriesError(ValueError):
    pass


class FitError(ValueError):
    pass


class InsufficientDataError(ValueError):
    pass


class AlignmentError(ValueError):
    pass


def _check_daily(dates: Sequence[date]) -> None:
    for prev, cur in zip(dates, dates[1:]):
        if cur <= prev:
            raise MalformedSeriesError(f"dates not strictly increasing at {prev} -> {cur}")
        if (cur - prev).days != 1:
            raise MalformedSeriesError(f"gap in daily series between {prev} and {cur}")


def rolling_mean(values, window: int, center: bool = True) -> np.ndarray:
    """Moving average that shrinks its window where data runs out.

    Centred windows shrink symmetrically at the edges; trailing windows use
    whatever history exists.
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    out = np.empty(n)
    if center:
        half = window // 2
        for i in range(n):
            h = min(half, i, n - 1 - i)
            out[i] = x[i - h:i + h + 1].mean()
    else:
        for i in range(n):
            out[i] = x[max(0, i - window + 1):i + 1].mean()
    return out


@dataclass(frozen=True)
class CaseCountSeries:
    dates: list[date]
    cumulative: np.ndarray
    daily: np.ndarray
    smoothed: np.ndarray

    def between(self, start: date, end: date) -> CaseCountSeries:
        """Restrict to ``start..end`` inclusive, keeping smoothing done on the full span."""
        idx = [i for i, d in enumerate(self.dates) if start <= d <= end]
        if not idx:
            raise MalformedSeriesError(f"no case data between {start} and {end}")
        sl = slice(idx[0], idx[-1] + 1)
        return CaseCountSeries(self.dates[sl], self.cumulative[sl], self.daily[sl],
                               self.smoothed[sl])


def transform_cases(dates: Sequence[date], cumulative, window: int = 7) -> CaseCountSeries:
    """Daily differences of a cumulative count plus a centred rolling mean.

    The first date has no predecessor and is dropped. Downward revisions in
    the cumulative count show up as negative daily values and are kept.
    """
    dates = list(dates)
    cum = np.asarray(cumulative, dtype=np.int64)
    if len(dates) != cum.size:
        raise MalformedSeriesError("dates and counts differ in length")
    if cum.size < 2:
        raise MalformedSeriesError("need at least two days of cumulative counts")
    _check_daily(dates)
    daily = np.diff(cum)
    return CaseCountSeries(dates[1:], cum[1:], daily, rolling_mean(daily, window))


def _parse_day(text: str) -> date:
    text = text.strip()
    for fmt in ("%Y-%m-%d", "%m/%d/%Y", "%m/%d/%y", "%Y/%m/%d"):
        try:
            return datetime.strptime(text, fmt).date()
        except ValueError:
            pass
    # ISO timestamps such as 2021-11-12T00:00:00
    return datetime.fromisoformat(text).date()


def load_case_counts(path, date_column: str = "Report Date",
                     count_column: str = "Total Cases") -> tuple[list[date], np.ndarray]:
    """Read a delimited case file, summing counts over rows sharing a date.

    Returns dates in order and the cumulative total per date. Raises
    :class:`MalformedSeriesError` naming the row on bad input.
    """
    totals: dict[date, int] = {}
    with open(path, newline="", encoding="utf-8-sig") as fh:
        sample = fh.read(4096)
        fh.seek(0)
        dialect = csv.Sniffer().sniff(sample, delimiters=",;\t|")
        reader = csv.DictReader(fh, dialect=dialect)
        missing = {date_column, count_column} - set(reader.fieldnames or ())
        if missing:
            raise MalformedSeriesError(f"missing column(s): {', '.join(sorted(missing))}")
        for rowno, row in enumerate(reader, start=2):
            try:
                day = _parse_day(row[date_column])
                count = int(float(row[count_column].replace(",", "") or 0))
            except (ValueError, AttributeError) as exc:
                raise MalformedSeriesError(f"row {rowno}: {exc}") from exc
            totals[day] = totals.get(day, 0) + count
    days = sorted(totals)
    return days, np.array([totals[d] for d in days], dtype=np.int64)


# -- polynomial trends -------------------------------------------------------

@dataclass(frozen=True)
class TrendFit:
    """Least-squares polynomial in rescaled time ``u = (day - day0) / span``.

    ``coefficients`` are in ascending powers of ``u``. ``d1`` and ``d2`` are
    per-day derivatives of the fitted curve, found by finite differences.
    """

    dates: list[date]
    degree: int
    coefficients: np.ndarray
    fitted: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    origin: date
    span_days: float

    def evaluate(self, u) -> np.ndarray:
        return np.polynomial.polynomial.polyval(u, self.coefficients)


def _rescale(dates: Sequence[date]) -> tuple[np.ndarray, date, float]:
    origin = dates[0]
    days = np.array([(d - origin).days for d in dates], dtype=float)
    span = days.max() - days.min()
    if span <= 0:
        raise FitError("fit needs at least two distinct dates")
    return days / span, origin, float(span)


def _central_diff(f, u: np.ndarray, order: int, h: float) -> np.ndarray:
    """Richardson-extrapolated central difference (error O(h**4))."""
    def step(h):
        if order == 1:
            return (f(u + h) - f(u - h)) / (2 * h)
        return (f(u + h) - 2 * f(u) + f(u - h)) / (h * h)
    return (4 * step(h / 2) - step(h)) / 3


def fit_trend(dates: Sequence[date], values, degree: int = 6) -> TrendFit:
    dates = list(dates)
    y = np.asarray(values, dtype=float)
    if degree < 1:
        raise FitError("degree must be >= 1")
    if len(dates) != y.size:
        raise FitError("dates and values differ in length")
    if len(set(dates)) != len(dates):
        raise FitError("duplicate dates make the design rank-deficient")
    if y.size < degree + 1:
        raise FitError(f"degree {degree} needs at least {degree + 1} points, got {y.size}")
    u, origin, span = _rescale(dates)
    design = np.vander(u, degree + 1, increasing=True)
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < degree + 1:
        raise FitError(f"rank-deficient design (rank {rank} < {degree + 1})")

    def f(x):
        return np.polynomial.polynomial.polyval(x, coef)

    h = 1e-3
    d1 = _central_diff(f, u, 1, h) / span
    d2 = _central_diff(f, u, 2, h) / span ** 2
    return TrendFit(dates, degree, coef, f(u), d1, d2, origin, span)


# -- SDAR change points ------------------------------------------------------

class SDAR:
    """Sequentially discounted AR(k) model with Gaussian innovations.

    Each call to :meth:`score_and_update` returns the negative
    log-likelihood of the new point under the model as it stood *before*
    seeing it, then folds the point in with forgetting rate ``r``.
    """

    def __init__(self, r: float, order: int, warmup: Sequence[float]):
        if not 0 < r < 1:
            raise ValueError("discount rate must lie in (0, 1)")
        warm = np.asarray(warmup, dtype=float)
        if warm.size < order + 1:
            raise ValueError("warm-up needs order + 1 points")
        self.r = r
        self.order = order
        self.mu = float(warm.mean())
        var = float(warm.var())
        self.var_floor = 1e-12 * max(1.0, float(np.abs(warm).max()) ** 2)
        self.sigma2 = max(var, self.var_floor)
        self.c = np.zeros(order + 1)
        self.c[0] = self.sigma2
        self.coef = np.zeros(order)
        self.history = list(warm[-order:]) if order else []

    def _predict(self) -> float:
        lags = np.array(self.history[::-1]) - self.mu
        return self.mu + float(np.dot(self.coef, lags))

    def score_and_update(self, x: float) -> float:
        r = self.r
        x_hat = self._predict()
        resid = x - x_hat
        score = 0.5 * math.log(2 * math.pi * self.sigma2) + 0.5 * resid * resid / self.sigma2

        self.mu = (1 - r) * self.mu + r * x
        dev = x - self.mu
        lags = np.array(self.history[::-1]) - self.mu
        self.c[0] = (1 - r) * self.c[0] + r * dev * dev
        self.c[1:] = (1 - r) * self.c[1:] + r * dev * lags
        toeplitz = self.c[np.abs(np.subtract.outer(np.arange(self.order), np.arange(self.order)))]
        try:
            coef = np.linalg.solve(toeplitz, self.c[1:])
            if np.all(np.isfinite(coef)):
                self.coef = coef
        except np.linalg.LinAlgError:
            pass
        resid_new = x - (self.mu + float(np.dot(self.coef, lags)))
        self.sigma2 = max((1 - r) * self.sigma2 + r * resid_new * resid_new, self.var_floor)

        self.history.append(x)
        self.history.pop(0)
        return score


def _sdar_scores(x: np.ndarray, r: float, order: int) -> np.ndarray:
    """Log-loss per point; the warm-up points score as NaN."""
    warm = order + 1
    model = SDAR(r, order, x[:warm])
    out = np.full(x.size, np.nan)
    for t in range(warm, x.size):
        out[t] = model.score_and_update(float(x[t]))
    return out


def _trailing_mean_nan(x: np.ndarray, window: int) -> np.ndarray:
    out = np.full(x.size, np.nan)
    for t in range(x.size):
        w = x[max(0, t - window + 1):t + 1]
        w = w[np.isfinite(w)]
        if w.size:
            out[t] = w.mean()
    return out


@dataclass(frozen=True)
class ChangePointReport:
    scores: np.ndarray
    detected: list[int]
    discount_rate: float
    order: int
    smoothing_days: int
    burn_in: int


def local_maxima(scores: np.ndarray, start: int = 0) -> list[int]:
    """Indices of strict-left / weak-right local maxima from ``start`` on."""
    peaks = []
    n = scores.size
    for i in range(start, n):
        left = scores[i - 1] if i > start else -np.inf
        right = scores[i + 1] if i + 1 < n else -np.inf
        if scores[i] > left and scores[i] >= right:
            peaks.append(i)
    return peaks


def sdar_change_points(values, discount_rate: float = 0.01, order: int = 3,
                       smoothing_days: int = 5, top_k: int | None = 3,
                       threshold: float | None = None) -> ChangePointReport:
    """Two-stage SDAR change-point scoring.

    Stage one scores each point by its log-loss under an online AR model and
    smooths the scores over ``smoothing_days``. Stage two runs a second
    SDAR on the smoothed scores and smooths again. Negative log-losses carry
    no change evidence and are clipped to zero; the first ``2 * order``
    points after warm-up are treated as burn-in.

    Detected change points are local maxima of the final score, in
    descending score order, cut to ``top_k`` and/or filtered by
    ``threshold``.
    """
    x = np.asarray(values, dtype=float)
    if not 0 < discount_rate < 1:
        raise ValueError("discount_rate must lie in (0, 1)")
    if order < 1 or smoothing_days < 1:
        raise ValueError("order and smoothing_days must be positive")
    if x.size <= order + 2 * smoothing_days:
        raise InsufficientDataError(
            f"series of length {x.size} too short for order {order} "
            f"and smoothing {smoothing_days}")

    stage1 = _trailing_mean_nan(_sdar_scores(x, discount_rate, order), smoothing_days)
    first = int(np.argmax(np.isfinite(stage1)))
    y = stage1[first:]
    stage2 = np.full(x.size, np.nan)
    if y.size > order + 1:
        stage2[first:] = _trailing_mean_nan(_sdar_scores(y, discount_rate, order),
                                            smoothing_days)
    burn_in = min(x.size, first + order + 1 + 2 * order)
    scores = np.where(np.isfinite(stage2), np.maximum(stage2, 0.0), 0.0)
    # peaks are found before masking so a decaying start-up transient is not
    # mistaken for a peak at the burn-in boundary
    peaks = [i for i in local_maxima(scores) if i >= burn_in and scores[i] > 0]
    scores[:burn_in] = 0.0
    if threshold is not None:
        peaks = [i for i in peaks if scores[i] >= threshold]
    peaks.sort(key=lambda i: (-scores[i], i))
    if top_k is not None:
        peaks = peaks[:top_k]
    return ChangePointReport(scores, peaks, discount_rate, order, smoothing_days, burn_in)


# -- joint dynamics ----------------------------------------------------------

@dataclass(frozen=True)
class JointDynamics:
    dates: list[date]
    case_d1: np.ndarray
    prediction_d1: np.ndarray
    sign_opposition: float


def joint_dynamics(case_fit: TrendFit, prediction_fit: TrendFit) -> JointDynamics:
    """Pair the two first-derivative series on their common dates.

    ``sign_opposition`` is the fraction of common days on which cases are
    rising while predicted durations are falling.
    """
    case_idx = {d: i for i, d in enumerate(case_fit.dates)}
    common = [d for d in prediction_fit.dates if d in case_idx]
    if not common:
        raise AlignmentError("case and prediction fits share no dates")
    pred_idx = {d: i for i, d in enumerate(prediction_fit.dates)}
    c = np.array([case_fit.d1[case_idx[d]] for d in common])
    p = np.array([prediction_fit.d1[pred_idx[d]] for d in common])
    frac = float(np.mean((c > 0) & (p < 0)))
    return JointDynamics(common, c, p, frac)


def date_range(start: date, end: date) -> list[date]:
    return [start + timedelta(days=i) for i in range((end - start).days + 1)]
