#!/usr/bin/env python3
"""Generate the bundled synthetic fixture.

Writes, under tests/fixtures/:
  forecasts.jsonl  20 participants x 6 forecasts over three tournament rounds
  labels.json      intended filter outcome per record (by line number)
  cases.csv        cumulative case counts for three districts with one revision

Every forecast is built so its median lands well inside a bin, away from
any boundary, so the intended label is unambiguous.
"""

from __future__ import annotations

import csv
import json
from datetime import date, datetime, time, timedelta, timezone
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures"
SEED = 20211129
T0 = date(2021, 11, 29)

# (forecasting window, prediction window start); prediction windows run 84 days
ROUNDS = [
    ((date(2021, 11, 12), date(2021, 12, 3)), date(2021, 11, 12)),
    ((date(2021, 12, 3), date(2021, 12, 24)), date(2021, 12, 3)),
    ((date(2021, 12, 24), date(2022, 1, 14)), date(2021, 12, 24)),
]
WINDOW_DAYS = 84
N_BINS = 101


def bin_for_day(offset_days: int) -> int:
    """A bin whose start falls on the given day offset (exists for 0..83)."""
    for i in range(N_BINS):
        if (i * WINDOW_DAYS) // N_BINS == offset_days:
            return i
    raise ValueError(offset_days)


def point_pmf(bin_index: int) -> list[float]:
    pmf = [0.0] * N_BINS
    pmf[bin_index] = 1.0
    return pmf


def spread_pmf(bin_index: int, rng) -> list[float]:
    """Symmetric triangle around ``bin_index``; its median is that bin."""
    half = int(rng.integers(2, 6))
    w = np.zeros(N_BINS)
    for k in range(-half, half + 1):
        j = bin_index + k
        if 0 <= j < N_BINS:
            w[j] = half + 1 - abs(k)
    return [float(x) for x in w / w.sum()]


def mixture_for_bin(bin_index: int, rng) -> list[list[float]]:
    """Single symmetric logistic centred on the bin midpoint."""
    width = float(rng.uniform(0.01, 0.04))
    return [[(bin_index + 0.5) / N_BINS, width, width, 1.0]]


def predicted_peak(prediction_day: date, participant_bias: int) -> date:
    """Hidden 'crowd' belief: rises, falls, then rises again."""
    k = (prediction_day - date(2021, 11, 12)).days
    shape = 8 * np.sin(k / 62 * 2.5 * np.pi)
    return date(2022, 1, 8) + timedelta(days=int(round(shape)) + participant_bias)


def make_forecasts(rng):
    records, labels = [], {}
    forced = {  # (participant, slot) -> violation
        (0, 0): "endpoint", (5, 2): "endpoint", (11, 4): "endpoint",
        (3, 5): "impossible", (8, 3): "impossible", (17, 5): "impossible",
    }
    for pid in range(20):
        bias = int(rng.integers(-6, 7))
        for slot in range(6):
            rnd = slot // 2
            (f_lo, f_hi), w_start = ROUNDS[rnd]
            day = f_lo + timedelta(days=int(rng.integers(0, (f_hi - f_lo).days)))
            label = forced.get((pid, slot))
            if label is None:
                label = "pre_t0" if day < T0 else "ok"
            if label == "endpoint":
                b = 0 if slot % 2 == 0 else N_BINS - 1
            elif label == "impossible":
                day = max(day, w_start + timedelta(days=10), T0 + timedelta(days=10))
                b = bin_for_day((day - w_start).days - 5)
            else:
                target = predicted_peak(day, bias)
                offset = min(max((target - w_start).days, 2), WINDOW_DAYS - 3)
                b = bin_for_day(offset)
                if label == "ok" and (w_start + timedelta(days=offset)) < day:
                    b = bin_for_day(min((day - w_start).days + 3, WINDOW_DAYS - 3))
            ts = datetime.combine(day, time(int(rng.integers(0, 24)), int(rng.integers(0, 60))),
                                  tzinfo=timezone.utc)
            doc = {
                "participant_id": f"P{pid:02d}",
                "created_at": ts.isoformat().replace("+00:00", "Z"),
                "window_start": w_start.isoformat(),
                "window_end": (w_start + timedelta(days=WINDOW_DAYS)).isoformat(),
            }
            kind = rng.integers(0, 3)
            if label == "endpoint" or kind == 0:
                doc["pmf"] = point_pmf(b)
            elif kind == 1:
                doc["pmf"] = spread_pmf(b, rng)
            else:
                doc["components"] = mixture_for_bin(b, rng)
            records.append(doc)
            labels[str(len(records))] = label
    return records, labels


def make_cases(rng):
    start, end = date(2021, 10, 1), date(2022, 2, 28)
    n = (end - start).days + 1
    t = np.arange(n)
    peak = (date(2022, 1, 13) - start).days
    # slow growth, a sharp take-off in mid-December, peak on Jan 13
    wave = 12000 * np.exp(-0.5 * ((t - peak) / 11.0) ** 2)
    base = 1500 + 400 * np.tanh((t - 60) / 10)
    districts = {"Central": 0.45, "Eastern": 0.35, "Northern": 0.20}
    rows = []
    for name, share in districts.items():
        daily = rng.poisson(np.maximum(share * (wave + base), 1))
        cum = np.cumsum(daily)
        if name == "Eastern":
            cum[80] = cum[79] - 25  # quality-assurance revision
        for i in range(n):
            d = start + timedelta(days=i)
            rows.append((d.strftime("%m/%d/%Y"), name, int(cum[i])))
    return rows


def main():
    rng = np.random.default_rng(SEED)
    OUT.mkdir(parents=True, exist_ok=True)
    records, labels = make_forecasts(rng)
    with open(OUT / "forecasts.jsonl", "w") as fh:
        for doc in records:
            fh.write(json.dumps(doc, sort_keys=True) + "\n")
    (OUT / "labels.json").write_text(json.dumps(labels, indent=1, sort_keys=True) + "\n")
    with open(OUT / "cases.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Report Date", "Health District", "Total Cases"])
        w.writerows(make_cases(rng))
    counts = {}
    for lab in labels.values():
        counts[lab] = counts.get(lab, 0) + 1
    print(counts)


if __name__ == "__main__":
    main()
