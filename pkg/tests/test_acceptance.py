"""Acceptance criteria, one check per criterion at its stated tolerance.

Run under pytest (each criterion prints a PASS/FAIL line) or directly with
``python3 tests/test_acceptance.py`` for the summary table alone.
"""

from __future__ import annotations

import json
import math
import os
import sys
import tempfile
import time
from datetime import date, datetime, timedelta, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from eventdur.cli import main as cli_main  # noqa: E402
from eventdur.duration_model import (  # noqa: E402
    LikelihoodSpec,
    SampledPrior,
    posterior,
    predict,
    sample_poisson_prior,
)
from eventdur.forecast_ingest import (  # noqa: E402
    N_BINS,
    ForecastRecord,
    apply_filters,
    bin_date,
    read_forecasts,
    to_prediction,
)
from eventdur.prior_recovery import build_table, recover_prior  # noqa: E402
from eventdur.scenario_sim import (  # noqa: E402
    ScenarioConfig,
    ScenarioMode,
    run_invariant_prediction,
)
from eventdur.signal_analysis import (  # noqa: E402
    fit_trend,
    load_case_counts,
    sdar_change_points,
    transform_cases,
)
from oracles import enumerate_posterior  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"
T0 = date(2021, 11, 29)
VDH_ENV = "VDH_CASES_CSV"
VDH_DEFAULT = FIXTURES / "vdh_cases.csv"


def c01_prior_crash_anchors():
    start = time.perf_counter()
    table = build_table(20, 200, 1, range(0, 51), sample_count=1000, seed=7)
    cfg = ScenarioConfig(ScenarioMode.INVARIANT_PREDICTION, 50, [41, 47, 49], table=table,
                         unit="minutes")
    medians = [p.prior_median for p in run_invariant_prediction(cfg)]
    elapsed = time.perf_counter() - start
    target = [50, 44, 32]
    ok = all(abs(m - t) <= 3 for m, t in zip(medians, target)) and elapsed < 30
    return ok, f"medians {medians} vs {target} +-3, {elapsed:.1f}s"


def c02_crash_monotone():
    table = build_table(20, 200, 1, range(0, 51), sample_count=1000, seed=7)
    cfg = ScenarioConfig(ScenarioMode.INVARIANT_PREDICTION, 50, range(30, 50), table=table)
    lams = [p.lam for p in run_invariant_prediction(cfg)]
    ok = all(a >= b for a, b in zip(lams, lams[1:]))
    return ok, f"lambda {lams[0]:g} -> {lams[-1]:g} over t_past 30..49"


def c03_invariant_prior_growth():
    preds = [predict(sample_poisson_prior(79, 10_000, seed), 79) for seed in range(100)]
    good = sum(79 < p < 95 for p in preds)
    return good == 100, f"{good}/100 seeds in (79, 95); range {min(preds):g}..{max(preds):g}"


def c04_exponent_effect():
    rng = np.random.default_rng(4)
    strict = checked = 0
    ok = True
    for _ in range(50):
        prior = sample_poisson_prior(float(rng.uniform(5, 150)), int(rng.integers(50, 2000)),
                                     int(rng.integers(0, 2**31)))
        t_past = float(rng.integers(0, int(prior.values.max()) + 1))
        support = np.count_nonzero((prior.values >= t_past) & (prior.values > 0))
        m1, m2 = predict(prior, t_past, 1, "mean"), predict(prior, t_past, 2, "mean")
        if support >= 2:
            checked += 1
            strict += m2 < m1
            ok &= m2 < m1
        ok &= predict(prior, t_past, 2, "median") <= predict(prior, t_past, 1, "median")
    return ok, f"mean strictly lower in {strict}/{checked} multi-point cases; median never higher"


def c05_oracle_equivalence():
    rng = np.random.default_rng(5)
    worst = 0.0
    cases = 0
    while cases < 1000:
        k = int(rng.integers(1, 11))
        support = rng.choice(np.arange(0, 120), size=k, replace=False)
        counts = rng.integers(1, 50, size=k)
        total = int(counts.sum())
        t_past = int(rng.integers(0, 120))
        n = int(rng.integers(1, 4))
        exact_prior = {int(s): Fraction(int(c), total) for s, c in zip(support, counts)}
        try:
            exact = enumerate_posterior(exact_prior, t_past, n)
        except ValueError:
            continue
        prior = SampledPrior.from_pmf({int(s): int(c) / total for s, c in zip(support, counts)})
        post = posterior(prior, LikelihoodSpec(t_past, n)).pmf
        if set(post) != set(exact):
            return False, f"support mismatch at case {cases}"
        worst = max(worst, max(abs(post[v] - float(exact[v])) for v in exact))
        cases += 1
    return worst <= 1e-12, f"max |diff| {worst:.2e} over {cases} cases"


def c06_round_trip():
    table = build_table(20, 39, 1, range(0, 30), sample_count=1000, seed=7)
    cells = hits = 0
    for i in range(table.lambda_grid.size):
        for j, t in enumerate(table.t_past_grid):
            entry = table.predictions[i, j]
            if not math.isfinite(entry):
                continue
            cells += 1
            rec = recover_prior(table, t, entry)
            k = int(np.searchsorted(table.lambda_grid, rec.lam))
            hits += table.predictions[k, j] == entry
    return cells == 600 and hits == cells, f"{hits}/{cells} cells of a 20x30 table"


def c07_filter_counts():
    labels = list(json.loads((FIXTURES / "labels.json").read_text()).values())
    preds = [to_prediction(r, T0) for r in read_forecasts(FIXTURES / "forecasts.jsonl")]
    _, rep = apply_filters(preds, t_0=T0)
    got = (rep.removed_endpoint, rep.removed_pre_t0, rep.removed_impossible, rep.output_count)
    want = tuple(labels.count(k) for k in ("endpoint", "pre_t0", "impossible", "ok"))
    return got == want and rep.input_count == len(labels), f"removed/kept {got} vs labels {want}"


def c08_median_extraction():
    window_start = date(2021, 12, 3)
    idx = next(i for i in range(N_BINS) if bin_date(i, window_start) == date(2022, 1, 2))
    pmf = np.zeros(N_BINS)
    pmf[idx - 2:idx + 3] = [0.1, 0.2, 0.4, 0.2, 0.1]
    rec = ForecastRecord("P", datetime(2021, 12, 10, tzinfo=timezone.utc), window_start,
                         window_start + timedelta(days=84), pmf=pmf)
    p = to_prediction(rec, T0)
    return p.t_predicted == 34, f"median bin {p.median_bin} -> {p.predicted_date}, " \
                                f"t_predicted {p.t_predicted}"


def c09_sdar_shift():
    hits = 0
    slowest = 0.0
    for seed in range(100):
        x = np.random.default_rng(seed).normal(0.0, 1.0, 200)
        x[100:] += 10.0
        start = time.perf_counter()
        rep = sdar_change_points(x, 0.01, 3, 5)
        slowest = max(slowest, time.perf_counter() - start)
        hits += bool(rep.detected) and abs(rep.detected[0] - 100) <= 7
    return hits >= 95 and slowest < 1, f"{hits}/100 within +-7, slowest {slowest * 1e3:.0f} ms"


def c10_sdar_public_data():
    path = Path(os.environ.get(VDH_ENV) or VDH_DEFAULT)
    if not path.is_file():
        return False, f"public case file not found at {path} (set {VDH_ENV})"
    dates, cum = load_case_counts(path)
    series = transform_cases(dates, cum).between(date(2021, 11, 12), date(2022, 1, 14))
    rep = sdar_change_points(series.smoothed, 0.01, 3, 5, top_k=3)
    found = [series.dates[i] for i in rep.detected]
    ok = len(found) == 3 and all(d < date(2022, 1, 14) for d in found)
    return ok, f"{len(found)} change points: {', '.join(map(str, sorted(found)))}"


def c11_trend_differentials():
    t = np.arange(64, dtype=float)
    y = 0.5 * t ** 2 - 3 * t + 7
    fit = fit_trend([date(2021, 11, 12) + timedelta(days=i) for i in range(64)], y, 2)
    e1 = float(np.max(np.abs(fit.d1 - (t - 3))))
    e2 = float(np.max(np.abs(fit.d2 - 1)))
    return max(e1, e2) <= 1e-6, f"max d1 error {e1:.1e}, d2 error {e2:.1e}"


def c12_determinism():
    with tempfile.TemporaryDirectory() as tmp:
        a, b = Path(tmp, "a"), Path(tmp, "b")
        code = cli_main(["--out", str(a), "pipeline",
                         "--forecasts", str(FIXTURES / "forecasts.jsonl"),
                         "--cases", str(FIXTURES / "cases.csv")])
        if code:
            return False, f"pipeline exited {code}"
        code = cli_main(["--manifest", str(a / "manifest.json"), "--out", str(b)])
        names = sorted(p.name for p in a.iterdir())
        same = [n for n in names if (b / n).is_file()
                and (a / n).read_bytes() == (b / n).read_bytes()]
    return code == 0 and same == names, f"{len(same)}/{len(names)} artifacts identical"


CRITERIA = [
    (1, "prior-crash anchors 50/44/32", c01_prior_crash_anchors),
    (2, "prior-crash monotonicity", c02_crash_monotone),
    (3, "invariant-prior growth", c03_invariant_prior_growth),
    (4, "observation-count exponent effect", c04_exponent_effect),
    (5, "forward model vs enumeration", c05_oracle_equivalence),
    (6, "table round-trip recovery", c06_round_trip),
    (7, "filter pipeline counts", c07_filter_counts),
    (8, "median extraction to 34 days", c08_median_extraction),
    (9, "SDAR synthetic level shift", c09_sdar_shift),
    (10, "SDAR on public case data", c10_sdar_public_data),
    (11, "trend differentials", c11_trend_differentials),
    (12, "pipeline determinism", c12_determinism),
]


def _line(num, name, ok, detail):
    return f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d}: {name}: {detail}"


@pytest.mark.parametrize("num,name,check", CRITERIA, ids=[f"c{n:02d}" for n, _, _ in CRITERIA])
def test_criterion(num, name, check, capsys):
    ok, detail = check()
    with capsys.disabled():
        print("\n" + _line(num, name, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for num, name, check in CRITERIA:
        ok, detail = check()
        failed += not ok
        print(_line(num, name, ok, detail))
    sys.exit(1 if failed else 0)
