#!/usr/bin/env python3
"""Regenerate the golden pipeline outputs for the bundled fixture.

Runs ``eventdur pipeline`` on tests/fixtures and copies the reviewed
artifacts into tests/fixtures/golden/. Only rerun after a deliberate
behaviour change; the test suite cross-checks these files independently.
"""

from __future__ import annotations

import shutil
import sys
import tempfile
from pathlib import Path

from eventdur.cli import main

ROOT = Path(__file__).resolve().parents[1]
FIX = ROOT / "tests" / "fixtures"
GOLDEN = FIX / "golden"
KEEP = ("filter_report.json", "recovered_priors.csv", "change_points.json", "daily.csv")

ARGS = ["pipeline", "--forecasts", str(FIX / "forecasts.jsonl"),
        "--cases", str(FIX / "cases.csv"), "--lambda", "20..200", "--samples", "1000",
        "--seed", "7"]


def run() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        code = main(["--out", tmp, *ARGS])
        if code:
            return code
        GOLDEN.mkdir(exist_ok=True)
        for name in KEEP:
            shutil.copyfile(Path(tmp) / name, GOLDEN / name)
    print(f"wrote {', '.join(KEEP)} to {GOLDEN}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
