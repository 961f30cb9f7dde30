import csv
import json
import subprocess
import sys

import pytest

from eventdur import __version__
from eventdur.cli import main, parse_range, parse_sdar
from eventdur.prior_recovery import RecoveryTable
from oracles import scan_nearest

GOLDEN_FILES = ("filter_report.json", "recovered_priors.csv", "change_points.json", "daily.csv")


def pipeline_args(fixtures_dir):
    return ["pipeline", "--forecasts", str(fixtures_dir / "forecasts.jsonl"),
            "--cases", str(fixtures_dir / "cases.csv"), "--lambda", "20..200",
            "--samples", "1000", "--seed", "7"]


@pytest.fixture(scope="module")
def pipeline_out(tmp_path_factory, fixtures_dir):
    out = tmp_path_factory.mktemp("pipeline")
    assert main(["--out", str(out), *pipeline_args(fixtures_dir)]) == 0
    return out


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_parsers():
    assert parse_range("30..33") == [30, 31, 32, 33]
    assert parse_range("41,47,49") == [41, 47, 49]
    assert parse_sdar("0.01,3,5") == (0.01, 3, 5)
    with pytest.raises(Exception):
        parse_range("a..b")


# -- pipeline --------------------------------------------------------------

def test_pipeline_writes_all_artifacts(pipeline_out):
    for name in ("manifest.json", "filter_report.json", "predictions.csv", "table.json",
                 "recovered_priors.csv", "daily.csv", "scenario_invariant_prediction.csv",
                 "scenario_invariant_prior.csv", "cases.csv", "change_points.json",
                 "prediction_trend.csv", "joint_dynamics.csv", "summary.json"):
        assert (pipeline_out / name).is_file(), name


@pytest.mark.parametrize("name", GOLDEN_FILES)
def test_pipeline_matches_golden(pipeline_out, fixtures_dir, name):
    assert (pipeline_out / name).read_bytes() == (fixtures_dir / "golden" / name).read_bytes()


def test_golden_filter_report_matches_labels(fixtures_dir):
    labels = list(json.loads((fixtures_dir / "labels.json").read_text()).values())
    rep = json.loads((fixtures_dir / "golden" / "filter_report.json").read_text())
    assert rep["input_count"] == len(labels)
    assert rep["removed_endpoint"] == labels.count("endpoint")
    assert rep["removed_pre_t0"] == labels.count("pre_t0")
    assert rep["removed_impossible"] == labels.count("impossible")
    assert rep["output_count"] == labels.count("ok")


def test_golden_priors_match_linear_scan(pipeline_out, fixtures_dir):
    table = RecoveryTable.load(pipeline_out / "table.json")
    lambdas = list(table.lambda_grid)
    for row in read_rows(fixtures_dir / "golden" / "recovered_priors.csv"):
        j = list(table.t_past_grid).index(float(row["t_past"]))
        err, lam = scan_nearest(list(table.predictions[:, j]), lambdas, float(row["t_predicted"]))
        assert float(row["lambda"]) == lam
        assert float(row["match_error"]) == err
        assert row["status"] == "ok"


def test_golden_change_points(fixtures_dir):
    doc = json.loads((fixtures_dir / "golden" / "change_points.json").read_text())
    cps = doc["change_points"]
    assert len(cps) == 3
    assert [c["rank"] for c in cps] == [1, 2, 3]
    assert all(a["score"] >= b["score"] for a, b in zip(cps, cps[1:]))
    # every detection falls inside the analysis window, before the fixture's wave peak
    assert all("2021-11-12" <= c["date"] < "2022-01-13" for c in cps)


def test_pipeline_daily_series(pipeline_out):
    rows = read_rows(pipeline_out / "daily.csv")
    assert sum(int(r["n"]) for r in rows) == 85
    dates = [r["date"] for r in rows]
    assert dates == sorted(dates)
    for r in rows:
        assert int(r["ground_truth_horizon"]) >= -1


def test_manifest_rerun_is_byte_identical(pipeline_out, tmp_path):
    again = tmp_path / "again"
    assert main(["--manifest", str(pipeline_out / "manifest.json"), "--out", str(again)]) == 0
    names = sorted(p.name for p in pipeline_out.iterdir())
    assert names == sorted(p.name for p in again.iterdir())
    for name in names:
        assert (again / name).read_bytes() == (pipeline_out / name).read_bytes(), name


def test_manifest_contents(pipeline_out):
    doc = json.loads((pipeline_out / "manifest.json").read_text())
    assert doc["command"] == "pipeline" and doc["version"] == __version__
    assert doc["config"]["seed"] == 7 and doc["config"]["lambda"] == [20.0, 200.0]


# -- other subcommands ---------------------------------------------------------

def test_build_table_twice_identical(tmp_path):
    args = ["build-table", "--lambda", "20..80", "--samples", "300", "--seed", "7",
            "--t-past", "0..40"]
    assert main(["--out", str(tmp_path / "a"), *args]) == 0
    assert main(["--out", str(tmp_path / "b"), *args]) == 0
    a = (tmp_path / "a" / "table.json").read_bytes()
    assert a == (tmp_path / "b" / "table.json").read_bytes()
    assert RecoveryTable.load(tmp_path / "a" / "table.json").predictions.shape == (61, 41)


def test_recover_with_table_ignores_seed(tmp_path):
    assert main(["--out", str(tmp_path / "t"), "build-table", "--lambda", "20..80",
                 "--samples", "300", "--t-past", "0..40"]) == 0
    pairs = tmp_path / "pairs.csv"
    pairs.write_text("t_past,t_predicted\n0,30\n10,35\n30,41\n")
    table = str(tmp_path / "t" / "table.json")
    outs = []
    for seed in ("1", "99"):
        out = tmp_path / f"r{seed}"
        assert main(["recover", "-o", str(out), "--predictions", str(pairs),
                     "--table", table, "--seed", seed]) == 0
        outs.append((out / "recovered.csv").read_bytes())
    assert outs[0] == outs[1]


def test_simulate_invariant_prediction(tmp_path):
    assert main(["--out", str(tmp_path), "simulate", "--mode", "invariant-prediction",
                 "--fixed", "50", "--unit", "minutes", "--t-past", "30..49",
                 "--samples", "300"]) == 0
    rows = read_rows(tmp_path / "trajectory.csv")
    assert [float(r["t_past"]) for r in rows] == list(range(30, 50))
    assert {r["unit"] for r in rows} == {"minutes"}
    lams = [float(r["lambda"]) for r in rows]
    assert all(a >= b for a, b in zip(lams, lams[1:]))


def test_simulate_invariant_prior(tmp_path):
    assert main(["--out", str(tmp_path), "simulate", "--mode", "invariant-prior",
                 "--fixed", "30", "--t-past", "0..200"]) == 0
    rows = read_rows(tmp_path / "trajectory.csv")
    assert rows[-1]["status"] == "end"
    preds = [float(r["t_predicted"]) for r in rows[:-1]]
    assert all(b >= a for a, b in zip(preds, preds[1:]))


def test_ingest_and_analyze(tmp_path, fixtures_dir):
    assert main(["--out", str(tmp_path), "ingest", "--forecasts",
                 str(fixtures_dir / "forecasts.jsonl")]) == 0
    assert main(["--out", str(tmp_path), "analyze", "--cases", str(fixtures_dir / "cases.csv"),
                 "--daily", str(tmp_path / "daily.csv")]) == 0
    cps = json.loads((tmp_path / "change_points.json").read_text())["change_points"]
    assert len(cps) == 3
    assert (tmp_path / "joint_dynamics.csv").is_file()


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("EVENTDUR_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["build-table", "--lambda", "20..22", "--samples", "50",
                 "--t-past", "0..3"]) == 0
    assert (tmp_path / "env" / "table.json").is_file()


# -- failures ----------------------------------------------------------------

def error_doc(out):
    return json.loads((out / "error.json").read_text())


def test_missing_input_exit_1(tmp_path, capsys):
    code = main(["--out", str(tmp_path), "ingest", "--forecasts", str(tmp_path / "nope.jsonl")])
    assert code == 1
    assert error_doc(tmp_path)["exit_code"] == 1
    assert json.loads(capsys.readouterr().err)["error"] == "input-error"


def test_bad_record_names_line(tmp_path, fixtures_dir):
    lines = (fixtures_dir / "forecasts.jsonl").read_text().splitlines()
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join(lines[:3] + ['{"participant_id": "X"}'] + lines[3:5]) + "\n")
    assert main(["--out", str(tmp_path), "ingest", "--forecasts", str(bad)]) == 1
    assert "line 4" in error_doc(tmp_path)["message"]


def test_missing_column_exit_1(tmp_path, fixtures_dir):
    assert main(["--out", str(tmp_path), "analyze", "--cases", str(fixtures_dir / "cases.csv"),
                 "--count-column", "Cases"]) == 1
    assert "Cases" in error_doc(tmp_path)["message"]


def test_infeasible_recovery_exit_2(tmp_path):
    pairs = tmp_path / "pairs.csv"
    pairs.write_text("t_past,t_predicted\n0,20\n90,95\n")
    code = main(["--out", str(tmp_path), "recover", "--predictions", str(pairs),
                 "--lambda", "20..21", "--samples", "200"])
    assert code == 2
    doc = error_doc(tmp_path)
    assert doc["error"] == "infeasible-recovery"
    assert doc["details"][0]["record"] == "row 3"
    assert (tmp_path / "recovered.csv").is_file()


def test_no_command_exit_1(capsys):
    assert main([]) == 1


def test_unreadable_manifest(tmp_path):
    bad = tmp_path / "m.json"
    bad.write_text("{}")
    assert main(["--manifest", str(bad), "--out", str(tmp_path)]) == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "eventdur", "--version"], capture_output=True,
                         text=True, check=True)
    assert res.stdout.strip() == __version__
