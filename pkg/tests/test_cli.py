import json
import subprocess
import sys

import numpy as np
import pytest

from ustatcpd.cli import main
from ustatcpd.detector import Detector, DetectorConfig
from ustatcpd.io import iter_csv_rows, load_report, write_csv
from ustatcpd.simulation import Covariance, change_vector
from ustatcpd.variance import tr_sigma2_brute_force


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def report_from(stdout):
    summary, _, body = stdout.partition("\n")
    return summary, json.loads(body)


@pytest.fixture
def shift_csv(tmp_path):
    rng = np.random.default_rng(12)
    n0, p = 60, 25
    X = Covariance("ar1", 0.5).draw(rng, n0 + 60, p) + 3.0
    X[n0:] += change_vector(p, 20.0)
    path = tmp_path / "shift.csv"
    write_csv(path, X, header=True)
    return path, X


@pytest.fixture
def null_csv(tmp_path):
    rng = np.random.default_rng(13)
    X = Covariance("ar1", 0.5).draw(rng, 40, 10)
    path = tmp_path / "null.csv"
    write_csv(path, X)
    return path, X


@pytest.mark.parametrize("rule,lo,hi", [("max", 4.30, 4.90), ("sum", 3.28, 3.88)])
def test_calibrate_reference_values(capsys, rule, lo, hi):
    code, out, _ = run(capsys, "calibrate", "--rule", rule, "--window", "100", "--arl", "7000")
    assert code == 0
    summary, rep = report_from(out)
    assert lo <= float(summary) <= hi
    assert rep["threshold"] == pytest.approx(float(summary), abs=1e-6)
    assert rep["arl_at_threshold"] == pytest.approx(7000, rel=1e-6)


def test_calibrate_target_below_window(capsys):
    code, out, err = run(capsys, "calibrate", "--rule", "max", "--window", "100", "--arl", "50")
    assert code == 1
    assert "target_arl must exceed H" in err
    assert len(err.strip().splitlines()) == 1


def test_detect_shift(capsys, shift_csv, tmp_path):
    path, _ = shift_csv
    out_path = tmp_path / "rep.json"
    code, out, _ = run(capsys, "detect", str(path), "--rule", "max", "--window", "20",
                       "--train", "60", "--arl", "5000", "--out", str(out_path))
    assert code == 0
    rep = load_report(out_path)
    assert rep["stopped"] is True
    assert 1 <= rep["stopping_time"] <= 20
    assert rep["threshold_source"] == "target_arl"
    for key in ("rule", "H", "n0", "p", "threshold", "target_arl", "stopped", "stopping_time",
                "trigger_split", "trigger_statistic", "tr2_hat"):
        assert key in rep


def test_detect_null_conservative_threshold(capsys, null_csv):
    path, _ = null_csv
    code, out, _ = run(capsys, "detect", str(path), "--rule", "sum", "--window", "20",
                       "--train", "20", "--arl", "1e6")
    assert code == 0
    summary, rep = report_from(out)
    assert rep["stopped"] is False and rep["stopping_time"] is None
    assert rep["n"] == 40


@pytest.mark.parametrize("rule", ["max", "sum"])
def test_detect_equals_in_process_stepping(capsys, shift_csv, rule):
    path, X = shift_csv
    code, out, _ = run(capsys, "detect", str(path), "--rule", rule, "--window", "20",
                       "--train", "60", "--threshold", "3.0", "--trajectory")
    _, rep = report_from(out)
    det = Detector(DetectorConfig(rule, 20, 60, 3.0, X.shape[1], record_trajectory=True), X[:60])
    ref = det.run(X[60:])
    assert rep["stopping_time"] == ref.stopping_time
    assert rep["trigger_statistic"] == ref.trigger_statistic
    assert rep["trajectory"] == ref.trajectory


def test_report_round_trip_is_lossless(capsys, shift_csv, tmp_path):
    path, _ = shift_csv
    out_path = tmp_path / "r.json"
    run(capsys, "detect", str(path), "--window", "20", "--train", "60", "--threshold", "3.3",
        "--out", str(out_path))
    rep = load_report(out_path)
    assert json.loads(json.dumps(rep)) == rep
    assert isinstance(rep["tr2_hat"], float)


def test_detect_malformed_row(capsys, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n3,4\n5,oops\n7,8\n")
    code, _, err = run(capsys, "detect", str(path), "--window", "5", "--train", "5",
                       "--threshold", "3")
    assert code == 2
    assert "row 4" in err and "column 2" in err
    assert len(err.strip().splitlines()) == 1


def test_detect_ragged_row(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("1,2\n3\n")
    with pytest.raises(Exception, match="row 2"):
        list(iter_csv_rows(path))


def test_detect_requires_threshold_source(capsys, null_csv):
    path, _ = null_csv
    code, _, err = run(capsys, "detect", str(path), "--window", "10", "--train", "20")
    assert code == 1


def test_detect_too_few_rows(capsys, null_csv):
    path, _ = null_csv
    code, _, err = run(capsys, "detect", str(path), "--window", "10", "--train", "100",
                       "--threshold", "3")
    assert code == 2


def test_estimate_variance_matches_brute_force(capsys, tmp_path):
    X = np.random.default_rng(14).normal(size=(6, 3))
    path = tmp_path / "six.csv"
    write_csv(path, X)
    code, out, _ = run(capsys, "estimate-variance", str(path))
    assert code == 0
    assert float(out.splitlines()[0]) == pytest.approx(tr_sigma2_brute_force(X), rel=1e-10)


def test_estimate_variance_identity_near_p(capsys, tmp_path):
    X = np.random.default_rng(15).normal(size=(400, 40))
    path = tmp_path / "iid.csv"
    write_csv(path, X)
    code, out, _ = run(capsys, "estimate-variance", str(path), "--train", "400")
    assert float(out.splitlines()[0]) == pytest.approx(40, rel=0.1)


def test_estimate_variance_three_rows(capsys, tmp_path):
    path = tmp_path / "three.csv"
    write_csv(path, np.ones((3, 2)))
    code, _, err = run(capsys, "estimate-variance", str(path))
    assert code == 2 and "at least 4" in err


def test_simulate_zero_reps(capsys):
    code, _, err = run(capsys, "simulate", "arl", "--reps", "0")
    assert code == 1 and "replications" in err


def test_simulate_small_runs_and_is_deterministic(capsys):
    argv = ["simulate", "edd", "--p", "20", "--window", "20", "--train", "40", "--arl", "200",
            "--reps", "8", "--delta", "10", "--seed", "3"]
    code1, out1, _ = run(capsys, *argv)
    code2, out2, _ = run(capsys, *argv)
    assert code1 == code2 == 0
    s1, r1 = report_from(out1)
    s2, r2 = report_from(out2)
    r1.pop("runtime_s"), r2.pop("runtime_s")
    assert r1 == r2 and s1 == s2
    assert r1["kind"] == "edd" and len(r1["stopping_times"]) == 8


def test_simulate_edd_decreases_with_delta(capsys):
    base = ["simulate", "edd", "--p", "30", "--window", "20", "--train", "40", "--arl", "500",
            "--reps", "20", "--seed", "5", "--rule", "max"]
    _, o5, _ = run(capsys, *base, "--delta", "5")
    _, o20, _ = run(capsys, *base, "--delta", "20")
    assert report_from(o20)[1]["mean"] < report_from(o5)[1]["mean"]


def test_config_file_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# calibration defaults\nrule = sum\nwindow = 50\narl = 2000\n")
    code, out, _ = run(capsys, "calibrate", "--config", str(cfg), "--rule", "max")
    _, rep = report_from(out)
    assert rep["rule"] == "max" and rep["H"] == 50 and rep["target_arl"] == 2000


def test_config_file_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("colour = blue\n")
    code, _, err = run(capsys, "calibrate", "--config", str(cfg), "--rule", "max", "--arl", "500")
    assert code == 1 and "colour" in err


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "ustatcpd", "calibrate", "--rule", "sum", "--window", "100",
         "--arl", "7000"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert 3.3 <= float(proc.stdout.splitlines()[0]) <= 3.9
