import json
import math

import numpy as np
import pytest

from uqchain.cli import EXIT_ERROR, EXIT_NEGATIVE, EXIT_OK, main, read_csv_table, read_json_report

ALT = '{"type": "single_s", "s": 0, "a": [1, -1]}'


def chain_args(S="1/2", N=3, coupling=ALT):
    return ["--S", S, "--N", str(N), "--coupling", coupling, "--jobs", "1"]


def write_spec(tmp_path, gamma, **extra):
    doc = {"S": "1/2", "N": 3, "gamma": gamma, "coupling": {"type": "single_s", "s": 0, "a": [1, -1]}, **extra}
    path = tmp_path / "chain.json"
    path.write_text(json.dumps(doc))
    return str(path)


# -- spectrum

def test_spectrum_real_inside_boundary(tmp_path, capsys):
    assert main(["spectrum", "--spec", write_spec(tmp_path, 0.5)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["is_real"] is True
    assert doc["chain"]["gamma"] == 0.5


def test_spectrum_complex_beyond_boundary(tmp_path, capsys):
    # boundary for this chain is pi/3
    assert main(["spectrum", "--spec", write_spec(tmp_path, 1.2)]) == EXIT_NEGATIVE
    assert json.loads(capsys.readouterr().out)["is_real"] is False


def test_spectrum_csv(tmp_path):
    out = tmp_path / "ev.csv"
    assert main(["spectrum", *chain_args(), "--gamma", "0.3", "--format", "csv", "--out", str(out)]) == EXIT_OK
    cols = read_csv_table(out)
    assert len(cols["re"]) == 8
    assert max(abs(v) for v in cols["im"]) < 1e-9


@pytest.mark.parametrize("argv", [
    ["spectrum", "--S", "1/2", "--N", "3", "--gamma", "0.3", "--coupling", "{not json"],
    ["spectrum", "--S", "1/2", "--N", "3", "--gamma", "0.3"],
    ["spectrum", "--S", "1/3", "--N", "3", "--gamma", "0.3", "--coupling", ALT],
    ["spectrum", "--spec", "/nonexistent/chain.json"],
    ["no-such-command"],
])
def test_errors_exit_one(argv, capsys):
    assert main(argv) == EXIT_ERROR


def test_malformed_spec_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"S": "1/2", "N": 3,')
    assert main(["spectrum", "--spec", str(path)]) == EXIT_ERROR


# -- scans

def test_scan_reality_json(capsys):
    assert main(["scan-reality", *chain_args(), "--gamma-max", "1.4"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["boundary"] == pytest.approx(math.pi / 3, abs=1e-3)
    assert len(doc["curve"]["gamma"]) == 400


def test_scan_reality_csv_round_trip(tmp_path, capsys):
    out = tmp_path / "scan.csv"
    argv = ["scan-reality", *chain_args(), "--gamma-max", "1.4", "--n-grid", "50", "--format", "csv", "--out", str(out)]
    assert main(argv) == EXIT_OK
    summary = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    cols = read_csv_table(out)
    assert set(cols) == {"gamma", "max_abs_imag", "is_real"}
    assert len(cols["gamma"]) == 50
    g = np.array(cols["gamma"])
    real = np.array(cols["is_real"])
    assert real[g < summary["boundary"] - 0.03].all()
    assert not real[g > summary["boundary"] + 0.03].any()


def test_scan_reality_empty_range():
    assert main(["scan-reality", *chain_args(), "--gamma-min", "0.5", "--gamma-max", "0.2"]) == EXIT_ERROR


def test_scan_pd(capsys):
    assert main(["scan-pd", "--S", "1/2", "--N", "3", "--jobs", "1"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["boundary"] >= math.pi / 3 - 1e-3


def test_scan_pd_csv(tmp_path, capsys):
    out = tmp_path / "pd.csv"
    assert main(["scan-pd", "--S", "1/2", "--N", "2", "--n-grid", "20", "--format", "csv", "--out", str(out)]) == EXIT_OK
    cols = read_csv_table(out)
    assert len(cols["is_pd"]) == 20 and cols["is_pd"][0] is True


def test_scan_pd_empty_range():
    assert main(["scan-pd", "--S", "1/2", "--N", "2", "--gamma-max", "0"]) == EXIT_ERROR


# -- metric

def test_metric_with_chain(tmp_path, capsys):
    eta_path = tmp_path / "eta.json"
    argv = ["metric", *chain_args(), "--gamma", "0.3", "--eta-out", str(eta_path)]
    assert main(argv) == EXIT_OK
    diag = json.loads(capsys.readouterr().out)
    assert diag["symmetrization_residual"] < 1e-9
    assert read_json_report(eta_path)


def test_metric_outside_positive_range(capsys):
    # gamma_hat for S=1/2, N=2 is pi/2; alpha = 0 is still fine there, but a large alpha is not
    assert main(["metric", "--S", "1/2", "--N", "2", "--gamma", "0.3"]) == EXIT_OK
    assert main(["metric", "--S", "1/2", "--N", "2", "--gamma", "0.3", "--alpha", "1.5"]) == EXIT_NEGATIVE


# -- verify

def test_verify_single_point(tmp_path):
    out = tmp_path / "verify.json"
    argv = ["verify", "--S", "1", "--N", "3", "--gamma", "0.3", "--only", "yang_baxter", "--out", str(out)]
    assert main(argv) == EXIT_OK
    doc = read_json_report(out)
    assert doc["pass"] is True
    assert [r["identity_name"] for r in doc["reports"]] == ["yang_baxter"]


def test_verify_reports_singular_point(capsys):
    argv = ["verify", "--S", "1", "--N", "2", "--gamma", str(math.pi / 3), "--only", "temperley_lieb"]
    assert main(argv) == EXIT_NEGATIVE
    doc = json.loads(capsys.readouterr().out)
    assert "SingularGamma" in doc["reports"][0]["error"]


def test_verify_unknown_identity():
    assert main(["verify", "--S", "1", "--N", "2", "--gamma", "0.1", "--only", "pentagon"]) == EXIT_ERROR


def test_verify_partial_point():
    assert main(["verify", "--S", "1"]) == EXIT_ERROR


# -- reproduce

def test_reproduce_dk_with_unit_factor(tmp_path, capsys):
    out = tmp_path / "dk.json"
    assert main(["reproduce", "--only", "dk", "--S", "1", "--s", "1", "--out", str(out)]) == EXIT_OK
    assert "ALL PASS" in capsys.readouterr().out
    rows = read_json_report(out)["rows"]
    assert len(rows) == 5
    assert all(1.0 in np.round(r["expected"], 12) for r in rows)


def test_reproduce_det_csv(tmp_path, capsys):
    out = tmp_path / "det.csv"
    assert main(["reproduce", "--only", "det", "--format", "csv", "--out", str(out)]) == EXIT_OK
    cols = read_csv_table(out)
    assert all(cols["pass"])


def test_reproduce_unknown_task():
    assert main(["reproduce", "--only", "everything"]) == EXIT_ERROR


def test_reproduce_dk_untabulated_channel():
    assert main(["reproduce", "--only", "dk", "--S", "1", "--s", "5"]) == EXIT_ERROR
