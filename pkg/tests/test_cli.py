import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from smsn import cli
from smsn.exceptions import ConvergenceError
from smsn.mc_oracle import empirical_mardia, read_samples_csv
from smsn.moments import sn_mardia

SN5 = {"xi": [0, 0, 0], "Omega": np.eye(3).tolist(), "alpha": [3, 4, 0]}
ST8 = dict(SN5, mixing={"type": "skew_t", "nu": 8})


def write(tmp_path, spec, name="dist.json"):
    path = tmp_path / name
    path.write_text(spec if isinstance(spec, str) else json.dumps(spec))
    return str(path)


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def test_describe_gaussian(tmp_path, capsys):
    spec = {"xi": [1, 2], "Omega": [[2, 0.5], [0.5, 1]], "alpha": [0, 0]}
    out = run_json(capsys, "describe", "--input", write(tmp_path, spec))
    assert out["mean"] == [1.0, 2.0]
    assert out["covariance"] == [[2.0, 0.5], [0.5, 1.0]]
    assert out["alpha_star"] == 0.0


def test_describe_skew_t_flags(tmp_path, capsys):
    spec = dict(SN5, mixing={"type": "skew_t", "nu": 3})
    out = run_json(capsys, "describe", "-i", write(tmp_path, spec))
    assert out["covariance"] is not None
    assert out["alpha_star"] == pytest.approx(5.0, abs=1e-15)
    assert out["indices"]["gamma2d"] == {"requires": "requires nu > 4", "exists": False}
    assert out["moments"]["E(S^3)"]["exists"] is False


def test_describe_output_is_a_distribution_spec(tmp_path, capsys):
    first = run_json(capsys, "describe", "-i", write(tmp_path, ST8))
    second = run_json(capsys, "describe", "-i", write(tmp_path, first, "again.json"))
    assert first == second


def test_describe_reads_stdin(monkeypatch, capsys):
    monkeypatch.setattr(sys, "stdin", io.StringIO(json.dumps(SN5)))
    out = run_json(capsys, "describe")
    assert out["delta_star"] == pytest.approx(5 / math.sqrt(26), abs=1e-15)


def test_canonicalize_cp_alpha_zero(tmp_path, capsys):
    spec = {"xi": [0, 0], "Omega": [[4, 1], [1, 2]], "alpha": [0, 0]}
    out = run_json(capsys, "canonicalize", "-i", write(tmp_path, spec), "--method", "cp", "--verify")
    assert out["canonical_alpha"] == [0.0, 0.0]
    assert out["method"] == "CP"
    assert out["verify"]["passed"] is True


def test_canonicalize_ics_eigenvalue(tmp_path, capsys):
    out = run_json(capsys, "canonicalize", "-i", write(tmp_path, SN5), "--method", "ics")
    assert min(out["eigenvalues"]) == pytest.approx(0.38786560349271015, abs=1e-12)
    assert set(out) >= {"H", "alpha_star", "eigenvalues", "method", "canonical_alpha"}


def test_canonicalize_kurtosis_analytic(tmp_path, capsys):
    out = run_json(capsys, "canonicalize", "-i", write(tmp_path, ST8), "--method", "kurtosis", "--verify")
    assert out["method"] == "ICS_SigmaKappa"
    assert out["verify"]["passed"] is True


def test_canonicalize_kurtosis_empirical(tmp_path, capsys):
    path = write(tmp_path, ST8)
    out = run_json(capsys, "canonicalize", "-i", path, "--method", "kurtosis", "--empirical", "--n", "1000000")
    target = np.array([5.0, 0.0, 0.0])
    z = np.abs(np.array(out["canonical_alpha"]) - target) / np.array(out["canonical_alpha_se"])
    assert np.all(z < 3)
    again = run_json(capsys, "canonicalize", "-i", path, "--method", "kurtosis", "--empirical", "--n", "1000000")
    assert again == out


def test_canonicalize_empirical_needs_kurtosis(tmp_path, capsys):
    code, _, err = run(capsys, "canonicalize", "-i", write(tmp_path, SN5), "--empirical")
    assert code == cli.EXIT_PARSE and "kurtosis" in err


def test_indices_closed_form(tmp_path, capsys):
    out = run_json(capsys, "indices", "-i", write(tmp_path, SN5))
    ref = sn_mardia(5.0, 3)
    assert out["gamma1d"] == pytest.approx(ref.gamma1d, abs=1e-12)
    assert out["gamma2d"] == pytest.approx(ref.gamma2d, abs=1e-12)
    assert out["beta2d"] == pytest.approx(ref.gamma2d + 15, abs=1e-12)


def test_indices_missing_moments_is_informational(tmp_path, capsys):
    spec = dict(SN5, mixing={"type": "skew_t", "nu": 3.5})
    out = run_json(capsys, "indices", "-i", write(tmp_path, spec))
    assert out["gamma1d"] is not None and out["gamma2d"] is None
    assert out["conditions"]["gamma2d"]["exists"] is False


def test_indices_with_monte_carlo(tmp_path, capsys):
    out = run_json(capsys, "indices", "-i", write(tmp_path, ST8), "--mc", "200000", "--seed", "3")
    assert abs(out["z_scores"]["gamma1d"]) < 3 and abs(out["z_scores"]["gamma2d"]) < 3
    assert out["empirical"]["n"] == 200000 and out["empirical"]["seed"] == 3


def test_mode(tmp_path, capsys):
    spec = {"xi": [0, 0], "Omega": [[1, 0], [0, 1]], "alpha": [3, 4]}
    out = run_json(capsys, "mode", "-i", write(tmp_path, spec))
    assert out["uniqueness"] == "proven"
    assert out["mode"][1] / out["mode"][0] == pytest.approx(4 / 3, rel=1e-14)
    assert out["gradient_norm"] < 1e-8


def test_mode_slash(tmp_path, capsys):
    spec = {"xi": [0, 0], "Omega": [[1, 0], [0, 1]], "alpha": [3, 4], "mixing": {"type": "slash", "q": 3}}
    out = run_json(capsys, "mode", "-i", write(tmp_path, spec))
    assert out["uniqueness"] == "not_proven"
    assert len(out["sign_changes"]) == 1


def test_sample_deterministic_bytes(tmp_path, capsys):
    path = write(tmp_path, ST8)
    _, a, _ = run(capsys, "sample", "-i", path, "--n", "5", "--seed", "11")
    _, b, _ = run(capsys, "sample", "-i", path, "--n", "5", "--seed", "11")
    _, c, _ = run(capsys, "sample", "-i", path, "--n", "5", "--seed", "12")
    assert a == b and a != c
    rows = a.strip().split("\n")
    assert len(rows) == 5 and all(len(r.split(",")) == 3 for r in rows)


def test_sample_to_file_and_json(tmp_path, capsys):
    path = write(tmp_path, SN5)
    csv_path = tmp_path / "out.csv"
    code, out, _ = run(capsys, "sample", "-i", path, "--n", "4", "-o", str(csv_path))
    assert code == 0 and out == ""
    X = read_samples_csv(csv_path)
    assert X.shape == (4, 3)
    rows = run_json(capsys, "sample", "-i", path, "--n", "4", "--format", "json")
    np.testing.assert_array_equal(np.array(rows), X)


def test_sample_gaussian_baseline(tmp_path, capsys):
    spec = {"xi": [0, 0, 0], "Omega": np.eye(3).tolist(), "alpha": [0, 0, 0]}
    out_path = tmp_path / "g.csv"
    run(capsys, "sample", "-i", write(tmp_path, spec), "--n", "200000", "-o", str(out_path))
    rep = empirical_mardia(read_samples_csv(out_path))
    assert abs(rep.estimate["b2d"] - 15) < 3 * rep.mc_se["b2d"]
    assert abs(rep.estimate["b1d"]) < 3 * rep.mc_se["b1d"] + 1e-4


def test_sample_large_matches_indices(tmp_path, capsys):
    out_path = tmp_path / "sn.csv"
    run(capsys, "sample", "-i", write(tmp_path, SN5), "--n", "1000000", "-o", str(out_path))
    rep = empirical_mardia(read_samples_csv(out_path))
    ref = sn_mardia(5.0, 3)
    assert abs(rep.estimate["b1d"] - ref.gamma1d) < 3 * rep.mc_se["b1d"]
    assert abs(rep.estimate["g2d"] - ref.gamma2d) < 3 * rep.mc_se["g2d"]


def test_validate_stock_skew_t(tmp_path, capsys):
    code, out, _ = run(capsys, "validate", "-i", write(tmp_path, ST8))
    report = json.loads(out)
    assert code == 0 and report["passed"]
    assert all(c["status"] == "pass" for c in report["checks"])


def test_validate_skips_missing_indices(tmp_path, capsys):
    spec = dict(SN5, mixing={"type": "skew_t", "nu": 2.5})
    code, out, _ = run(capsys, "validate", "-i", write(tmp_path, spec))
    report = json.loads(out)
    assert code == 0
    status = {c["name"]: c for c in report["checks"]}
    assert status["index_gamma1d"]["status"] == "skipped"
    assert status["index_gamma1d"]["reason"] == "requires nu > 3"
    assert status["index_gamma2d"]["status"] == "skipped"
    assert status["mode_gradient"]["status"] == "pass"


def test_validate_failure_exit_code(tmp_path, capsys):
    code, out, _ = run(capsys, "validate", "-i", write(tmp_path, ST8), "--tol-override", "mc_z=1e-12")
    assert code == cli.EXIT_VALIDATION
    assert json.loads(out)["passed"] is False


def test_non_spd_is_validation_error(tmp_path, capsys):
    spec = {"xi": [0, 0], "Omega": [[1, 2], [2, 1]], "alpha": [1, 1]}
    for command in ("validate", "describe"):
        code, _, err = run(capsys, command, "-i", write(tmp_path, spec))
        assert code == cli.EXIT_VALIDATION
        assert "positive definite" in err


@pytest.mark.parametrize("text", ["{", "[1, 2]", "not json"])
def test_malformed_json_is_parse_error(tmp_path, capsys, text):
    code, _, err = run(capsys, "describe", "-i", write(tmp_path, text))
    assert code == cli.EXIT_PARSE
    assert "parse error" in err


def test_missing_file_is_parse_error(tmp_path, capsys):
    code, _, _ = run(capsys, "describe", "-i", str(tmp_path / "nope.json"))
    assert code == cli.EXIT_PARSE


def test_bad_flags_are_parse_errors(tmp_path, capsys):
    path = write(tmp_path, SN5)
    code, _, _ = run(capsys, "validate", "-i", path, "--tol-override", "unknown=1")
    assert code == cli.EXIT_PARSE
    for argv in (["frobnicate"], ["sample", "-i", path, "--n", "0"], ["canonicalize", "--method", "x"]):
        with pytest.raises(SystemExit) as info:
            cli.main(argv)
        assert info.value.code == cli.EXIT_PARSE
    capsys.readouterr()


def test_missing_field_is_validation_error(tmp_path, capsys):
    code, _, _ = run(capsys, "describe", "-i", write(tmp_path, {"xi": [0]}))
    assert code == cli.EXIT_VALIDATION


def test_numeric_failure_exit_code(tmp_path, capsys, monkeypatch):
    def boom(dist):
        raise ConvergenceError("no bracket")

    monkeypatch.setattr(cli, "smsn_mode", boom)
    code, _, err = run(capsys, "mode", "-i", write(tmp_path, SN5))
    assert code == cli.EXIT_NUMERIC and "numeric failure" in err


def test_json_floats_round_trip():
    x = 0.1 + 0.2
    assert json.loads(cli.dumps({"x": x}))["x"] == x
    assert json.loads(cli.dumps({"x": float("nan")}))["x"] is None


def test_console_script(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "smsn.cli", "describe", "-i", write(tmp_path, SN5)],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["alpha_star"] == pytest.approx(5.0)
