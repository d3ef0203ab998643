import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from qform.cli import main
from qform.linalg import write_matrix_csv


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def identity2(tmp_path):
    path = tmp_path / "sigma.csv"
    write_matrix_csv(path, np.eye(2))
    return str(path)


def test_pvalue_mr_chisq2(identity2, capsys):
    code, out, _ = run(["pvalue", "--sigma", identity2, "--q", "5.991465"], capsys)
    assert code == 0
    (row,) = rows(out)
    assert row["method"] == "MR"
    assert float(row["p_value"]) == pytest.approx(0.05, abs=1e-7)
    assert float(row["p_value"]) == pytest.approx(math.exp(-5.991465 / 2), rel=1e-12)


def test_pvalue_two_methods_agree(identity2, capsys):
    code, out, _ = run(["pvalue", "--sigma", identity2, "--q", "1,5.991465", "--methods", "MR,Exact"], capsys)
    assert code == 0
    table = rows(out)
    assert len(table) == 4
    for q in ("1", "5.9914649999999998"):
        mr, ex = [float(r["p_value"]) for r in table if r["q"] == q]
        assert mr == pytest.approx(ex, abs=1e-6)


def test_pvalue_prints_17_significant_digits(identity2, capsys):
    _, out, _ = run(["pvalue", "--sigma", identity2, "--q", "3"], capsys)
    p = rows(out)[0]["p_value"]
    assert float(p) == math.exp(-1.5)


def test_pvalue_mc_status(identity2, capsys):
    _, out, _ = run(["pvalue", "--sigma", identity2, "--q", "2", "--methods", "MC", "--reps", "20000"], capsys)
    (row,) = rows(out)
    assert row["status"].startswith("se=")
    assert abs(float(row["p_value"]) - math.exp(-1)) < 5 * float(row["status"][3:])


def test_pvalue_with_weight_and_mean(tmp_path, capsys):
    write_matrix_csv(tmp_path / "s.csv", np.eye(3))
    write_matrix_csv(tmp_path / "a.csv", np.eye(3))
    (tmp_path / "mu.csv").write_text("2\n0\n0\n")
    _, out, _ = run(["pvalue", "--sigma", str(tmp_path / "s.csv"), "--a", str(tmp_path / "a.csv"),
                     "--mu", str(tmp_path / "mu.csv"), "--q", "10", "--methods", "LTZ,Exact"], capsys)
    ltz, ex = (float(r["p_value"]) for r in rows(out))
    # noncentral chi-square(3, 4): LTZ is exact here
    assert ltz == pytest.approx(ex, abs=1e-9)


def test_malformed_csv_names_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,0\n0,oops\n")
    code, _, err = run(["pvalue", "--sigma", str(bad), "--q", "1"], capsys)
    assert code == 2
    assert "bad.csv:2:" in err


def test_missing_file_and_bad_method(identity2, capsys):
    assert run(["pvalue", "--sigma", "/nonexistent.csv", "--q", "1"], capsys)[0] == 2
    assert run(["pvalue", "--sigma", identity2, "--q", "1", "--methods", "XX"], capsys)[0] == 2
    assert run(["pvalue", "--sigma", identity2, "--q", "x"], capsys)[0] == 2


def test_numerical_failure_exit_code(tmp_path, capsys):
    write_matrix_csv(tmp_path / "s.csv", [[1.0, 2.0], [2.0, 1.0]])
    code, _, err = run(["moments", "--sigma", str(tmp_path / "s.csv"), "--path", "eigen"], capsys)
    assert code == 1
    assert "NotPositiveDefinite" in err


@pytest.mark.parametrize("path", ["eigen", "trace", "fast"])
def test_moments_chisq2(identity2, capsys, path):
    code, out, _ = run(["moments", "--sigma", identity2, "--path", path], capsys)
    assert code == 0
    (row,) = rows(out)
    got = [float(row[k]) for k in ("c1", "c2", "c3", "c4", "skewness", "kurtosis")]
    np.testing.assert_allclose(got, [2, 4, 16, 96, 2, 9], rtol=1e-14)


def test_moments_to_file(identity2, tmp_path, capsys):
    out = tmp_path / "m.csv"
    assert run(["moments", "--sigma", identity2, "--out", str(out)], capsys)[0] == 0
    assert rows(out.read_text())[0]["path"] == "fast"


def _config(tmp_path, **extra):
    cfg = {
        "n": 10,
        "models": [
            {"base": "Equal", "block_type": "I", "parameter": 0.5},
            {"base": "Poly", "block_type": "II", "parameter": 1.0},
        ],
        "means": ["mu1", "mu3"],
        "methods": ["MR", "HBE", "LTZ"],
        "alphas": [0.05, 0.01],
        "reps": 4000,
        "seed": 5,
        "block_size": 1000,
    }
    cfg.update(extra)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_simulate_writes_report(tmp_path, capsys, caplog):
    with caplog.at_level("WARNING"):
        code, out, _ = run(["simulate", _config(tmp_path)], capsys)
    assert code == 0
    table = rows(out)
    # the literal Poly cell is not positive definite and is skipped with a warning
    assert "skipping Poly(1)/II/n=10" in caplog.text
    assert len(table) == 2 * 3 * 2
    assert {r["model"] for r in table} == {"Equal"}
    for r in table:
        assert float(r["ratio"]) == pytest.approx(float(r["empirical_rate"]) / float(r["alpha"]))


def test_simulate_lag_offset_keeps_poly(tmp_path, capsys):
    code, out, _ = run(["simulate", _config(tmp_path, lag_offset=1)], capsys)
    assert code == 0
    assert {r["model"] for r in rows(out)} == {"Equal", "Poly"}


def test_simulate_flags_override_config(tmp_path, capsys):
    _, out, _ = run(["simulate", _config(tmp_path), "--methods", "SW", "--alphas", "0.1", "--reps", "2000"], capsys)
    table = rows(out)
    assert {r["method"] for r in table} == {"SW"}
    assert {r["n_reps"] for r in table} == {"2000"}


def test_simulate_grid_config(tmp_path, capsys):
    cfg = tmp_path / "grid.json"
    cfg.write_text(json.dumps({"n": [10], "bases": ["InvEqual"], "block_types": ["III"], "rho": [0.1],
                               "means": ["mu2"], "methods": ["ME"], "alphas": [0.05], "reps": 2000}))
    _, out, _ = run(["simulate", str(cfg)], capsys)
    (row,) = rows(out)
    assert (row["model"], row["block_type"], row["parameter"]) == ("InvEqual", "III", "0.1")


def test_simulate_is_byte_identical(tmp_path, capsys):
    cfg = _config(tmp_path)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(["simulate", cfg, "--out", str(a)], capsys)
    run(["simulate", cfg, "--out", str(b), "--workers", "2"], capsys)
    assert a.read_bytes() == b.read_bytes()


def test_simulate_bad_inputs(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["simulate", str(bad)], capsys)[0] == 2
    assert run(["simulate", _config(tmp_path), "--methods", "MC"], capsys)[0] == 2
    assert run(["simulate", _config(tmp_path), "--alphas", "1.5"], capsys)[0] == 2
    assert run(["simulate", _config(tmp_path, means=["mu9"])], capsys)[0] == 2


def test_bench_moments(tmp_path, capsys):
    points = tmp_path / "p.tsv"
    code, out, _ = run(["bench", "--task", "moments", "--n-grid", "10,20", "--points", str(points)], capsys)
    assert code == 0
    assert len(rows(out)) == 6
    assert points.read_text().splitlines()[0] == "task\tmethod\tn\trep\tseconds"


def test_bench_tail(capsys):
    code, out, _ = run(["bench", "--task", "tail", "--n-grid", "10", "--n-calls", "100",
                        "--methods", "MR,Exact", "--exact-calls", "5"], capsys)
    assert code == 0
    assert [r["method"] for r in rows(out)] == ["MR", "Exact"]
    assert run(["bench", "--task", "tail", "--methods", "MC"], capsys)[0] == 2


def test_module_entry_point(identity2):
    out = subprocess.run([sys.executable, "-m", "qform", "pvalue", "--sigma", identity2, "--q", "2"],
                         capture_output=True, text=True, check=True).stdout
    assert out.splitlines()[0] == "q,method,p_value,status"
