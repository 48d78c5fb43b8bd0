import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from sheardiag.cli import main


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# tool=sheardiag version=")
    return list(csv.DictReader(lines[1:]))


@pytest.fixture
def two_body(tmp_path):
    return write(tmp_path, "two.json", {"n": 2, "masses": [1, 1], "phi": [[2, 1], [1, 2]]})


@pytest.fixture
def tridiag(tmp_path):
    return write(tmp_path, "tri.json", {"n": 3, "masses": [1, 1, 1], "phi": [[2, 1, 0], [1, 2, 1], [0, 1, 2]]})


def test_diagonalize_two_body(tmp_path, two_body):
    out = tmp_path / "out"
    assert main(["diagonalize", "--input", two_body, "--method", "two_body", "--out", str(out)]) == 0
    rows = read_csv(out / "frequencies.csv")
    assert [r["method"] for r in rows] == ["two_body", "two_body"]
    np.testing.assert_allclose([float(r["omega_sq"]) for r in rows], [1.0, 3.0], rtol=1e-15)
    np.testing.assert_allclose([float(r["m_eff"]) for r in rows], [0.5, 2.0], rtol=1e-15)
    res = read_csv(out / "residuals.csv")
    assert res[0]["converged"] == "true" and float(res[0]["oracle_max_abs_diff"]) <= 1e-14
    seq = json.loads((out / "sequence.json").read_text())
    assert seq["index_base"] == 0
    assert seq["methods"]["two_body"]["steps"] == [{"i": 0, "j": 1, "alpha": -1.0, "beta": 0.5}]
    assert len(seq["provenance"]["config_sha256"]) == 64


def test_diagonalize_all_agrees(tmp_path, tridiag):
    out = tmp_path / "out"
    assert main(["diagonalize", "--input", tridiag, "--method", "all", "--out", str(out)]) == 0
    rows = read_csv(out / "frequencies.csv")
    by = {}
    for r in rows:
        by.setdefault(r["method"], []).append(float(r["omega_sq"]))
    assert set(by) == {"oracle", "three_body", "sweep"}
    ref = np.sort(by["oracle"])
    for m, w in by.items():
        np.testing.assert_allclose(np.sort(w), ref, atol=1e-8)
    np.testing.assert_allclose(ref, [2 - math.sqrt(2), 2, 2 + math.sqrt(2)], atol=1e-12)


def test_rerun_is_byte_identical(tmp_path, tridiag):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["diagonalize", "--input", tridiag, "--method", "all", "--out", str(d)]) == 0
    for name in ("frequencies.csv", "residuals.csv", "sequence.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_config_changes_digest(tmp_path, tridiag):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["diagonalize", "--input", tridiag, "--out", str(a)])
    main(["diagonalize", "--input", tridiag, "--out", str(b), "--tol", "1e-10"])
    da = json.loads((a / "sequence.json").read_text())["provenance"]["config_sha256"]
    db = json.loads((b / "sequence.json").read_text())["provenance"]["config_sha256"]
    assert da != db


def test_json_format(tmp_path, two_body):
    out = tmp_path / "out"
    assert main(["diagonalize", "--input", two_body, "--format", "json", "--out", str(out)]) == 0
    doc = json.loads((out / "frequencies.json").read_text())
    assert doc["columns"][0] == "method"
    assert [r["omega_sq"] for r in doc["rows"]] == pytest.approx([1.0, 3.0], rel=1e-14)
    assert not (out / "frequencies.csv").exists()


def test_not_converged_exit_code(tmp_path):
    rng = np.random.default_rng(11)
    A = rng.normal(size=(8, 8))
    p = write(tmp_path, "big.json", {"n": 8, "masses": [1.0] * 8, "phi": (A @ A.T + 8 * np.eye(8)).tolist()})
    out = tmp_path / "out"
    assert main(["diagonalize", "--input", p, "--max-sweeps", "1", "--out", str(out)]) == 2
    res = read_csv(out / "residuals.csv")
    assert res[0]["converged"] == "false"


@pytest.mark.parametrize(
    "doc",
    [
        {"n": 2, "masses": [1, 1], "phi": [[2, 1], [1, 2]], "bogus": 0},
        {"n": 2, "masses": [1, 0], "phi": [[2, 1], [1, 2]]},
        {"n": 2, "masses": [1, 1], "phi": [[2, 1]]},
    ],
)
def test_invalid_input_exit_code(tmp_path, doc, capsys):
    p = write(tmp_path, "bad.json", doc)
    assert main(["diagonalize", "--input", p, "--out", str(tmp_path / "o")]) == 1
    assert "error:" in capsys.readouterr().err


def test_missing_file_exit_code(tmp_path):
    assert main(["diagonalize", "--input", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 1


def test_bad_tolerance_exit_code(tmp_path, two_body):
    assert main(["diagonalize", "--input", two_body, "--tol", "-1", "--out", str(tmp_path)]) == 1


def test_method_not_applicable(tmp_path, tridiag, two_body):
    assert main(["diagonalize", "--input", tridiag, "--method", "two_body", "--out", str(tmp_path / "a")]) == 1
    assert main(["diagonalize", "--input", two_body, "--method", "three_body", "--out", str(tmp_path / "b")]) == 1


def test_bravais_odd_chain_rejected(tmp_path, capsys):
    p = write(tmp_path, "odd.json", {"chain": {"n": 5, "m": 1, "d1": 1, "d12": 1}})
    assert main(["diagonalize", "--input", p, "--method", "bravais", "--out", str(tmp_path / "o")]) == 1
    assert "even" in capsys.readouterr().err


def test_compare_chain(tmp_path):
    p = write(tmp_path, "chain.json", {"chain": {"n": 4, "m": 1, "d1": 1, "d12": 1}})
    out = tmp_path / "out"
    assert main(["compare", "--input", p, "--out", str(out)]) == 0
    rows = read_csv(out / "compare.csv")
    zpe = {r["method"]: float(r["value"]) for r in rows if r["kind"] == "zpe"}
    assert set(zpe) == {"oracle", "sweep", "bravais", "toeplitz"}
    assert zpe["oracle"] == pytest.approx(zpe["toeplitz"], rel=1e-12)
    assert zpe["bravais"] == pytest.approx(1 + math.sqrt(3), rel=1e-14)
    diffs = {(r["method"], r["other"]): float(r["value"]) for r in rows if r["kind"] == "omega_sq_max_abs_diff"}
    assert diffs[("oracle", "sweep")] <= 1e-8
    status = {r["method"]: r["status"] for r in rows if r["kind"] == "zpe"}
    assert status["bravais"] == "not_converged"


def test_groundstate(tmp_path, two_body):
    out = tmp_path / "out"
    assert main(["groundstate", "--input", two_body, "--method", "two_body", "--out", str(out)]) == 0
    doc = json.loads((out / "state.json").read_text())
    s3 = math.sqrt(3)
    np.testing.assert_allclose(doc["B_entangled"], 0.5 * np.array([[1 + s3, s3 - 1], [s3 - 1, 1 + s3]]), atol=1e-14)
    assert doc["E0"] == pytest.approx((1 + s3) / 2, rel=1e-14)
    assert doc["residual"] <= 1e-12 and not doc["product_form"]


def test_groundstate_single_oscillator(tmp_path):
    p = write(tmp_path, "one.json", {"n": 1, "masses": [1.0], "phi": [[1.0]]})
    out = tmp_path / "out"
    assert main(["groundstate", "--input", p, "--out", str(out)]) == 0
    doc = json.loads((out / "state.json").read_text())
    assert doc["E0"] == pytest.approx(0.5) and doc["residual"] == 0.0


def test_groundstate_unstable(tmp_path, capsys):
    p = write(tmp_path, "unstable.json", {"n": 2, "masses": [1, 1], "phi": [[1, 2], [2, 1]]})
    assert main(["groundstate", "--input", p, "--out", str(tmp_path / "o")]) == 1
    assert "unstable" in capsys.readouterr().err


def test_batch_mode(tmp_path, two_body, tridiag):
    out = tmp_path / "out"
    assert main(["diagonalize", "--input", two_body, "--input", tridiag, "--jobs", "2", "--out", str(out)]) == 0
    assert (out / "two" / "frequencies.csv").exists()
    assert (out / "tri" / "frequencies.csv").exists()


def test_batch_worst_exit_code(tmp_path, two_body):
    bad = write(tmp_path, "bad.json", {"n": 2})
    assert main(["diagonalize", "--input", two_body, "--input", bad, "--out", str(tmp_path / "o")]) == 1
    assert (tmp_path / "o" / "two" / "frequencies.csv").exists()


def test_console_module_entry(tmp_path, two_body):
    proc = subprocess.run(
        [sys.executable, "-m", "sheardiag.cli", "diagonalize", "--input", two_body, "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
