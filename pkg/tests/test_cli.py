import csv
import json

import numpy as np
import pytest

import cli
from lab_errors import EXIT_AMBIGUOUS, EXIT_CONFIG, EXIT_NUMERIC_FAILURE

SMALL_CONFIG = """\
classify:
  self_check_dims: [2, 4]
  self_check_count: 3
ladder:
  h_values: [0.01, 0.001]
  certify_count: 2
positivity:
  cases: [model, negative]
  samples: 2000
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(SMALL_CONFIG)
    return str(path)


def run(config_file, out, *args):
    cli.main(["-c", config_file, "-o", str(out), *args])


def write_matrix(tmp_path, rows):
    path = tmp_path / "matrix.json"
    path.write_text(json.dumps({"dim": len(rows), "rows": rows}))
    return str(path)


def test_classify_matrix(tmp_path, config_file):
    matrix = write_matrix(tmp_path, [[np.e, 0.0], [0.0, 1 / np.e]])
    run(config_file, tmp_path / "out", "classify", "-m", matrix)
    with open(tmp_path / "out" / "classify" / "classification.json") as f:
        doc = json.load(f)
    assert doc["n_hr_plus"] == 1
    assert doc["n_e"] == 0
    assert (tmp_path / "out" / "classify" / "manifest.json").exists()


def test_classify_self_check(tmp_path, config_file):
    run(config_file, tmp_path / "out", "classify")
    with open(tmp_path / "out" / "classify" / "self_check.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0][0] == "dim"
    assert len(rows) == 7


def test_identity_is_ambiguous(tmp_path, config_file):
    matrix = write_matrix(tmp_path, [[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(SystemExit) as e:
        run(config_file, tmp_path / "out", "classify", "-m", matrix)
    assert e.value.code == EXIT_AMBIGUOUS
    with open(tmp_path / "out" / "classify" / "manifest.json") as f:
        assert json.load(f)["command"] == "classify"


@pytest.mark.parametrize("text", ["{not json", '{"rows": [[1, 0], [0, 1]]}', '{"dim": 3, "rows": [[1, 0, 0]]}'])
def test_malformed_matrix_is_a_config_error(tmp_path, config_file, text):
    path = tmp_path / "matrix.json"
    path.write_text(text)
    with pytest.raises(SystemExit) as e:
        run(config_file, tmp_path / "out", "classify", "-m", str(path))
    assert e.value.code == EXIT_CONFIG


def test_missing_matrix_is_a_config_error(tmp_path, config_file):
    with pytest.raises(SystemExit) as e:
        run(config_file, tmp_path / "out", "classify", "-m", str(tmp_path / "absent.json"))
    assert e.value.code == EXIT_CONFIG


def test_bad_config_exits_with_config_code(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("contract:\n  N: 1000\n")
    with pytest.raises(SystemExit) as e:
        run(str(path), tmp_path / "out", "contract")
    assert e.value.code == EXIT_CONFIG


def test_positivity_writes_table_and_manifest(tmp_path, config_file):
    run(config_file, tmp_path / "out", "positivity")
    directory = tmp_path / "out" / "positivity"
    with open(directory / "positivity.csv") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0]) == ["case", "min_ratio", "argmin_point", "samples", "radius"]
    assert float(rows[0]["radius"]) == 10.0
    ratios = {r["case"]: float(r["min_ratio"]) for r in rows}
    assert abs(ratios["model"] - 1) <= 1e-12
    assert abs(ratios["negative"] - np.log(2.0)) <= 1e-10
    with open(directory / "manifest.json") as f:
        manifest = json.load(f)
    assert manifest["files"] == ["positivity.csv"]
    assert len(manifest["config_sha256"]) == 64


def test_json_format(tmp_path, config_file):
    cli.main(["-c", config_file, "-o", str(tmp_path / "out"), "-f", "json", "positivity"])
    with open(tmp_path / "out" / "positivity" / "positivity.json") as f:
        records = json.load(f)
    assert [r["case"] for r in records] == ["model", "negative"]


def test_ladder_is_reproducible_across_workers(tmp_path, config_file):
    cli.main(["-c", config_file, "-o", str(tmp_path / "one"), "-j", "1", "ladder"])
    cli.main(["-c", config_file, "-o", str(tmp_path / "two"), "-j", "2", "ladder"])
    for name in ("counting.csv", "ladder.csv", "borel.csv", "ladder_summary.json"):
        a = (tmp_path / "one" / "ladder" / name).read_bytes()
        b = (tmp_path / "two" / "ladder" / name).read_bytes()
        assert a == b, name


def test_ladder_certifies_every_entry(tmp_path):
    path = tmp_path / "ladder.yaml"
    path.write_text("ladder:\n  h_values: [0.01, 0.001]\n")
    run(str(path), tmp_path / "out", "ladder")
    directory = tmp_path / "out" / "ladder"
    with open(directory / "ladder.csv") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0])[:4] == ["k", "beta", "z", "residual"]
    assert max(float(r["residual"]) for r in rows) <= 1e-8
    assert max(float(r["monodromy_residual"]) for r in rows) <= 1e-8
    with open(directory / "ladder_summary.json") as f:
        summary = json.load(f)
    assert summary["N"] == len(rows)
    assert (summary["h"], summary["m"], summary["c0"]) == (0.001, 2, 1.0)
    assert "slope" in summary["slope_diagnostics"]


@pytest.mark.slow
def test_geodesic_command(tmp_path, config_file):
    run(config_file, tmp_path / "out", "geodesic")
    with open(tmp_path / "out" / "geodesic" / "poincare.json") as f:
        orbits = json.load(f)["orbits"]
    assert [o["verdict"] for o in orbits] == ["semi-hyperbolic", "hyperbolic", "hyperbolic"]
    assert orbits[0]["signature"] == ["-", "+"]


def write_csv(path, rows):
    with open(path, "w", newline="") as f:
        csv.writer(f, lineterminator="\n").writerows(rows)
    return str(path)


def test_compare_within_tolerance(tmp_path, config_file):
    a = write_csv(tmp_path / "a.csv", [["h", "r"], ["0.01", "0.5"], ["0.005", "nan"]])
    b = write_csv(tmp_path / "b.csv", [["h", "r"], ["0.01", "0.5000000000001"], ["0.005", "nan"]])
    cli.main(["-c", config_file, "compare", "-b", a, "-n", b, "-r", "1e-9"])


def test_compare_reports_differences(tmp_path, config_file):
    a = write_csv(tmp_path / "a.csv", [["h", "r"], ["0.01", "0.5"]])
    b = write_csv(tmp_path / "b.csv", [["h", "r"], ["0.01", "0.6"]])
    with pytest.raises(SystemExit) as e:
        cli.main(["-c", config_file, "compare", "-b", a, "-n", b])
    assert e.value.code == EXIT_NUMERIC_FAILURE


def test_compare_missing_file_is_a_config_error(tmp_path, config_file):
    a = write_csv(tmp_path / "a.csv", [["h", "r"], ["0.01", "0.5"]])
    with pytest.raises(SystemExit) as e:
        cli.main(["-c", config_file, "compare", "-b", a, "-n", str(tmp_path / "absent.csv")])
    assert e.value.code == EXIT_CONFIG


def test_contract_on_small_grid(tmp_path):
    path = tmp_path / "contract.yaml"
    path.write_text("contract:\n  N: 256\n  h_values: [0.01, 0.005]\n  s_values: [0.0, 0.3]\n")
    run(str(path), tmp_path / "out", "contract")
    with open(tmp_path / "out" / "contract" / "contraction.csv") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0]) == ["h", "hbar_tilde", "s", "r", "gap_C", "gap_N", "unitarity_defect"]
    assert len(rows) == 4
    r = {float(row["s"]): float(row["r"]) for row in rows[2:]}
    assert abs(r[0.0] - 1) <= 1e-9
    assert r[0.3] < 1
