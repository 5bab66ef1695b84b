import csv
import json
import subprocess
import sys


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "tsystems.cli", *args], capture_output=True, text=True
    )


def test_certify_ect_fixture():
    r = run_cli("certify", "--family", "power:0,2,3", "--domain", "0.5,2", "--target", "ect")
    assert r.returncode == 0
    out = json.loads(r.stdout)
    assert out["level"] == "ECT"


def test_certify_refuted_exit_code():
    r = run_cli(
        "certify", "--family", "monomial:0,1,3", "--domain", "0,1",
        "--target", "et", "--grid", "101",
    )
    assert r.returncode == 2
    out = json.loads(r.stdout)
    assert out["level"] == "none" and out["counterexample"]["nodes"] == [[0.0, 3]]


def test_decompose_power_alpha():
    r = run_cli(
        "decompose", "--mode", "pos_ab", "--family", "power:0,0.5",
        "--domain", "0,1", "--coeffs", "1,0",
    )
    assert r.returncode == 0
    out = json.loads(r.stdout)
    assert out["f_lower"]["coeffs"] == [-0.0, 1.0] or out["f_lower"]["coeffs"] == [0.0, 1.0]


def test_missing_problem_file_exit_1():
    r = run_cli("run", "/tmp/definitely_missing_problem.json")
    assert r.returncode == 1


def test_problem_file_round_trip(tmp_path):
    prob = {
        "schema_version": "1",
        "task": "certify",
        "payload": {"family": "power:0,2,3", "domain": "0.5,2", "target": "ect"},
    }
    path = tmp_path / "p.json"
    path.write_text(json.dumps(prob))
    r = run_cli("run", str(path))
    assert r.returncode == 0
    assert json.loads(r.stdout)["level"] == "ECT"


def test_bad_schema_version(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"schema_version": "2", "task": "certify", "payload": {}}))
    assert run_cli("run", str(path)).returncode == 1


def test_byte_identical_output():
    args = ("certify", "--family", "monomial:0,1,2", "--domain", "0,1", "--target", "t")
    assert run_cli(*args).stdout == run_cli(*args).stdout


def test_moments_check_infeasible_exit_2():
    r = run_cli("moments-check", "--moments", "1,0,-1", "--variant", "hamburger")
    assert r.returncode == 2


def test_sparse_moments_check_feasible():
    # moments of the atom 0.5 with weight 1 over monomials 0..2 on [0,1]
    r = run_cli(
        "moments-check", "--family", "monomial:0,1,2", "--domain", "0,1",
        "--moments", "1,0.5,0.25",
    )
    assert r.returncode == 0
    assert json.loads(r.stdout)["status"] == "feasible"


def test_decompose_plot_csv(tmp_path):
    plot = tmp_path / "dec.csv"
    r = run_cli(
        "decompose", "--mode", "pos_ab", "--family", "monomial:0,1,2",
        "--domain=-1,1", "--coeffs", "1,0,1", "--plot", str(plot), "--grid", "21",
    )
    assert r.returncode == 0
    rows = list(csv.reader(plot.open()))
    assert rows[0] == ["x", "f", "f_star", "f_upper_star"]
    assert len(rows) == 22
    # f = f_star + f_upper pointwise in the CSV
    for row in rows[1:]:
        x, f, fs, fu = map(float, row)
        assert abs(f - fs - fu) < 1e-9


def test_snake_cli():
    r = run_cli("snake", "--family", "monomial:0,1", "--domain=-1,1", "--g1=-1", "--g2=1")
    assert r.returncode == 0
    out = json.loads(r.stdout)
    assert len(out["touch_points"]) == 2


def test_approx_cli():
    r = run_cli(
        "approx", "--family", "monomial:0,1", "--domain=-1,1",
        "--target-fn", "monomial:0,1,2", "--coeffs", "0,0,1",
    )
    assert r.returncode == 0
    out = json.loads(r.stdout)
    assert abs(out["deviation"] - 0.5) < 1e-9


def test_usage_error_exit_1():
    assert run_cli("decompose", "--mode", "bogus", "--family", "monomial:0,1",
                   "--domain", "0,1", "--coeffs", "1,1").returncode == 1
    assert run_cli().returncode == 1
