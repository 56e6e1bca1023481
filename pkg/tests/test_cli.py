import json

import numpy as np
import pytest

from fairspace.cli import main
from fairspace.errors import FairspaceError
from fairspace.io import dump_json, parse_map_file, parse_space_file, space_from_dict


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_minimal_json(data_dir):
    s = parse_space_file(data_dir / "minimal.json")
    assert s.n == 2 and s.k == 2 and s.dist[0, 1] == 1.0


def test_both_embedding_and_dist(data_dir):
    with pytest.raises(FairspaceError) as exc:
        parse_space_file(data_dir / "both_keys.json")
    assert exc.value.code == "SCHEMA_ERROR"


def test_csv_matches_json(data_dir):
    a = parse_space_file(data_dir / "line.csv")
    b = parse_space_file(data_dir / "line.json")
    assert a.ids == b.ids and a.group_names == b.group_names
    assert np.array_equal(a.groups, b.groups) and np.array_equal(a.dist, b.dist)
    assert np.array_equal(a.measure, b.measure)


def test_schema_errors(tmp_path):
    for payload in ([1, 2], {"points": ["a"]}, {"points": ["a"], "groups": ["A"], "dist": [[0]], "extra": 1},
                    {"points": ["a", "b"], "groups": ["A", "A"], "dist": [["x", 1], [1, 0]]}):
        with pytest.raises(FairspaceError) as exc:
            space_from_dict(payload)
        assert exc.value.code == "SCHEMA_ERROR"
    bad = tmp_path / "bad.csv"
    bad.write_text("id,grp,x1\na,A,0\n")
    with pytest.raises(FairspaceError) as exc:
        parse_space_file(bad)
    assert exc.value.code == "SCHEMA_ERROR"


def test_missing_file(tmp_path):
    with pytest.raises(FairspaceError) as exc:
        parse_space_file(tmp_path / "nope.json")
    assert exc.value.code == "IO_ERROR"


def test_invalid_metric_in_file(tmp_path):
    p = tmp_path / "asym.json"
    p.write_text(json.dumps({"points": ["a", "b"], "groups": ["A", "A"], "dist": [[0, 1], [2, 0]]}))
    with pytest.raises(FairspaceError) as exc:
        parse_space_file(p)
    assert "ASYMMETRY" in exc.value.codes


def test_map_file(data_dir):
    OS = parse_space_file(data_dir / "bias_os.json")
    DS = parse_space_file(data_dir / "bias_ds.json")
    f = parse_map_file(data_dir / "bias_map.json", OS, DS)
    assert f.rich and f.image.tolist() == [0, 0, 1, 1]


def test_dump_json_sorted_and_strict():
    assert dump_json({"b": 1, "a": [1.5]}) == '{\n  "a": [\n    1.5\n  ],\n  "b": 1\n}\n'
    with pytest.raises(ValueError):
        dump_json({"x": float("nan")})


def test_analyze_identical_spaces(capsys, data_dir):
    f = data_dir / "bias_cs.json"
    code, out, _ = run(capsys, "analyze", f, f, "--eps", 0.1, "--threshold", 2)
    report = json.loads(out)
    assert code == 0
    pair = report["pairs"][0]
    assert pair["distortion"]["rho"] == 0.0 and pair["skew"]["sigma"] == 1.0
    assert pair["gromov_wasserstein"] == 0.0


def test_analyze_structural_bias_fixture(capsys, data_dir):
    code, out, _ = run(capsys, "analyze", data_dir / "bias_cs.json", data_dir / "bias_os.json",
                       "--eps", 0.5, "--threshold", 1, "--delta", 0.01)
    report = json.loads(out)
    checks = {c["check"]: c for c in report["checks"]}
    assert code == 0
    assert checks["structural_bias"]["holds"] and checks["structural_bias"]["achieved"] == pytest.approx(51.0)
    assert report["spaces"]["OS"]["group_wasserstein"][0][1] == pytest.approx(3.0)


def test_analyze_three_spaces(capsys, data_dir):
    args = ["analyze", data_dir / "bias_cs.json", data_dir / "bias_os.json", data_dir / "bias_ds.json",
            "--decision-map", data_dir / "bias_map.json", "--eps", 0.5, "--threshold", 1]
    code, out, _ = run(capsys, *args)
    report = json.loads(out)
    assert code == 0 and "fairness" in report and len(report["pairs"]) == 2
    code, out, _ = run(capsys, *args, "--worldview", "wysiwyg", "--eps-prime", 0.5)
    checks = {c["check"]: c for c in json.loads(out)["checks"]}
    assert not checks["fairness"]["holds"] and checks["fairness"]["witnesses"] == [["a2", "b1"]]
    assert {"direct_discrimination", "non_discrimination"} <= set(checks)


def test_analyze_refuses_missing_tolerances(capsys, data_dir):
    f = data_dir / "bias_cs.json"
    code, _, err = run(capsys, "analyze", f, f, "--threshold", 1)
    assert code == 2 and json.loads(err)["error"] == "USAGE_ERROR"
    args = ["analyze", f, f, data_dir / "bias_ds.json", "--decision-map", data_dir / "bias_map.json",
            "--eps", 1, "--threshold", 1, "--worldview", "wae"]
    code, _, err = run(capsys, *args)
    assert code == 2 and "--eps-prime" in json.loads(err)["message"]


def test_analyze_malformed_json(capsys, data_dir):
    code, out, err = run(capsys, "analyze", data_dir / "malformed.json", data_dir / "bias_os.json",
                         "--eps", 1, "--threshold", 1)
    assert code == 2 and out == "" and json.loads(err)["error"] == "SCHEMA_ERROR"


def test_analyze_id_mismatch(capsys, data_dir):
    code, _, err = run(capsys, "analyze", data_dir / "bias_cs.json", data_dir / "minimal.json",
                       "--eps", 1, "--threshold", 1)
    assert code == 2 and json.loads(err)["error"] == "ID_MISMATCH"


def test_skew_and_axioms(capsys, data_dir):
    code, out, _ = run(capsys, "skew", data_dir / "bias_cs.json", data_dir / "bias_os.json", "--delta", 0.01)
    assert code == 0 and json.loads(out)["skew"]["sigma"] == pytest.approx(51.0)
    code, out, _ = run(capsys, "skew", data_dir / "bias_cs.json", data_dir / "bias_os.json",
                       "--smoothing", "perturb", "--delta", 0.01, "--seed", 1)
    assert code == 0 and json.loads(out)["skew"]["mode"] == "perturb"
    code, out, _ = run(capsys, "axioms", data_dir / "bias_cs.json", data_dir / "bias_os.json", "--eps", 0.5)
    checks = {c["check"]: c for c in json.loads(out)["checks"]}
    assert checks["wae"]["achieved"] == pytest.approx(1.0) and checks["wysiwyg"]["achieved"] == 2.0


def test_mechanism_command(capsys, data_dir):
    code, out, _ = run(capsys, "mechanism", data_dir / "bias_os.json", "--kind", "gfm", "--eps", 1e-9)
    report = json.loads(out)
    assert code == 0 and report["verdict"]["holds"]
    code, out, _ = run(capsys, "mechanism", data_dir / "line.json", "--kind", "ifm", "--eps", 0)
    assert json.loads(out)["verdict"]["achieved"] == 0.0


def test_simulate_unknown_experiment(capsys):
    code, _, err = run(capsys, "simulate", "theorem9")
    assert code == 2 and json.loads(err)["error"] == "BAD_EXPERIMENT"


def test_simulate_bad_grid(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"colour": "blue"}))
    code, _, err = run(capsys, "simulate", "theorem2", "--config", cfg)
    assert code == 2 and json.loads(err)["error"] == "BAD_GRID"
    code, _, err = run(capsys, "simulate", "conflict", "--trials", 3)
    assert code == 2 and json.loads(err)["error"] == "BAD_GRID"


def test_simulate_theorem1_writes_json_and_csv(capsys, tmp_path):
    out = tmp_path / "t1.json"
    code, _, _ = run(capsys, "simulate", "theorem1", "--trials", 100, "--seed", 7, "--out", out)
    report = json.loads(out.read_text())
    assert code == 0 and report["summary"]["violations"] == 0
    rows = (tmp_path / "t1.csv").read_text().splitlines()
    assert rows[0] == "trial,sigma_cs_os,sigma_os_ds,sigma_cs_ds,violations,bound,margin"
    assert len(rows) == 101


def test_simulate_config_and_failure_exit(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"deltas": [0.1], "delta_primes": [0.1], "eps_prime": 0.2,
                               "world": {"n_per_group": 15, "group_separation": 1.0, "within_spread": 0.5}}))
    code, out, _ = run(capsys, "simulate", "theorem1", "--trials", 30, "--config", cfg)
    assert code == 1 and not json.loads(out)["passed"]


def test_simulate_conflict_reports_both_scenarios(capsys):
    code, out, _ = run(capsys, "simulate", "conflict", "--seed", 7)
    report = json.loads(out)
    assert code == 0 and set(report["scenarios"]) == {"structural_bias", "wysiwyg"}
    code, csv_out, _ = run(capsys, "simulate", "conflict", "--seed", 7, "--format", "csv")
    assert csv_out.splitlines()[1].startswith("structural_bias/ifm,")


def test_size_cap_env(capsys, data_dir, monkeypatch):
    monkeypatch.setenv("FAIRSPACE_SIZE_CAP", "3")
    f = data_dir / "bias_cs.json"
    code, out, _ = run(capsys, "analyze", f, f, "--eps", 0.1, "--threshold", 2)
    report = json.loads(out)
    assert report["pairs"][0]["gromov_wasserstein"]["error"] == "SIZE_CAP_EXCEEDED"


def test_module_entry_point(data_dir):
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "fairspace", "skew", str(data_dir / "bias_cs.json"),
                           str(data_dir / "bias_os.json"), "--delta", "0.01"], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["skew"]["rho_b"] == 0.5
