import json
from fractions import Fraction as F

import pytest
from click.testing import CliRunner

from qifpipe import RRParams, random_response, read_matrix_csv, write_matrix_csv
from qifpipe.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def test_mech_build(runner, tmp_path):
    res = runner.invoke(main, ["mech", "build", "--family", "geometric", "-n", "3", "--alpha", "1/2"])
    assert res.exit_code == 0
    assert "2/3,1/6,1/6" in res.stdout
    spec = tmp_path / "s.json"
    spec.write_text(json.dumps({"family": "rr", "k": 3, "p": "2/5"}))
    out = tmp_path / "r.csv"
    res = runner.invoke(main, ["mech", "build", "--spec", str(spec), "--out", str(out)])
    assert res.exit_code == 0
    assert read_matrix_csv(out).entries_equal(random_response(RRParams(3, F(2, 5))))


def test_mech_build_errors(runner):
    assert runner.invoke(main, ["mech", "build"]).exit_code != 0
    res = runner.invoke(main, ["mech", "build", "--family", "rr", "-k", "3", "-p", "7/5"])
    assert res.exit_code != 0 and "Error" in res.output


def test_refine_check(runner, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_matrix_csv(random_response(RRParams(3, F(2, 5))), a)
    write_matrix_csv(random_response(RRParams(3, F(1, 4))), b)
    res = runner.invoke(main, ["refine", "check", str(a), str(b)])
    assert res.exit_code == 0
    doc = json.loads(res.stdout)
    assert doc["refines"] is True and doc["validated"] is True
    # a refutation is data as well, not a failing exit status
    res = runner.invoke(main, ["refine", "check", str(b), str(a)])
    doc = json.loads(res.stdout)
    assert res.exit_code == 0 and doc["refines"] is False and doc["validated"] is True
    assert F(doc["certificate"]["utility_a"]) > F(doc["certificate"]["utility_b"])


def test_refine_check_bad_input(runner, tmp_path):
    a = tmp_path / "a.csv"
    a.write_text(",0\n0,zz\n")
    assert runner.invoke(main, ["refine", "check", str(a), str(a)]).exit_code != 0
    assert runner.invoke(main, ["refine", "check", str(a), str(tmp_path / "missing.csv")]).exit_code != 0


def test_stability_scan(runner, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "mechanism": {"family": "geometric", "n": 7},
        "grid": ["2/7", "100/351"],
        "post": {"kind": "known_context_count", "known": [0, 1, 1], "target": 0},
        "loss": {"kind": "scaled_abs", "c": 1000},
    }))
    out = tmp_path / "rep"
    res = runner.invoke(main, ["stability", "scan", str(cfg), "--out", str(out)])
    assert res.exit_code == 0
    assert "UNSTABLE" in res.stderr
    assert res.stdout.splitlines()[2].endswith(",1")
    assert {p.name for p in out.iterdir()} == {"verdict.json", "scan.csv", "plot_data.csv"}


def test_stability_scan_bad_config(runner, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    assert runner.invoke(main, ["stability", "scan", str(cfg)]).exit_code != 0
    cfg.write_text(json.dumps({"grid": ["1/2"]}))
    assert runner.invoke(main, ["stability", "scan", str(cfg)]).exit_code != 0


def test_experiment(runner, tmp_path):
    res = runner.invoke(main, ["experiment", "appendix-d", "--out", str(tmp_path), "--seed", "1"])
    assert res.exit_code == 0
    doc = json.loads(res.stdout)
    assert doc["verdict"] == "UNSTABLE"
    assert (tmp_path / "verdict.json").read_text() == res.stdout
    assert (tmp_path / "perturber_alpha_2_7.csv").exists()


def test_experiment_errors(runner, tmp_path):
    assert runner.invoke(main, ["experiment", "bogus"]).exit_code != 0
    assert runner.invoke(main, ["experiment", "custom"]).exit_code != 0
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert runner.invoke(main, ["experiment", "geo-counting", "--out", str(blocker / "sub")]).exit_code != 0


def test_ingest(runner, tmp_path):
    data = tmp_path / "d.csv"
    data.write_text("id,status\n1,jail\n2,free\n3,free\n4,prison\n")
    mapping = tmp_path / "m.json"
    mapping.write_text(json.dumps({"jail": 0, "free": 1, "prison": 2}))
    res = runner.invoke(main, ["ingest", "--csv", str(data), "--column", "status",
                               "--map", str(mapping), "--target-row", "3"])
    assert res.exit_code == 0
    doc = json.loads(res.stdout)
    assert doc["known"] == [0, 1, 1]
    assert doc["prior"]["entries"] == [["1/4", "1/2", "1/4"]]
    res = runner.invoke(main, ["ingest", "--csv", str(data), "--column", "status",
                               "--map", str(mapping), "--target-row", "3", "--uniform-prior"])
    assert json.loads(res.stdout)["prior"]["entries"] == [["1/3", "1/3", "1/3"]]


def test_ingest_unmapped(runner, tmp_path):
    data = tmp_path / "d.csv"
    data.write_text("status\nfree\nlimbo\n")
    mapping = tmp_path / "m.json"
    mapping.write_text(json.dumps({"free": 1}))
    res = runner.invoke(main, ["ingest", "--csv", str(data), "--column", "status",
                               "--map", str(mapping), "--target-row", "0"])
    assert res.exit_code != 0 and "limbo" in res.output and "line 3" in res.output
