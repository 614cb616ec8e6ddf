import json

import pytest

from crosscurve.cli import EXIT_FAIL, EXIT_IO, EXIT_OK, EXIT_USAGE, main, thread_count


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


@pytest.mark.parametrize(
    "family, extra",
    [
        ("hilbert", ["--dim", "3"]),
        ("bregman", ["--family-params", '{"mode": "reverse"}']),
        ("semi_geostrophic", []),
        ("monge", []),
        ("soft_threshold", []),
        ("sphere", []),
    ],
)
def test_verify_passing_families(family, extra, capsys):
    code, doc = _run(["verify", "--family", family, "--trials", "5", "--n-y", "16", "--seed", "42", *extra], capsys)
    assert code == EXIT_OK
    assert doc["schema"] == 1 and doc["ok"] and doc["report"]["passed"]


def test_verify_negative_controls(capsys):
    code, doc = _run(["verify", "--family", "log_distance", "--trials", "2", "--n-y", "16", "--expect-fail"], capsys)
    assert code == EXIT_OK and not doc["report"]["passed"]
    code, _ = _run(["verify", "--family", "log_distance", "--trials", "2", "--n-y", "16"], capsys)
    assert code == EXIT_FAIL
    code, doc = _run(["verify", "--check", "pc", "--family", "hyperbolic", "--trials", "5", "--expect-fail"], capsys)
    assert code == EXIT_OK and doc["report"]["check_kind"] == "pc"


def test_verify_usage_errors(capsys, tmp_path):
    assert main(["verify", "--family", "torus"]) == EXIT_USAGE
    assert main(["verify", "--check", "pc", "--family", "monge", "--trials", "1"]) == EXIT_USAGE
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["--config", str(bad), "verify"]) == EXIT_USAGE
    unknown = tmp_path / "unknown.json"
    unknown.write_text('{"colour": 1}')
    assert main(["--config", str(unknown), "verify"]) == EXIT_USAGE
    assert main(["--config", str(tmp_path / "missing.json"), "verify"]) == EXIT_IO
    assert main(["frobnicate"]) == EXIT_USAGE
    capsys.readouterr()


def test_config_supplies_defaults(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"family": "sphere", "trials": 3, "n-y": 8, "seed": 5}))
    code, doc = _run(["--config", str(cfg), "verify"], capsys)
    assert code == EXIT_OK
    assert doc["family"]["family"] == "sphere" and doc["trials"] == 3 and doc["seed"] == 5


def test_outputs_are_not_overwritten(tmp_path, capsys):
    out = tmp_path / "r.json"
    argv = ["verify", "--trials", "2", "--n-y", "4", "--out", str(out)]
    assert main(argv) == EXIT_OK
    first = out.read_bytes()
    assert main(argv) == EXIT_IO
    assert main([*argv, "--force"]) == EXIT_OK
    assert out.read_bytes() == first
    capsys.readouterr()


def test_identical_runs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert main(["verify", "--family", "bregman", "--trials", "4", "--n-y", "8", "--seed", "9", "--out", str(path)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_counterexample_writes_csv(tmp_path, capsys):
    out = tmp_path / "ce"
    assert main(["counterexample", "--out-dir", str(out)]) == EXIT_OK
    rows = (out / "f_mu1.csv").read_text().splitlines()
    assert rows[0] == "s,f" and len(rows) == 102
    assert float(rows[1].split(",")[1]) == 0.0
    report = json.loads((out / "report.json").read_text())
    assert report["violation_confirmed"] and report["endpoint_max_abs"] <= 1e-12
    assert (out / "f_t0.50.csv").exists()
    capsys.readouterr()


def test_mtw_scan(capsys):
    code, doc = _run(["mtw", "--cost", "sphere", "--samples", "40", "--seed", "7", "--expect", "nncc-consistent"], capsys)
    assert code == EXIT_OK and doc["scan"]["classification"] == "nncc-consistent"
    code, _ = _run(["mtw", "--cost", "log_distance", "--samples", "40", "--seed", "7", "--expect", "nncc-consistent"], capsys)
    assert code == EXIT_FAIL
    assert main(["mtw", "--cost", "torus"]) == EXIT_USAGE
    capsys.readouterr()


def test_lift_monge(capsys):
    code, doc = _run(["lift", "--base", "monge", "--atoms", "3", "--sigmas", "4", "--seed", "1"], capsys)
    assert code == EXIT_OK and doc["ok"]


def test_gw_and_gh(tmp_path, capsys):
    x = tmp_path / "x.json"
    y = tmp_path / "y.json"
    x.write_text(json.dumps({"gauge": [[0, 1], [1, 0]], "weights": [0.5, 0.5]}))
    y.write_text(json.dumps({"gauge": [[0, 2], [2, 0]], "weights": [0.5, 0.5]}))
    code, doc = _run(["gw", "--x", str(x), "--y", str(y)], capsys)
    assert code == EXIT_OK and abs(doc["value"] - 0.5) <= 1e-8
    code, doc = _run(["gh", "--x", str(x), "--y", str(x)], capsys)
    assert code == EXIT_OK and doc["value"] == 0.0
    m = tmp_path / "m.json"
    m.write_text(json.dumps({"metric": [[0, 1, 5], [1, 0, 1], [5, 1, 0]]}))
    assert main(["gh", "--x", str(m), "--y", str(x)]) != EXIT_OK
    capsys.readouterr()


def test_thread_count(monkeypatch):
    monkeypatch.setenv("CROSSCURVE_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("CROSSCURVE_THREADS", "0")
    assert thread_count() >= 1
