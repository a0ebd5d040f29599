import csv
import json
import os

import pytest

from roughlab import cli


def run(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def _read(path):
    with open(path) as fh:
        return fh.read()


def test_every_subcommand_supports_dry_run(capsys):
    for name in cli.COMMANDS:
        code, out, _ = run([name, "--dry-run"], capsys)
        assert code == 0, name
        assert json.loads(out)["status"] == "valid"


def test_dry_run_writes_nothing(tmp_path, capsys):
    out_dir = tmp_path / "o"
    code, _, _ = run(["power-count", "--dry-run", "--out", str(out_dir)], capsys)
    assert code == 0 and not out_dir.exists()


def test_validation_errors_exit_2_with_parameter_path(capsys):
    code, _, err = run(["simulate", "--alpha", "1.5", "--dry-run"], capsys)
    assert code == 2 and "config.alpha" in err
    code, _, err = run(["simulate", "--n-modes", "abc"], capsys)
    assert code == 2 and "--n-modes" in err
    code, _, err = run(["bubble-series", "--alpha", "0.3"], capsys)
    assert code == 2 and "alpha" in err
    code, _, err = run(["variance-scan", "--controls", "101,202,303", "--dry-run"], capsys)
    assert code == 2 and "config.controls" in err


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpha": 0.3, "n_times": 17}))
    code, out, _ = run(["simulate", "--config", str(cfg), "--alpha", "0.4", "--dry-run"], capsys)
    params = json.loads(out)["params"]
    assert code == 0 and params["alpha"] == 0.4 and params["n_times"] == 17 and params["d"] == 1
    cfg.write_text(json.dumps({"alpha": 0.3, "bogus": 1}))
    code, _, err = run(["simulate", "--config", str(cfg), "--dry-run"], capsys)
    assert code == 2 and "config.bogus" in err


def test_power_count_table_kind(tmp_path, capsys):
    cfg = tmp_path / "pc.json"
    cfg.write_text(json.dumps({"kind": "power_count_table", "alpha": 0.2, "v_max": 6}))
    out_dir = tmp_path / "pc"
    code, out, _ = run(["run", str(cfg), "--out", str(out_dir)], capsys)
    assert code == 0
    rows = list(csv.DictReader(open(out_dir / "degrees.csv")))
    divergent = [(r["n_sigma"], r["n_phi"], r["n_dphi"]) for r in rows if r["divergent_flag"] == "1"]
    assert divergent == [("2", "0", "0")]
    manifest = json.loads(_read(out_dir / "manifest.json"))
    assert set(manifest) >= {"config_sha256", "versions", "seeds", "timestamp", "files"}


def test_signature_check_kind_on_square_corner(tmp_path, capsys):
    cfg = tmp_path / "sc.json"
    cfg.write_text(json.dumps({"kind": "signature_check", "depth": 4}))
    code, out, _ = run(["run", str(cfg)], capsys)
    summary = json.loads(out)
    assert code == 0
    assert summary["chen_violation"] < 1e-9 and summary["shuffle_violation"] < 1e-9


def test_variance_scan_kind(tmp_path, capsys):
    cfg = tmp_path / "vs.json"
    cfg.write_text(json.dumps({"kind": "variance_scan", "alpha": 0.2, "quantity": "a_plus",
                               "controls": [1024, 2048, 4096, 8192], "replicates": 200}))
    out_dir = tmp_path / "vs"
    code, out, _ = run(["run", str(cfg), "--out", str(out_dir)], capsys)
    assert code == 0
    side = json.loads(_read(out_dir / "scan.json"))
    assert side["fitted_exponent"] == pytest.approx(0.2, abs=0.1)
    assert _read(out_dir / "scan.csv").startswith("control,estimate,mc_error\n")


def test_outputs_are_byte_identical_across_runs(tmp_path, capsys):
    for name in ("a", "b"):
        code, _, _ = run(["simulate", "--n-times", "33", "--n-modes", "256", "--d", "2",
                          "--out", str(tmp_path / name)], capsys)
        assert code == 0
    for f in ("path.csv", "noise.json", "result.json"):
        assert _read(tmp_path / "a" / f) == _read(tmp_path / "b" / f)
    ma = json.loads(_read(tmp_path / "a" / "manifest.json"))
    mb = json.loads(_read(tmp_path / "b" / "manifest.json"))
    ma.pop("timestamp"), mb.pop("timestamp")
    assert ma == mb


def test_worker_count_does_not_change_results(tmp_path, capsys, monkeypatch):
    args = ["variance-scan", "--replicates", "100", "--controls", "256,512,1024"]
    monkeypatch.setenv(cli.WORKERS_ENV, "1")
    _, one, _ = run(args, capsys)
    monkeypatch.setenv(cli.WORKERS_ENV, "3")
    _, three, _ = run(args, capsys)
    assert one == three
    monkeypatch.setenv(cli.WORKERS_ENV, "0")
    code, _, _ = run(args, capsys)
    assert code == 2


def test_failure_leaves_no_partial_output(tmp_path, capsys, monkeypatch):
    def boom(p, prep):
        raise FloatingPointError("diverged")

    monkeypatch.setitem(cli.HANDLERS, "wick", boom)
    out_dir = tmp_path / "w"
    code, _, err = run(["wick", "--out", str(out_dir)], capsys)
    assert code == 3 and "diverged" in err
    assert not out_dir.exists()
    assert os.listdir(tmp_path) == []


def test_non_finite_result_is_numerical_failure(capsys, monkeypatch):
    monkeypatch.setitem(cli.HANDLERS, "wick", lambda p, prep: ({"moment": float("nan")}, {}))
    code, _, _ = run(["wick"], capsys)
    assert code == 3


def test_small_commands(tmp_path, capsys):
    code, out, _ = run(["wick", "--cov", "[[1]]", "--indices", "0,0,0,0"], capsys)
    assert code == 0 and json.loads(out)["moment"] == 3.0
    code, out, _ = run(["heisenberg", "--g1", "1,0,0", "--g2", "0,1,0"], capsys)
    assert json.loads(out)["product"] == [1.0, 1.0, 0.5]
    code, out, _ = run(["scales", "--rho", "3"], capsys)
    assert json.loads(out)["max_telescoping_defect"] < 1e-14
    code, out, _ = run(["bubble-series", "--rho", "0", "--K", "3"], capsys)
    assert json.loads(out)["value"] == pytest.approx(100 * 0.03 / 1.03)
    code, out, _ = run(["sd-spectrum", "--sigma", "bare"], capsys)
    assert json.loads(out)["area_spectrum"] == pytest.approx(0.0, abs=1e-12)
    code, out, _ = run(["rde-solve", "--benchmark", "commuting", "--rank", "1", "--n-steps", "8,16,32"], capsys)
    assert code == 0 and json.loads(out)["order"] == pytest.approx(1.0, abs=0.2)


def test_path_csv_roundtrip_through_commands(tmp_path, capsys):
    out_dir = tmp_path / "sim"
    run(["simulate", "--d", "2", "--n-times", "65", "--n-modes", "256", "--out", str(out_dir)], capsys)
    code, out, _ = run(["chen-check", "--path-csv", str(out_dir / "path.csv"), "--depth", "3"], capsys)
    assert code == 0 and json.loads(out)["chen_violation"] < 1e-9
    code, _, err = run(["shuffle-check", "--path-csv", str(tmp_path / "missing.csv")], capsys)
    assert code == 2 and "path_csv" in err
