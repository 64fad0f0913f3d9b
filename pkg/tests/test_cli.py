import json

import pytest

from fraccyl.cli import main
from fraccyl.config import load_config, parse_config
from fraccyl.grids import ConfigurationError


def test_empty_config_is_default():
    cfg = parse_config("")
    assert cfg.params(2).s == 0.9 and cfg.study().ell_list == (2.0, 4.0, 8.0, 16.0)


def test_canonical_round_trip(tmp_path):
    text = "[problem]\ns = 0.85\np = 3\n[study]\nell_list = [2, 4]\n"
    cfg = parse_config(text)
    canon = cfg.canonical_text()
    assert parse_config(canon).canonical_text() == canon
    path = tmp_path / "c.toml"
    path.write_text(canon)
    assert load_config(path).digest == cfg.digest
    assert parse_config(text + "[grid]\nh = 0.125\n").digest != cfg.digest


def test_every_violation_is_listed():
    with pytest.raises(ConfigurationError) as info:
        parse_config("[problem]\nfoo = 1\ns = 'x'\n[bogus]\n")
    msg = str(info.value)
    assert "problem.foo" in msg and "problem.s" in msg and "bogus" in msg


def test_rate_config_gate():
    with pytest.raises(ConfigurationError) as info:
        parse_config("[problem]\ns = 0.6\np = 2.5\n", kind="rate-elliptic")
    assert "s ∈ (1/p′,1)" in str(info.value)
    parse_config("[problem]\ns = 0.6\np = 2.5\n")  # fine outside rate studies


def test_constants_command(capsys):
    assert main(["constants", "--N", "2", "--s", "0.9", "--p", "2.5"]) == 0
    out = capsys.readouterr().out
    assert "reduction_residual" in out and "theta_N" in out


def test_usage_errors(capsys):
    assert main(["frobnicate"]) == 1
    assert main(["verify", "nothing"]) == 1
    assert main(["constants", "--bogus"]) == 1


def test_verify_and_manifest(tmp_path):
    out = tmp_path / "ineq"
    argv = ["verify", "inequalities", "--p", "2.5", "--samples", "20000", "--seed", "7",
            "--out", str(out)]
    assert main(argv) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    run = manifest["runs"][0]
    assert run["passed"] is True and len(run["config_digest"]) == 64
    assert (out / "elementary_inequalities.csv").exists()
    assert (out / "config.toml").exists()
    # no silent overwrite
    assert main(argv) == 1
    assert main(argv + ["--force"]) == 0
    assert len(json.loads((out / "manifest.json").read_text())["runs"]) == 2


def test_out_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("FRACCYL_OUT", str(tmp_path))
    assert main(["verify", "cutoff"]) == 0
    runs = list(tmp_path.iterdir())
    assert len(runs) == 1 and (runs[0] / "cutoff.json").exists()


def test_check_failure_exit_code(tmp_path):
    # tighter-than-possible slack: the fitted slope cannot reach it
    cfg = tmp_path / "c.toml"
    cfg.write_text("[study]\nell_list = [2, 4]\nslack = 1000.0\n")
    assert main(["rate-elliptic", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 2
    assert (tmp_path / "r" / "study.json").exists()


def test_configuration_error_exit_code(tmp_path):
    assert main(["rate-elliptic", "--s", "0.6", "--out", str(tmp_path / "r")]) == 1
    assert main(["solve-elliptic", "--h", "0.3", "--out", str(tmp_path / "s")]) == 1
    assert main(["constants", "--config", str(tmp_path / "missing.toml")]) == 1


def test_solve_commands(tmp_path):
    assert main(["solve-cross-section", "--out", str(tmp_path / "a")]) == 0
    assert (tmp_path / "a" / "solution.csv").read_text().startswith("x2,value")
    assert main(["solve-elliptic", "--ell", "1", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "b" / "solution.csv").read_text().startswith("x1,x2,value")
    assert main(["solve-parabolic", "--ell", "1", "--tau", "0.25", "--t-end", "0.5",
                 "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "index.json").exists()
    assert main(["poincare", "--domain", "cross", "--p", "2", "--out", str(tmp_path / "d")]) == 0


def test_threads_flag_is_deterministic(tmp_path):
    base = ["rate-elliptic", "--ell-list", "2,4", "--threads"]
    assert main(base + ["1", "--out", str(tmp_path / "one")]) == 0
    assert main(base + ["1", "--out", str(tmp_path / "two")]) == 0
    a = (tmp_path / "one" / "errors.csv").read_bytes()
    assert a == (tmp_path / "two" / "errors.csv").read_bytes()
    assert main(base + ["0", "--out", str(tmp_path / "bad")]) == 1
