import json
import os
import subprocess
import sys

import pytest

from fockverify import cli
from fockverify.verify import CheckResult

NON_VOLATILE = ("version", "config", "config_sha256", "checks", "constants", "verdict")


def run_cli(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def stable(report):
    return json.dumps({k: report[k] for k in NON_VOLATILE}, sort_keys=True)


# argument and configuration errors ------------------------------------------


def test_unknown_flag_is_usage_error(capsys):
    code, _, err = run_cli(["verify", "integrals", "--bogus"], capsys)
    assert code == cli.EXIT_USAGE
    assert "bogus" in err


def test_unknown_group_is_usage_error(capsys):
    assert run_cli(["verify", "nonsense"], capsys)[0] == cli.EXIT_USAGE


def test_unknown_config_key_is_rejected(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"seed": 1, "samples_per_sector": 5}))
    code, _, err = run_cli(["verify", "integrals", "--config", str(path)], capsys)
    assert code == cli.EXIT_USAGE
    assert "samples_per_sector" in err


@pytest.mark.parametrize("bad", [{"norm_samples": 0}, {"checks": ["integrals", "nope"]}, {"jobs": 0}, {"seed": "x"}])
def test_invalid_config_values_are_rejected(bad):
    with pytest.raises((cli.ConfigError, TypeError)):
        cli.RunConfig.from_dict(bad)


def test_malformed_config_file(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    assert run_cli(["verify", "integrals", "--config", str(path)], capsys)[0] == cli.EXIT_USAGE


def test_missing_config_file(tmp_path, capsys):
    assert run_cli(["verify", "integrals", "--config", str(tmp_path / "absent.json")], capsys)[0] == cli.EXIT_USAGE


# happy paths ----------------------------------------------------------------


def test_verify_integrals_passes(capsys):
    code, out, _ = run_cli(["verify", "integrals"], capsys)
    assert code == cli.EXIT_PASS
    report = json.loads(out)
    assert report["verdict"] == "pass"
    assert [c["name"] for c in report["checks"]] == ["radial_integrals"]
    assert set(report) == set(NON_VOLATILE) | {"volatile"}
    assert "radial_integrals" in report["volatile"]["runtime_s"]


def test_empty_selection_is_vacuous_pass(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"checks": []}))
    code, out, _ = run_cli(["report", "--config", str(path)], capsys)
    assert code == cli.EXIT_PASS
    report = json.loads(out)
    assert report["verdict"] == "pass-vacuous" and report["checks"] == []


def test_report_is_deterministic_and_seed_sensitive(capsys):
    argv = ["verify", "sets", "--n", "3", "--trials", "2000", "--seed", "42"]
    a = json.loads(run_cli(argv, capsys)[1])
    b = json.loads(run_cli(argv, capsys)[1])
    c = json.loads(run_cli(argv[:-1] + ["43"], capsys)[1])
    assert stable(a) == stable(b)
    assert a["config"]["seed"] == 42
    assert stable(a) != stable(c)


def test_json_round_trip_is_exact(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert run_cli(["verify", "lowerbound", "-o", str(out)], capsys)[0] == cli.EXIT_PASS
    text = out.read_text()
    report = json.loads(text)
    # floats survive serialisation bit for bit
    assert json.dumps(report, indent=2) + "\n" == text
    again = tmp_path / "again.json"
    assert run_cli(["report", "--input", str(out), "-o", str(again)], capsys)[0] == cli.EXIT_PASS
    assert again.read_text() == text


def test_report_input_renders_text(tmp_path, capsys):
    out = tmp_path / "r.json"
    run_cli(["verify", "integrals", "-o", str(out)], capsys)
    code, text, _ = run_cli(["report", "--input", str(out), "--format", "text"], capsys)
    assert code == cli.EXIT_PASS
    assert "radial_integrals" in text and "pass" in text


def test_report_input_missing_file(tmp_path, capsys):
    assert run_cli(["report", "--input", str(tmp_path / "none.json")], capsys)[0] == cli.EXIT_USAGE


def test_report_exit_code_follows_verdict(tmp_path, capsys):
    path = tmp_path / "r.json"
    for verdict, code in [("fail", cli.EXIT_FAIL), ("inconclusive", cli.EXIT_INCONCLUSIVE), ("pass", cli.EXIT_PASS)]:
        path.write_text(json.dumps({"version": "x", "checks": [], "verdict": verdict}))
        assert run_cli(["report", "--input", str(path)], capsys)[0] == code


def test_overall_verdict_rules():
    def r(status):
        return CheckResult("x", status, 0.0, 0.0, "exact")

    assert cli.overall_verdict([]) == "pass-vacuous"
    assert cli.overall_verdict([r("pass"), r("pass")]) == "pass"
    assert cli.overall_verdict([r("pass"), r("inconclusive")]) == "inconclusive"
    assert cli.overall_verdict([r("inconclusive"), r("fail")]) == "fail"


def test_text_format(capsys):
    code, out, _ = run_cli(["verify", "integrals", "--format", "text"], capsys)
    assert code == cli.EXIT_PASS
    assert "radial_integrals" in out
    assert "verdict" in out.lower()


def test_unwritable_output_is_io_error(tmp_path, capsys):
    target = tmp_path / "missing_dir" / "r.json"
    code, _, err = run_cli(["verify", "integrals", "-o", str(target)], capsys)
    assert code == cli.EXIT_IO
    assert "cannot write" in err


def test_env_seed_is_used_unless_overridden(monkeypatch, tmp_path, capsys):
    monkeypatch.setenv(cli.SEED_ENV, "7")
    report = json.loads(run_cli(["verify", "integrals"], capsys)[1])
    assert report["config"]["seed"] == 7
    report = json.loads(run_cli(["verify", "integrals", "--seed", "3"], capsys)[1])
    assert report["config"]["seed"] == 3
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"seed": 11, "checks": ["integrals"]}))
    report = json.loads(run_cli(["report", "--config", str(path)], capsys)[1])
    assert report["config"]["seed"] == 11
    monkeypatch.setenv(cli.SEED_ENV, "abc")
    assert run_cli(["verify", "integrals"], capsys)[0] == cli.EXIT_USAGE


def test_constants_subcommand(capsys):
    code, out, _ = run_cli(["constants"], capsys)
    assert code == cli.EXIT_PASS
    assert out.startswith("C1 = 557.569906745696")
    code, out, _ = run_cli(["constants", "--format", "json"], capsys)
    data = json.loads(out)
    assert data["constants"]["C2"] == pytest.approx(2.5228646537770008, rel=1e-12)
    assert data["check"]["status"] == "pass"


def test_check_seeds_are_independent_of_selection():
    cfg = cli.RunConfig(seed=5)
    full = {p.key: p.kwargs.get("seed") for p in cli.plan_checks(cfg)}
    cfg_sets = cli.RunConfig(seed=5, checks=["sets"])
    for p in cli.plan_checks(cfg_sets):
        assert p.kwargs.get("seed") == full[p.key]
    assert len(set(v for v in full.values() if v is not None)) == sum(v is not None for v in full.values())


def test_plan_covers_every_group():
    groups = {p.group for p in cli.plan_checks(cli.RunConfig())}
    assert groups == set(cli.GROUPS)


def test_jsonable_handles_special_values():
    out = cli.jsonable({"a": float("nan"), "b": float("inf"), "c": 1 + 2j, "d": (1, 2)})
    assert out == {"a": "nan", "b": "inf", "c": {"re": 1.0, "im": 2.0}, "d": [1, 2]}
    json.dumps(out, allow_nan=False)


def test_console_script_entry_point(tmp_path):
    env = dict(os.environ)
    env.pop(cli.SEED_ENV, None)
    proc = subprocess.run([sys.executable, "-m", "fockverify.cli", "verify", "integrals", "--format", "text"], capture_output=True, text=True, env=env)
    assert proc.returncode == 0
    assert "radial_integrals" in proc.stdout


@pytest.mark.slow
def test_spec_example_sets_run_is_deterministic(capsys):
    argv = ["verify", "sets", "--n", "3", "--trials", "100000", "--seed", "42"]
    code_a, out_a, _ = run_cli(argv, capsys)
    code_b, out_b, _ = run_cli(argv, capsys)
    assert code_a == code_b == cli.EXIT_PASS
    assert stable(json.loads(out_a)) == stable(json.loads(out_b))
