import json

import pytest

from disorder import save_spec, spec_to_dict
from disorder.cli import main

from conftest import make_m1, make_m2, make_m3


@pytest.fixture
def m2_config(tmp_path):
    path = tmp_path / "m2.json"
    save_spec(make_m2(), path)
    return str(path)


@pytest.fixture
def bad_config(tmp_path):
    payload = spec_to_dict(make_m1())
    payload["p"] = [[1.0]]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(payload))
    return str(path)


class TestValidateCommand:
    def test_good_config(self, m2_config, capsys):
        assert main(["validate", m2_config]) == 0
        assert "OK" in capsys.readouterr().out

    def test_bad_config_exit_2(self, bad_config, capsys):
        assert main(["validate", bad_config]) == 2
        captured = capsys.readouterr()
        assert "VIOLATION" in captured.out
        record = json.loads(captured.err.splitlines()[0])
        assert record["error"] == "validation"

    def test_unknown_key_exit_2(self, tmp_path, capsys):
        payload = spec_to_dict(make_m1())
        payload["bogus"] = 1
        path = tmp_path / "unknown.json"
        path.write_text(json.dumps(payload))
        assert main(["validate", str(path)]) == 2
        record = json.loads(capsys.readouterr().err.splitlines()[0])
        assert record["error"] == "config"

    def test_missing_file_exit_2(self, tmp_path):
        assert main(["validate", str(tmp_path / "nope.json")]) == 2


class TestUsageErrors:
    def test_no_command(self, capsys):
        assert main([]) == 1
        record = json.loads(capsys.readouterr().err.splitlines()[0])
        assert record["error"] == "usage"

    def test_unknown_rule(self, m2_config, tmp_path):
        code = main(
            [
                "evaluate", "--config", m2_config, "--rules", "wat",
                "--n", "10", "--horizon", "4", "--seed", "1",
                "--out", str(tmp_path / "r.csv"),
            ]
        )
        assert code == 1

    def test_missing_required_flag(self, m2_config):
        assert main(["simulate", "--config", m2_config, "--n", "5"]) == 1


class TestSimulateCommand:
    def test_deterministic_bytes(self, m2_config, tmp_path):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["simulate", "--config", m2_config, "--n", "50", "--horizon", "6"]
        assert main(args + ["--seed", "9", "--out", str(out1)]) == 0
        assert main(args + ["--seed", "9", "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        header = out1.read_text().splitlines()[0]
        assert header.startswith("trajectory,seed,theta,beta1,beta2,x0")

    def test_different_seed_differs(self, m2_config, tmp_path):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["simulate", "--config", m2_config, "--n", "50", "--horizon", "6"]
        main(args + ["--seed", "1", "--out", str(out1)])
        main(args + ["--seed", "2", "--out", str(out2)])
        assert out1.read_bytes() != out2.read_bytes()


class TestEvaluateCommand:
    def test_deterministic_bytes(self, m2_config, tmp_path):
        args = [
            "evaluate", "--config", m2_config, "--rules", "fixed,threshold",
            "--n", "200", "--horizon", "6",
        ]
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(args + ["--seed", "4", "--out", str(out1)]) == 0
        assert main(args + ["--seed", "4", "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_optimal_rule_and_json(self, m2_config, tmp_path, capsys):
        out = tmp_path / "r.csv"
        js = tmp_path / "r.json"
        code = main(
            [
                "evaluate", "--config", m2_config, "--rules", "optimal,fixed",
                "--n", "100", "--horizon", "6", "--seed", "3",
                "--out", str(out), "--json-out", str(js), "--kmax", "6",
            ]
        )
        assert code == 0
        assert out.exists() and js.exists()
        payload = json.loads(js.read_text())
        assert set(payload["rules"]) == {"optimal", "fixed"}

    def test_out_dir_override(self, m2_config, tmp_path, monkeypatch):
        monkeypatch.setenv("DISORDER_OUT_DIR", str(tmp_path / "outputs"))
        code = main(
            [
                "evaluate", "--config", m2_config, "--rules", "fixed",
                "--n", "20", "--horizon", "4", "--seed", "1", "--out", "rep.csv",
            ]
        )
        assert code == 0
        assert (tmp_path / "outputs" / "rep.csv").exists()


class TestValueIterateCommand:
    def test_probe_output(self, m2_config, tmp_path, capsys):
        out = tmp_path / "probes.csv"
        code = main(
            [
                "value-iterate", "--config", m2_config, "--kmax", "6",
                "--tol", "1e-6", "--probe", "3", "--seed", "5", "--out", str(out),
            ]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "probe,k,s_k"
        assert len(lines) > 3
        assert "probe 0" in capsys.readouterr().out


class TestOracleCommand:
    def test_summary_and_dump(self, m2_config, tmp_path, capsys):
        dump = tmp_path / "dump"
        code = main(
            ["oracle", "--config", m2_config, "--horizon", "5", "--dump", str(dump)]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "optimal value" in out
        assert (dump / "value_tree.csv").exists()
        assert (dump / "joint_level_5.csv").exists()


class TestCrosscheckCommand:
    def test_all_identities_pass(self, tmp_path, capsys):
        path = tmp_path / "m3.json"
        save_spec(make_m3(d=1), path)
        code = main(["crosscheck", "--config", str(path), "--horizon", "5"])
        assert code == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out
        for name in (
            "path_unity",
            "joint_consistency",
            "filter_vs_oracle",
            "survival_projection",
            "lagged_change",
            "payoff_criterion",
            "multistep_composition",
            "backshift_inversion",
            "continuation_normalization",
            "predictive_chain",
        ):
            assert f"PASS {name}" in out

    def test_deterministic_stdout(self, m2_config, capsys):
        assert main(["crosscheck", "--config", m2_config, "--horizon", "4"]) == 0
        first = capsys.readouterr().out
        assert main(["crosscheck", "--config", m2_config, "--horizon", "4"]) == 0
        second = capsys.readouterr().out
        assert first == second
