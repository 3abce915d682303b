"""Tests for the command line interface."""

import numpy as np
import pytest

from wrtlab import cli
from wrtlab.spine import IdentityReport
from wrtlab.trees import Tree


def _run(argv, capsys):
    status = cli.run(argv)
    out, err = capsys.readouterr()
    return status, out, err


def _kv(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line and not line.startswith("#"))


class TestTheta:
    def test_unit_gamma(self, capsys):
        status, out, _ = _run(["theta", "--gamma", "1"], capsys)
        assert status == 0
        assert "theta=1.000000000000" in out.splitlines()

    def test_out_file(self, tmp_path, capsys):
        path = tmp_path / "theta.txt"
        status, out, _ = _run(["theta", "--gamma", "0.5", "--out", str(path)], capsys)
        assert status == 0 and out == ""
        assert float(_kv(path.read_text())["theta"]) == pytest.approx(1.278464542761, abs=1e-12)


class TestUsage:
    @pytest.mark.parametrize("argv", [
        ["theta", "--gamma", "1", "--bogus"],
        ["theta"],
        ["nosuch"],
        [],
        ["verify", "--identity", "many-to-one", "--n", "50"],
        ["theta", "--gamma", "-1"],
        ["grow", "--n", "5", "--threads", "0"],
        ["rw", "barrier", "--lam", "1.5", "--replicas", "10"],
    ])
    def test_exit_two(self, argv, capsys):
        status, _, err = _run(argv, capsys)
        assert status == 2
        assert err

    def test_reports_offending_flag(self, capsys):
        _, _, err = _run(["theta", "--gamma", "1", "--bogus"], capsys)
        assert "--bogus" in err

    def test_no_abbreviations(self, capsys):
        status, _, _ = _run(["theta", "--gam", "1"], capsys)
        assert status == 2

    def test_main_exits(self):
        with pytest.raises(SystemExit) as info:
            cli.main(["theta", "--gamma", "1", "--bogus"])
        assert info.value.code == 2


class TestVerify:
    @pytest.mark.parametrize("identity, n", [("many-to-one", 5), ("many-to-two", 4),
                                             ("two-point", 4), ("one-point", 4)])
    def test_passes(self, identity, n, capsys):
        status, out, _ = _run(["verify", "--identity", identity, "--n", str(n)], capsys)
        kv = _kv(out)
        assert status == 0
        assert float(kv["max_discrepancy"]) <= 1e-10
        assert kv["status"] == "pass"

    def test_mismatch_gives_one(self, monkeypatch, capsys):
        monkeypatch.setattr(cli.tilt, "many_to_one_check",
                            lambda seq, theta, n, F: IdentityReport(1.0, 1.1))
        status, out, _ = _run(["verify", "--identity", "many-to-one", "--n", "3"], capsys)
        assert status == 1
        assert _kv(out)["status"] == "fail"


class TestSeeds:
    def test_seed_determines_output(self, capsys):
        _, a, _ = _run(["grow", "--n", "100", "--seed", "4"], capsys)
        _, b, _ = _run(["grow", "--n", "100", "--seed", "4"], capsys)
        _, c, _ = _run(["grow", "--n", "100", "--seed", "5"], capsys)
        assert a == b != c
        assert Tree.from_text(a).n == 100

    def test_environment_default_and_flag_override(self, monkeypatch, capsys):
        _, flag7, _ = _run(["grow", "--n", "60", "--seed", "7"], capsys)
        _, flag8, _ = _run(["grow", "--n", "60", "--seed", "8"], capsys)
        monkeypatch.setenv(cli.SEED_ENV, "7")
        _, env, _ = _run(["grow", "--n", "60"], capsys)
        _, both, _ = _run(["grow", "--n", "60", "--seed", "8"], capsys)
        assert env == flag7
        assert both == flag8

    def test_bad_environment_seed(self, monkeypatch, capsys):
        monkeypatch.setenv(cli.SEED_ENV, "abc")
        status, _, _ = _run(["grow", "--n", "5"], capsys)
        assert status == 2


class TestSubcommands:
    def test_grow_models(self, capsys):
        for argv in (["grow", "--n", "300", "--model", "pat", "--stats"],
                     ["grow", "--n", "300", "--weights", "polynomial", "--exponent", "1", "--stats"],
                     ["grow", "--n", "300", "--weights", "iid", "--stats"]):
            status, out, _ = _run(argv, capsys)
            kv = _kv(out)
            assert status == 0
            assert int(kv["height"]) <= int(kv["diameter"]) <= 2 * int(kv["height"])

    def test_grow_weights_file(self, tmp_path, capsys):
        path = tmp_path / "w.txt"
        path.write_text("\n".join(["1"] * 10))
        status, out, _ = _run(["grow", "--n", "10", "--weights", "file", "--weights-file", str(path)], capsys)
        assert status == 0 and Tree.from_text(out).n == 10
        status, _, _ = _run(["grow", "--n", "11", "--weights", "file", "--weights-file", str(path)], capsys)
        assert status == 2

    def test_renewal(self, capsys):
        status, out, _ = _run(["rw", "renewal", "--x-max", "3"], capsys)
        lines = out.splitlines()
        assert status == 0
        assert lines[1] == "x,R,stderr"
        assert lines[2].startswith("0,1.0,")

    def test_couple(self, capsys):
        status, out, _ = _run(["rw", "couple", "--blocks", "5", "--replicas", "2000"], capsys)
        kv = _kv(out)
        assert status == 0
        assert float(kv["disagreement"]) <= float(kv["bound"])

    def test_barrier(self, capsys):
        status, out, _ = _run(["rw", "barrier", "--n", "40", "--block-size", "50", "--K", "3",
                               "--a", "1", "--replicas", "200000", "--band", "0", "100"], capsys)
        kv = _kv(out)
        assert status == 0
        assert float(kv["ci_low"]) <= float(kv["probability"]) <= float(kv["ci_high"])

    def test_barrier_band_failure(self, capsys):
        status, out, _ = _run(["rw", "barrier", "--n", "40", "--block-size", "50",
                               "--replicas", "1000", "--band", "50", "60"], capsys)
        assert status == 1 and _kv(out)["status"] == "fail"

    def test_experiment_config_and_overrides(self, tmp_path, capsys):
        cfg = tmp_path / "c.txt"
        cfg.write_text("experiment = height\nn_grid = 64,128\nreplicas = 20\nseed = 1\n")
        argv = ["experiment", "--config", str(cfg), "--threads", "1"]
        s1, a, _ = _run(argv, capsys)
        s2, b, _ = _run(argv, capsys)
        _, c, _ = _run(argv + ["--seed", "2"], capsys)
        assert s1 == s2 == 0
        assert a == b != c
        assert a.splitlines()[0] == "experiment,n,replica_count,stat_name,value,ci_low,ci_high"
        _, d, _ = _run(argv + ["--replicas", "5"], capsys)
        assert ",5,height_mean," in d

    def test_experiment_missing_config(self, capsys):
        status, _, _ = _run(["experiment", "--config", "/nonexistent/cfg"], capsys)
        assert status == 2

    def test_check_assumptions(self, capsys):
        status, out, _ = _run(["check-assumptions", "--n-max", "2000"], capsys)
        assert status == 0
        assert "# H1=pass" in out and "# H2=pass" in out
        assert "n,W_n,residual,n_times_tail" in out
