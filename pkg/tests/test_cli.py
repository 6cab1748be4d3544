import json

import pytest

from conftest import CONFIG_DIR, small_config
from nozzleflow.cli import main

SMALL = {"n = 2000": "n = 300", "T = 5.0": "T = 1.0"}


class TestConstants:
    def test_log_branch_values(self, capsys):
        assert main(["constants", "5/3"]) == 0
        out = capsys.readouterr().out
        assert "l=7.46410161" in out
        assert "sigma1=1.19615242" in out
        assert "sigma2=1.73205080" in out

    def test_json_format(self, capsys):
        assert main(["--format", "json", "constants", "1.4"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["l"] == pytest.approx(10.47213595499958, rel=1e-10)

    def test_bad_gamma_is_usage_error(self, capsys):
        assert main(["constants", "2.5"]) == 64


class TestCheck:
    def test_desk_config_passes(self, capsys):
        assert main(["check", str(CONFIG_DIR / "p1_desk.cfg")]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") >= 5
        assert "FAIL" not in out

    def test_bad_data_fails(self, tmp_path, capsys):
        cfg = small_config("p1_desk", tmp_path, dict(SMALL, **{
            "z0 = -0.5 + 0.012*(1 - 1/(1 + 10*x))": "z0 = -0.3"}))
        assert main(["check", str(cfg)]) == 2
        assert "FAIL" in capsys.readouterr().out

    def test_missing_file(self, capsys):
        assert main(["check", "no_such_file.cfg"]) == 66

    def test_malformed_config(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[problem]\nkindd = P1\n")
        assert main(["check", str(bad)]) == 65
        assert "bad.cfg:2" in capsys.readouterr().err


class TestFeasible:
    def test_feasible_point(self, capsys):
        assert main(["feasible", "5/3", "0.005", "m"]) == 0
        assert "FEASIBLE" in capsys.readouterr().out

    def test_infeasible_report(self, capsys):
        assert main(["feasible", "5/3", "0.12", "m"]) == 0
        assert "INFEASIBLE" in capsys.readouterr().out


@pytest.fixture(scope="module")
def sim_out(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("sim")
    cfg = small_config("p1_desk", tmp, SMALL)
    out = tmp / "artifacts"
    assert main(["--quiet", "--out", str(out), "simulate", str(cfg)]) == 0
    return out


class TestSimulateTraceVerify:
    def test_simulate_artifacts(self, sim_out):
        assert (sim_out / "report.json").exists()
        assert (sim_out / "fields.csv").exists()

    def test_trace_writes_path_csv(self, sim_out, tmp_path, capsys):
        traj = sim_out / "trajectory.npz"
        code = main(["--out", str(tmp_path), "trace", str(traj),
                     "--family", "1", "--x0", "0.7"])
        assert code == 0
        files = list(tmp_path.glob("path_f1_*.csv"))
        assert len(files) == 1
        header = files[0].read_text().splitlines()[0]
        assert header.startswith("t,x,z,w,value,A,B,C,margin_lower")

    def test_verify_reports_ok(self, sim_out, tmp_path, capsys):
        traj = sim_out / "trajectory.npz"
        code = main(["--out", str(tmp_path), "verify", str(traj)])
        assert code == 0
        payload = json.loads((tmp_path / "verify_report.json").read_text())
        assert payload["ok"]
        assert payload["conservative_residual"] is not None

    def test_simulate_missing_input(self):
        assert main(["simulate", "missing.cfg"]) == 66

    def test_simulate_sweep_directory(self, tmp_path, capsys):
        sweep = tmp_path / "sweep"
        sweep.mkdir()
        small_config("p1_desk", sweep, SMALL, filename="a.cfg")
        small_config("p1_desk", sweep, SMALL, filename="b.cfg")
        out = tmp_path / "sweep_out"
        assert main(["--out", str(out), "simulate", str(sweep)]) == 0
        assert (out / "a" / "report.json").exists()
        assert (out / "b" / "report.json").exists()
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines == ["a.cfg: exit 0", "b.cfg: exit 0"]


class TestUsage:
    def test_unknown_subcommand(self, capsys):
        assert main(["frobnicate"]) == 64

    def test_unknown_flag(self, capsys):
        assert main(["constants", "5/3", "--nope"]) == 64

    def test_missing_required_argument(self, capsys):
        assert main(["trace", "x.npz", "--family", "1"]) == 64
