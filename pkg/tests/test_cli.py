"""cli-io: subcommands, exit codes, determinism, config strictness."""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from orbitplan.config import ConfigError, RunConfig

from conftest import TOY_CONFIG


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "orbitplan.cli", *args],
                          capture_output=True, text=True)


def output_bytes(out_dir):
    """Bytes of every artifact except the manifest (whose timings vary)."""
    out = {}
    for p in sorted(Path(out_dir).iterdir()):
        if p.name != "manifest.json":
            out[p.name] = p.read_bytes()
    return out


@pytest.fixture(scope="module")
def toy_solve_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("solve")
    res = run_cli("solve", "--config", str(TOY_CONFIG), "--out", str(out))
    assert res.returncode == 0, res.stderr
    return out


class TestBuild:
    def test_toy_reports_17_states(self, tmp_path):
        res = run_cli("build", "--config", str(TOY_CONFIG),
                      "--out", str(tmp_path))
        assert res.returncode == 0, res.stderr
        assert "states 17" in res.stdout
        assert (tmp_path / "model.mdp").exists()
        assert (tmp_path / "stats.txt").exists()
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["command"] == "build"
        assert "build" in manifest["timings_seconds"]

    def test_rebuild_identical_model_file(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            res = run_cli("build", "--config", str(TOY_CONFIG),
                          "--out", str(out))
            assert res.returncode == 0, res.stderr
        assert (a / "model.mdp").read_bytes() == (b / "model.mdp").read_bytes()


class TestSolve:
    def test_artifacts(self, toy_solve_dir):
        assert (toy_solve_dir / "policy.npz").exists()
        traj = (toy_solve_dir / "trajectory.csv").read_text().splitlines()
        assert traj[0] == "step,date,alt_km,fuel_kg,action,raise_km,deorbited"
        first = traj[1].split(",")
        assert first[0] == "0"
        assert first[1].startswith("2018-05-22")
        values = (toy_solve_dir / "values.txt").read_text()
        assert values.startswith("value_at_initial ")

    def test_trajectory_fuel_monotone(self, toy_solve_dir):
        rows = (toy_solve_dir / "trajectory.csv").read_text().splitlines()[1:]
        fuel = [float(r.split(",")[3]) for r in rows]
        assert all(b <= a for a, b in zip(fuel, fuel[1:]))


class TestVerify:
    def test_report_and_exit_code(self, tmp_path):
        res = run_cli("verify", "--config", str(TOY_CONFIG),
                      "--out", str(tmp_path))
        assert res.returncode == 0, res.stderr
        report = dict(line.split(" ", 1) for line in
                      (tmp_path / "report.txt").read_text().splitlines())
        assert report["feasible"] == "1"
        assert float(report["safety_value_at_initial"]) >= 0.95
        dist = (tmp_path / "final_distribution.csv").read_text().splitlines()
        assert dist[0] == "alt_km,pmf,cdf"
        curve = (tmp_path / "violation_curve.csv").read_text().splitlines()
        assert curve[0] == "step,pr_violated_by_step"

    def test_infeasible_exit_code_3(self, tmp_path):
        # an impossible chance constraint: delta = 0 with a floor above most
        # of the band makes the verifier report infeasibility
        cfg = yaml.safe_load(TOY_CONFIG.read_text())
        cfg["safety"]["floor_km"] = 560.0
        cfg["safety"]["delta"] = 0.0
        path = tmp_path / "strict.yaml"
        path.write_text(yaml.safe_dump(cfg))
        res = run_cli("verify", "--config", str(path), "--out",
                      str(tmp_path / "out"))
        assert res.returncode == 3, (res.stdout, res.stderr)
        assert "INFEASIBLE" in res.stdout


class TestSimulateAndReplan:
    def test_simulate_deterministic_given_seed(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            res = run_cli("simulate", "--config", str(TOY_CONFIG), "--out",
                          str(out), "--seed", "13", "--rollouts", "400")
            assert res.returncode == 0, res.stderr
        assert output_bytes(a) == output_bytes(b)

    def test_manifest_records_seed(self, tmp_path):
        run_cli("simulate", "--config", str(TOY_CONFIG), "--out",
                str(tmp_path), "--seed", "13", "--rollouts", "400")
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["seed"] == 13
        assert manifest["rollouts"] == 400

    def test_replan_report(self, tmp_path):
        res = run_cli("replan", "--config", str(TOY_CONFIG), "--out",
                      str(tmp_path), "--from-state", "430,75,1,2018-10-22",
                      "--rollouts", "200")
        assert res.returncode == 0, res.stderr
        report = (tmp_path / "replan_report.txt").read_text()
        assert "from_step 5" in report
        assert (tmp_path / "replan_envelopes.csv").exists()

    def test_replan_bad_state_exit_2(self, tmp_path):
        res = run_cli("replan", "--config", str(TOY_CONFIG), "--out",
                      str(tmp_path), "--from-state", "430,75,nonsense")
        assert res.returncode == 2
        res = run_cli("replan", "--config", str(TOY_CONFIG), "--out",
                      str(tmp_path), "--from-state", "430,75,1,2031-01-01")
        assert res.returncode == 2


class TestResonancesCommand:
    def test_table_written(self, tmp_path):
        res = run_cli("resonances", "--config", str(TOY_CONFIG),
                      "--out", str(tmp_path))
        assert res.returncode == 0, res.stderr
        lines = (tmp_path / "resonances.tsv").read_text().splitlines()
        assert lines[0] == "altitude_km\tD\tN\tres"
        assert len(lines) > 1


class TestConfigStrictness:
    def test_unknown_key_exit_2(self, tmp_path):
        cfg = yaml.safe_load(TOY_CONFIG.read_text())
        cfg["grids"]["altittude_bins"] = 4  # typo
        path = tmp_path / "typo.yaml"
        path.write_text(yaml.safe_dump(cfg))
        res = run_cli("build", "--config", str(path), "--out",
                      str(tmp_path / "out"))
        assert res.returncode == 2
        assert "altittude_bins" in res.stderr

    def test_missing_key_exit_2(self, tmp_path):
        cfg = yaml.safe_load(TOY_CONFIG.read_text())
        del cfg["safety"]["delta"]
        path = tmp_path / "missing.yaml"
        path.write_text(yaml.safe_dump(cfg))
        res = run_cli("build", "--config", str(path), "--out",
                      str(tmp_path / "out"))
        assert res.returncode == 2
        assert "delta" in res.stderr

    def test_missing_file_exit_2(self, tmp_path):
        res = run_cli("build", "--config", str(tmp_path / "nope.yaml"),
                      "--out", str(tmp_path / "out"))
        assert res.returncode == 2

    def test_wrong_type_rejected(self, tmp_path):
        cfg = yaml.safe_load(TOY_CONFIG.read_text())
        cfg["grids"]["altitude_bins"] = "four"
        path = tmp_path / "typed.yaml"
        path.write_text(yaml.safe_dump(cfg))
        res = run_cli("build", "--config", str(path), "--out",
                      str(tmp_path / "out"))
        assert res.returncode == 2

    def test_config_hash_covers_referenced_files(self, tmp_path):
        cfg_path = tmp_path / "toy.yaml"
        shutil.copy(TOY_CONFIG, cfg_path)
        cfg = yaml.safe_load(cfg_path.read_text())
        flux = tmp_path / "flux_low.csv"
        import importlib.resources as res_mod
        src = res_mod.files("orbitplan").joinpath("data", "flux_low.csv")
        flux.write_bytes(src.read_bytes())
        cfg["flux"]["low"] = str(flux)
        cfg_path.write_text(yaml.safe_dump(cfg))
        h1 = RunConfig.load(cfg_path).config_hash
        flux.write_bytes(flux.read_bytes() + b"# tweak\n")
        h2 = RunConfig.load(cfg_path).config_hash
        assert h1 != h2

    def test_bad_mode_rejected(self, toy_config):
        with pytest.raises(ConfigError):
            toy_config.build_context("fuzzy")


class TestDeterminismAcrossCommands:
    @pytest.mark.parametrize("args", [
        ("build",),
        ("solve",),
        ("verify",),
        ("resonances",),
    ])
    def test_rerun_byte_identical(self, tmp_path, args):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            res = run_cli(*args, "--config", str(TOY_CONFIG), "--out", str(out))
            assert res.returncode == 0, res.stderr
        assert output_bytes(a) == output_bytes(b)
