import json
import math

import numpy as np
import pytest

from hydrolink.cli import main
from hydrolink.config import (
    apply_env_overrides,
    env_config_from_dict,
    hyperparams_from_dict,
    scenario_from_dict,
    spectrum_from_dict,
)


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


SMALL_CFG = {
    "spectrum": {"wind_speed_u10": 12.0, "fetch_xf": 2e4},
    "grid": {"n_omega": 6, "n_theta": 4},
    "env": {"max_steps": 4, "horizontal_offset_frac": 0.1},
}


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(SMALL_CFG))
    return str(path)


class TestConfig:
    def test_env_overrides(self):
        cfg = {"env": {"max_steps": 4}}
        out = apply_env_overrides(
            cfg,
            {
                "HYDROLINK_ENV__MAX_STEPS": "9",
                "HYDROLINK_SPECTRUM__WIND_SPEED_U10": "8.5",
                "HYDROLINK_ENV__EPISODE_SEED_POLICY": '"incrementing"',
                "UNRELATED": "1",
            },
        )
        assert out["env"]["max_steps"] == 9
        assert out["spectrum"]["wind_speed_u10"] == 8.5
        assert out["env"]["episode_seed_policy"] == "incrementing"
        # original dict untouched
        assert cfg["env"]["max_steps"] == 4

    def test_degree_conversion(self):
        scn = scenario_from_dict({"omega_A_deg": 30.0})
        assert scn.omega_A == pytest.approx(math.radians(30.0))
        spec = spectrum_from_dict({"wind_bearing_deg": 90.0})
        assert spec.wind_bearing == pytest.approx(math.pi / 2)

    def test_env_config_assembly(self):
        cfg = env_config_from_dict(SMALL_CFG)
        assert cfg.max_steps == 4
        assert cfg.grid.n_omega == 6
        assert cfg.horizontal_offset_frac == 0.1

    def test_hyperparams_tuple_fields(self):
        hp = hyperparams_from_dict({"actor_layers": [32, 32], "optimizer": "adam"})
        assert hp.actor_layers == (32, 32)
        assert hp.optimizer == "adam"


class TestCliCommands:
    def test_spectrum(self, tmp_path, cfg_file, capsys):
        code, out, _ = run_cli(
            ["spectrum", "--config", cfg_file, "--out", str(tmp_path)], capsys
        )
        assert code == 0
        assert json.loads(out)["rows"] == 24
        lines = (tmp_path / "spectrum.csv").read_text().strip().splitlines()
        assert lines[0] == "omega,theta,density"
        assert len(lines) == 25

    def test_surface(self, tmp_path, cfg_file, capsys):
        code, out, _ = run_cli(
            [
                "surface",
                "--config",
                cfg_file,
                "--out",
                str(tmp_path),
                "--nx",
                "4",
                "--ny",
                "4",
                "--nt",
                "3",
                "--seed",
                "5",
            ],
            capsys,
        )
        assert code == 0
        summary = json.loads(out)
        assert summary["n_components"] == 24
        lines = (tmp_path / "surface.csv").read_text().strip().splitlines()
        assert lines[0] == "x,y,t,z"
        assert len(lines) == 1 + 4 * 4 * 3
        assert (tmp_path / "surface_summary.json").exists()

    def test_gains(self, tmp_path, capsys):
        code, out, _ = run_cli(
            ["gains", "--out", str(tmp_path), "--points", "10"], capsys
        )
        assert code == 0
        lines = (tmp_path / "gains.csv").read_text().strip().splitlines()
        assert lines[0] == "factor,x,value"
        assert len(lines) == 1 + 4 * 10

    def test_trace(self, tmp_path, cfg_file, capsys):
        code, out, _ = run_cli(
            [
                "trace",
                "--config",
                cfg_file,
                "--out",
                str(tmp_path),
                "--seed",
                "2",
                "--dump-grids",
            ],
            capsys,
        )
        assert code == 0
        res = json.loads(out)
        assert abs(np.linalg.norm(res["direction_abs"]) - 1.0) < 1e-9
        assert (tmp_path / "trace_grids.csv").exists()

    def test_rollout(self, tmp_path, cfg_file, capsys):
        code, out, _ = run_cli(
            [
                "rollout",
                "--config",
                cfg_file,
                "--out",
                str(tmp_path),
                "--policy",
                "straight",
            ],
            capsys,
        )
        assert code == 0
        assert json.loads(out)["steps"] == 4
        lines = (tmp_path / "rollout.csv").read_text().strip().splitlines()
        assert lines[0] == "step,t,tx_x,tx_y,tx_z,rx_x,rx_y,rx_z,intensity,reward,done"
        assert len(lines) == 5

    def test_train_evaluate_round_trip(self, tmp_path, cfg_file, capsys):
        code, out, _ = run_cli(
            [
                "train",
                "--config",
                cfg_file,
                "--out",
                str(tmp_path),
                "--episodes",
                "2",
                "--steps",
                "6",
            ],
            capsys,
        )
        assert code == 0
        info = json.loads(out)
        assert info["episodes"] == 2
        assert (tmp_path / "training_log.csv").exists()

        code, out, _ = run_cli(
            [
                "evaluate",
                "--config",
                cfg_file,
                "--out",
                str(tmp_path),
                "--episodes",
                "1",
                "--policies",
                "ub,actor,none",
                "--actor-file",
                str(tmp_path / "agent.bin"),
            ],
            capsys,
        )
        assert code == 0
        rep = json.loads((tmp_path / "report.json").read_text())
        assert rep["schema_version"] == 1
        assert set(rep["avg_gain"]) == {"upper_bound", "ddpg", "no_alignment"}

    def test_sweep(self, tmp_path, cfg_file, capsys):
        code, out, _ = run_cli(
            [
                "sweep",
                "--config",
                cfg_file,
                "--out",
                str(tmp_path),
                "--episodes",
                "1",
                "--offsets",
                "0,0.2",
                "--policies",
                "ub,none",
            ],
            capsys,
        )
        assert code == 0
        lines = (tmp_path / "sweep.csv").read_text().strip().splitlines()
        assert lines[0] == "offset,policy,avg_gain,sigma_diff_sq"
        assert len(lines) == 5

    def test_error_is_machine_readable(self, tmp_path, capsys):
        code, _, err = run_cli(
            ["rollout", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)],
            capsys,
        )
        assert code == 1
        parsed = json.loads(err.strip())
        assert "error" in parsed and "message" in parsed
