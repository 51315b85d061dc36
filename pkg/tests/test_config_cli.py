import os

import numpy as np
import pytest

from steerlab import cli
from steerlab.config import (build_setup, build_track, ddpg_params,
                             longitudinal_control, mpc_settings, parse_config,
                             pid_gains, train_config, vehicle_params)
from steerlab.errors import ConfigError
from steerlab.track import load_track

EXAMPLE = """
# experiment config
[vehicle]
mass = 1600.0
max_steer = 0.5

[mpc]
horizon = 12
v_nominal = 10.0

[pid]
kp = 0.2
c_mpc = 0.7
c_pid = 0.3

[longitudinal]
mode = "constant"
constant_throttle = 0.5

[ddpg]
critic_lr = 0.002
optimizer = "momentum"

[train]
total_steps = 1000
reward_mode = "demo_fixed"
noise_sigma_final = 0.05

[track]
kind = "circle"
radius = 40.0
"""


class TestParseConfig:
    def test_full_document(self):
        cfg = parse_config(EXAMPLE)
        assert cfg["vehicle"]["mass"] == 1600.0
        assert cfg["mpc"]["horizon"] == 12
        assert cfg["longitudinal"]["mode"] == "constant"
        assert cfg["train"]["reward_mode"] == "demo_fixed"

    def test_values_typed(self):
        cfg = parse_config("[train]\ntotal_steps = 50\np_action_decay = false\n"
                           "noise_sigma_final = none\n")
        assert cfg["train"]["total_steps"] == 50
        assert cfg["train"]["p_action_decay"] is False
        assert cfg["train"]["noise_sigma_final"] is None

    def test_lists_parsed(self):
        cfg = parse_config("[track]\nradius = 50.0\n")
        assert cfg["track"]["radius"] == 50.0
        cfg = parse_config('[track]\nfile = "t.csv"\n')
        assert cfg["track"]["file"] == "t.csv"

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config("[rocket]\nthrust = 1\n")

    def test_key_outside_section_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("mass = 1500\n")

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            vehicle_params({"vehicle": {"wings": 2}})


class TestBuilders:
    def test_vehicle_overrides(self):
        p = vehicle_params(parse_config(EXAMPLE))
        assert p.mass == 1600.0
        assert p.max_steer == 0.5
        assert p.drive_gain == 6.0   # default preserved

    def test_mpc_settings(self):
        cfg = parse_config(EXAMPLE)
        plant = vehicle_params(cfg)
        mpc, model, v_nom = mpc_settings(cfg, plant)
        assert mpc.horizon == 12
        assert v_nom == 10.0
        assert mpc.steer_scale == plant.max_steer
        assert model.mass == pytest.approx(1600.0 * 1.10)

    def test_pid_and_blend(self):
        gains, weights = pid_gains(parse_config(EXAMPLE))
        assert gains.kp == 0.2
        assert weights.c_mpc == 0.7

    def test_ddpg_params(self):
        p = ddpg_params(parse_config(EXAMPLE))
        assert p.critic_lr == 0.002
        assert p.optimizer == "momentum"

    def test_train_config(self):
        cfg = train_config(parse_config(EXAMPLE))
        assert cfg.total_steps == 1000
        assert cfg.reward_mode == "demo_fixed"
        assert cfg.noise_sigma_final == 0.05

    def test_track_builders(self, tmp_path):
        track = build_track(parse_config(EXAMPLE))
        assert abs(track.length - 2 * np.pi * 40.0) < 1.0
        noisy = build_track(parse_config(
            "[track]\nradius = 40.0\nperturb_offset = 0.1\nperturb_seed = 3\n"))
        assert not np.array_equal(noisy.waypoints, track.waypoints)

    def test_build_setup_end_to_end(self):
        setup = build_setup(parse_config(EXAMPLE))
        assert setup.cfg.total_steps == 1000
        assert setup.longitudinal.constant_throttle == 0.5
        assert setup.demo.model.v_nominal == 10.0

    def test_external_profile_file(self, tmp_path):
        profile_path = tmp_path / "p.csv"
        profile_path.write_text("t,v\n0.0,0.0\n10.0,8.0\n20.0,8.0\n")
        lon = longitudinal_control(parse_config(
            f'[longitudinal]\nmode = "profile"\nprofile_file = "{profile_path}"\n'))
        assert lon.profile.speed_at(5.0) == pytest.approx(4.0)


class TestCli:
    def test_gen_track_writes_valid_csv(self, tmp_path):
        out = tmp_path / "t.csv"
        code = cli.main(["gen-track", "--circle", "50", "--spacing", "1",
                         "--out", str(out)])
        assert code == 0
        track = load_track(out)
        assert track.n_waypoints == 314

    def test_unknown_flag_usage_error(self, capsys):
        code = cli.main(["gen-track", "--bogus"])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_missing_subcommand_usage_error(self):
        assert cli.main([]) == 1

    def test_eval_missing_checkpoint_exit_2(self, tmp_path, capsys):
        missing = tmp_path / "nope.txt"
        code = cli.main(["--out", str(tmp_path), "eval",
                         "--checkpoint", str(missing)])
        assert code == 2
        assert str(missing) in capsys.readouterr().err

    def test_train_determinism_byte_identical(self, tmp_path):
        cfg_path = tmp_path / "c.toml"
        cfg_path.write_text(
            "[train]\ntotal_steps = 200\nwarmup_steps = 50\n"
            "[mpc]\nqp_max_iters = 40\nqp_tol = 1e-6\n")
        code = cli.main(["--config", str(cfg_path), "--seed", "7",
                         "--out", str(tmp_path / "a"), "train"])
        assert code == 0
        code = cli.main(["--config", str(cfg_path), "--seed", "7",
                         "--out", str(tmp_path / "b"), "train"])
        assert code == 0
        with open(tmp_path / "a" / "metrics.csv", "rb") as fh:
            blob_a = fh.read()
        with open(tmp_path / "b" / "metrics.csv", "rb") as fh:
            blob_b = fh.read()
        assert blob_a == blob_b

    def test_tune_mpc_runs(self, tmp_path, capsys):
        cfg_path = tmp_path / "c.toml"
        cfg_path.write_text(
            "[longitudinal]\nmode = \"speed\"\ntarget_speed = 12.0\n"
            "[mpc]\nqp_max_iters = 60\nqp_tol = 1e-6\n")
        code = cli.main(["--config", str(cfg_path), "--out", str(tmp_path),
                         "tune-mpc"])
        assert code == 0
        out = capsys.readouterr().out
        assert "completed=True" in out
        assert os.path.exists(tmp_path / "mpc_pid_trace.csv")

    def test_eval_and_sweep_with_trained_checkpoint(self, tmp_path, capsys):
        cfg_path = tmp_path / "c.toml"
        cfg_path.write_text(
            "[train]\ntotal_steps = 300\nwarmup_steps = 50\n"
            "[mpc]\nqp_max_iters = 40\nqp_tol = 1e-6\n")
        assert cli.main(["--config", str(cfg_path), "--out", str(tmp_path),
                         "train"]) == 0
        ckpt = str(tmp_path / "checkpoint.txt")
        assert cli.main(["--config", str(cfg_path), "--out", str(tmp_path),
                         "eval", "--checkpoint", ckpt]) == 0
        assert os.path.exists(tmp_path / "policy_trace.csv")
        assert cli.main(["--config", str(cfg_path), "--out", str(tmp_path),
                         "sweep", "--checkpoint", ckpt, "--axis", "noise",
                         "--values", "0.0", "0.1"]) == 0
        assert os.path.exists(tmp_path / "sweep_noise.csv")
