"""Sectioned key-value config files and builders for every component.

The format is a plain text document with ``[section]`` headers and
``key = value`` lines (a strict subset of TOML): numbers, true/false, quoted
strings, and flat ``[a, b, c]`` lists. Unknown keys are rejected so typos
fail loudly.
"""

from __future__ import annotations

import numpy as np

from .ddpg import DdpgParams
from .errors import ConfigError
from .longitudinal import LongitudinalControl, LongitudinalGains
from .mpc_pid import BlendWeights, MpcConfig, MpcPidController, PidGains
from .track import Track, generate_circle, load_track
from .training import TrainConfig, TrainSetup
from .vehicle import VehicleParams, mismatched_params

SECTIONS = ("vehicle", "mpc", "pid", "longitudinal", "ddpg", "train", "track")


def _parse_value(text: str):
    text = text.strip()
    if not text:
        raise ConfigError("empty value")
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    if text.lower() in ("none", "null"):
        return None
    if (text[0] == text[-1] == '"') or (text[0] == text[-1] == "'"):
        return text[1:-1]
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        if not inner:
            return []
        return [_parse_value(item) for item in inner.split(",")]
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"cannot parse value: {text!r}") from exc


def parse_config(text: str) -> dict[str, dict]:
    sections: dict[str, dict] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{name}]")
            current = sections.setdefault(name, {})
            continue
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any section")
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        current[key.strip()] = _parse_value(value)
    return sections


def load_config(path) -> dict[str, dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _take(section: dict, defaults: dict, where: str) -> dict:
    out = dict(defaults)
    for key, value in section.items():
        if key not in defaults:
            raise ConfigError(f"unknown key {key!r} in [{where}]")
        out[key] = value
    return out


def vehicle_params(cfg: dict) -> VehicleParams:
    defaults = {f: getattr(VehicleParams, f) for f in (
        "mass", "yaw_inertia", "dist_front_axle", "dist_rear_axle",
        "cornering_stiffness_front", "cornering_stiffness_rear", "max_steer",
        "drive_gain", "drag_coeff", "roll_resist", "brake_decel")}
    return VehicleParams(**_take(cfg.get("vehicle", {}), defaults, "vehicle"))


def mpc_settings(cfg: dict, plant: VehicleParams):
    section = dict(cfg.get("mpc", {}))
    defaults = {
        "horizon": 20, "dt": 0.05, "q_long": 0.5, "q_lat": 5.0,
        "terminal_factor": 4.0, "r_input": 1.0, "qp_max_iters": 500,
        "qp_tol": 1e-8, "v_nominal": 12.0, "model_mass_factor": 1.10,
        "model_stiffness_factor": 0.85,
    }
    vals = _take(section, defaults, "mpc")
    q = np.diag([vals["q_long"], vals["q_lat"]])
    mpc = MpcConfig(horizon=int(vals["horizon"]), dt=vals["dt"], Q=q,
                    P_term=vals["terminal_factor"] * q, r_input=vals["r_input"],
                    qp_max_iters=int(vals["qp_max_iters"]), qp_tol=vals["qp_tol"],
                    steer_scale=plant.max_steer)
    model = mismatched_params(plant, vals["model_mass_factor"],
                              vals["model_stiffness_factor"])
    return mpc, model, vals["v_nominal"]


def pid_gains(cfg: dict) -> PidGains:
    defaults = {"kp": 0.15, "ki": 0.01, "kd": 0.3, "integral_limit": 5.0,
                "c_mpc": 0.8, "c_pid": 0.2}
    vals = _take(cfg.get("pid", {}), defaults, "pid")
    gains = PidGains(kp=vals["kp"], ki=vals["ki"], kd=vals["kd"],
                     integral_limit=vals["integral_limit"])
    return gains, BlendWeights(c_mpc=vals["c_mpc"], c_pid=vals["c_pid"])


def longitudinal_control(cfg: dict) -> LongitudinalControl:
    defaults = {"mode": "constant", "constant_throttle": 0.4,
                "target_speed": 12.0, "kp": 0.5, "ki": 0.05, "kd": 0.0,
                "integral_limit": 10.0, "profile_file": ""}
    vals = _take(cfg.get("longitudinal", {}), defaults, "longitudinal")
    gains = LongitudinalGains(kp=vals["kp"], ki=vals["ki"], kd=vals["kd"],
                              integral_limit=vals["integral_limit"])
    profile = None
    if vals["mode"] == "profile" and vals["profile_file"]:
        from .longitudinal import load_profile_csv
        profile = load_profile_csv(vals["profile_file"])
    return LongitudinalControl(mode=vals["mode"],
                               constant_throttle=vals["constant_throttle"],
                               target_speed=vals["target_speed"],
                               profile=profile, gains=gains)


def ddpg_params(cfg: dict) -> DdpgParams:
    defaults = {"gamma": 0.99, "rho": 0.995, "batch_size": 64,
                "actor_lr": 1e-4, "critic_lr": 1e-3, "hidden1": 64, "hidden2": 64,
                "buffer_capacity": 100_000, "optimizer": "adam"}
    vals = _take(cfg.get("ddpg", {}), defaults, "ddpg")
    return DdpgParams(gamma=vals["gamma"], rho=vals["rho"],
                      batch_size=int(vals["batch_size"]),
                      actor_lr=vals["actor_lr"], critic_lr=vals["critic_lr"],
                      hidden=(int(vals["hidden1"]), int(vals["hidden2"])),
                      buffer_capacity=int(vals["buffer_capacity"]),
                      optimizer=vals["optimizer"])


def train_config(cfg: dict) -> TrainConfig:
    defaults = {
        "reward_mode": "demo_adaptive", "action_mode": "steering",
        "heading_error_mode": "velocity", "total_steps": 150_000,
        "episode_cap_steps": 2000, "corridor_limit": 1.5, "dt": 0.05,
        "n_waypoints": 10, "p_action": 0.3, "p_action_decay": True,
        "c_track": 1.0, "c_penalty": 1.0, "warmup_steps": 1000,
        "lr_cycle_lambda": 0.9, "lr_cycle_len": 32, "noise_kind": "ou",
        "noise_theta": 0.15, "noise_sigma": 0.2, "noise_sigma_final": None,
        "obs_scale_waypoints": 0.1, "obs_scale_speed": 0.05,
    }
    vals = _take(cfg.get("train", {}), defaults, "train")
    vals["total_steps"] = int(vals["total_steps"])
    vals["episode_cap_steps"] = int(vals["episode_cap_steps"])
    vals["n_waypoints"] = int(vals["n_waypoints"])
    vals["warmup_steps"] = int(vals["warmup_steps"])
    vals["lr_cycle_len"] = int(vals["lr_cycle_len"])
    return TrainConfig(**vals)


def build_track(cfg: dict) -> Track:
    defaults = {"kind": "circle", "radius": 50.0, "spacing": 1.0,
                "corridor_half_width": 1.5, "file": "",
                "perturb_offset": 0.0, "perturb_seed": 0}
    vals = _take(cfg.get("track", {}), defaults, "track")
    if vals["file"]:
        track = load_track(vals["file"], corridor_half_width=vals["corridor_half_width"])
    elif vals["kind"] == "circle":
        track = generate_circle(vals["radius"], vals["spacing"],
                                corridor_half_width=vals["corridor_half_width"])
    else:
        raise ConfigError(f"unknown track kind: {vals['kind']!r}")
    if vals["perturb_offset"] > 0.0:
        from .track import perturb_waypoints
        track = perturb_waypoints(track, vals["perturb_offset"],
                                  int(vals["perturb_seed"]))
    return track


def build_demo_controller(cfg: dict, track: Track,
                          plant: VehicleParams) -> MpcPidController:
    mpc, model, v_nominal = mpc_settings(cfg, plant)
    gains, weights = pid_gains(cfg)
    return MpcPidController(track, plant, v_nominal=v_nominal, mpc_config=mpc,
                            pid_gains=gains, blend_weights=weights,
                            model_params=model)


def build_setup(cfg: dict) -> TrainSetup:
    """Assemble a complete training setup from a parsed config document."""
    plant = vehicle_params(cfg)
    track = build_track(cfg)
    return TrainSetup(track=track, plant=plant,
                      demo=build_demo_controller(cfg, track, plant),
                      longitudinal=longitudinal_control(cfg),
                      ddpg=ddpg_params(cfg), cfg=train_config(cfg))
