"""Command-line surface: track generation, tuning runs, training, evaluation,
sweeps, and runtime comparison.

Exit codes: 0 success, 1 usage error, 2 runtime fault.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import config as cfgmod
from .errors import CheckpointError, ConfigError
from .evaluation import (compare_runtimes, metrics, noise_sweep_episode,
                         run_episode, save_metrics_table, save_trace, sweep,
                         throttle_sweep_episode, SweepRow)
from .track import generate_circle, save_track
from .training import detach_demo, train


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _load_cfg(path: str | None) -> dict:
    if path is None:
        return {}
    return cfgmod.load_config(path)


def _out_path(out_dir: str, name: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


def _cmd_gen_track(args) -> int:
    if args.circle is None:
        print("error: gen-track currently needs --circle RADIUS", file=sys.stderr)
        return 1
    track = generate_circle(args.circle, args.spacing)
    save_track(track, args.out)
    print(f"wrote {track.n_waypoints} waypoints to {args.out}")
    return 0


def _episode_pieces(cfg: dict):
    plant = cfgmod.vehicle_params(cfg)
    track = cfgmod.build_track(cfg)
    lon = cfgmod.longitudinal_control(cfg)
    return plant, track, lon


def _cmd_tune_mpc(args) -> int:
    cfg = _load_cfg(args.config)
    plant, track, lon = _episode_pieces(cfg)
    controller = cfgmod.build_demo_controller(cfg, track, plant)
    log = run_episode(controller, track, lon, plant, controller_id="mpc_pid")
    report = metrics(log)
    save_trace(log, _out_path(args.out, "mpc_pid_trace.csv"))
    print(f"completed={report.completed} ALE={report.ale_m:.4f} m "
          f"AOE={report.aoe_deg:.3f} deg SD={report.sd_steer:.4f} "
          f"solve={report.total_solve_s:.3f} s")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_cfg(args.config)
    setup = cfgmod.build_setup(cfg)
    result = train(setup, args.out, seed=args.seed)
    print(f"trained {result.steps} steps over {result.episodes} episodes")
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"metrics:    {result.metrics_path}")
    return 0


def _policy_controller(args, cfg, track):
    if not os.path.exists(args.checkpoint):
        raise CheckpointError(f"checkpoint not found: {args.checkpoint}")
    return detach_demo(args.checkpoint, track)


def _cmd_eval(args) -> int:
    cfg = _load_cfg(args.config)
    plant, track, lon = _episode_pieces(cfg)
    if args.mpc:
        controller = cfgmod.build_demo_controller(cfg, track, plant)
        name = "mpc_pid"
    else:
        controller = _policy_controller(args, cfg, track)
        name = "policy"
    log = run_episode(controller, track, lon, plant, controller_id=name)
    report = metrics(log)
    save_trace(log, _out_path(args.out, f"{name}_trace.csv"))
    save_metrics_table([SweepRow(value=lon.constant_throttle, report=report)],
                       _out_path(args.out, f"{name}_metrics.csv"))
    print(f"{name}: completed={report.completed} ALE={report.ale_m:.4f} m "
          f"AOE={report.aoe_deg:.3f} deg SD={report.sd_steer:.4f}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_cfg(args.config)
    plant = cfgmod.vehicle_params(cfg)
    track = cfgmod.build_track(cfg)
    if not os.path.exists(args.checkpoint):
        raise CheckpointError(f"checkpoint not found: {args.checkpoint}")
    if args.axis == "throttle":
        rows = sweep(lambda v: throttle_sweep_episode(args.checkpoint, track,
                                                      plant, v), args.values)
    elif args.axis == "noise":
        rows = sweep(lambda v: noise_sweep_episode(args.checkpoint, track, plant,
                                                   v, seed=args.seed), args.values)
    else:
        rows = sweep(lambda s: noise_sweep_episode(args.checkpoint, track, plant,
                                                   args.noise, seed=int(s)),
                     args.values)
    path = _out_path(args.out, f"sweep_{args.axis}.csv")
    save_metrics_table(rows, path, axis_name=args.axis)
    for row in rows:
        if row.report is None:
            print(f"{args.axis}={row.value}: failed ({row.error})")
        else:
            print(f"{args.axis}={row.value}: completed={row.report.completed} "
                  f"ALE={row.report.ale_m:.4f} m")
    print(f"wrote {path}")
    return 0


def _cmd_compare(args) -> int:
    cfg = _load_cfg(args.config)
    plant, track, lon = _episode_pieces(cfg)
    mpc = cfgmod.build_demo_controller(cfg, track, plant)
    policy = _policy_controller(args, cfg, track)
    log_mpc = run_episode(mpc, track, lon, plant, controller_id="mpc_pid")
    lon.begin_episode()
    log_policy = run_episode(policy, track, lon, plant, controller_id="policy")
    cmp = compare_runtimes(log_policy, log_mpc)
    print(f"policy:  {cmp.total_a:.3f} s total, {1e3 * cmp.per_step_a:.3f} ms/step")
    print(f"mpc_pid: {cmp.total_b:.3f} s total, {1e3 * cmp.per_step_b:.3f} ms/step")
    print(f"savings: {100.0 * cmp.savings:.2f}%")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="steerlab",
                     description="Path-following control lab: demonstrator, "
                                 "agent training, and evaluation.")
    parser.add_argument("--config", default=None, help="config file path")
    parser.add_argument("--seed", type=int, default=0, help="random seed")
    parser.add_argument("--out", default=".", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-track", help="generate a track CSV")
    p.add_argument("--circle", type=float, default=None, metavar="RADIUS")
    p.add_argument("--spacing", type=float, default=1.0)
    p.add_argument("--out", dest="out", default="track.csv",
                   help="output CSV path")
    p.set_defaults(func=_cmd_gen_track)

    p = sub.add_parser("tune-mpc", help="run the MPC-PID baseline and report metrics")
    p.set_defaults(func=_cmd_tune_mpc)

    p = sub.add_parser("train", help="train the agent with demonstration")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained policy (or --mpc) on a track")
    p.add_argument("--checkpoint", default="checkpoint.txt")
    p.add_argument("--mpc", action="store_true", help="evaluate MPC-PID instead")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="metrics across throttle/noise/seed values")
    p.add_argument("--checkpoint", default="checkpoint.txt")
    p.add_argument("--axis", choices=("throttle", "noise", "seed"),
                   default="throttle")
    p.add_argument("--values", type=float, nargs="+",
                   default=[0.4, 0.6, 0.8, 1.0])
    p.add_argument("--noise", type=float, default=0.2,
                   help="waypoint noise for the seed axis")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("compare", help="runtime comparison: policy vs MPC-PID")
    p.add_argument("--checkpoint", default="checkpoint.txt")
    p.set_defaults(func=_cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, CheckpointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:   # noqa: BLE001 - CLI boundary
        print(f"fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
