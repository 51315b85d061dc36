"""A short demonstration-guided training run, end to end.

Wires the MPC-PID demonstrator into the agent's loop with the gated extra
action and the adaptive two-part reward, then detaches the policy and drives
it. 20k steps is enough to see the mechanics working (the acceptance-grade
run uses 150k; scale `STEPS` up to reproduce it).
"""

import os
import time

import numpy as np

import steerlab as sl
from steerlab.evaluation import load_training_metrics, metrics, run_episode
from steerlab.longitudinal import LongitudinalControl
from steerlab.training import TrainConfig, TrainSetup, detach_demo, train

OUT = os.path.join(os.path.dirname(__file__), "demo_out", "train_short")
STEPS = 20_000
SEED = 11

track = sl.generate_circle(50.0, 1.0)
params = sl.VehicleParams()

# Demonstrator with a control-grade solver budget (the tight default
# tolerance buys nothing for closed-loop quality and costs 5x the time).
mpc_cfg = sl.MpcConfig(steer_scale=params.max_steer, qp_max_iters=80,
                       qp_tol=1e-6)
demo = sl.MpcPidController(track, params, v_nominal=12.0, mpc_config=mpc_cfg)

setup = TrainSetup(
    track=track, plant=params, demo=demo,
    longitudinal=LongitudinalControl(mode="constant", constant_throttle=0.4),
    ddpg=sl.DdpgParams(),
    cfg=TrainConfig(total_steps=STEPS, noise_sigma_final=0.05))

t0 = time.perf_counter()
result = train(setup, OUT, seed=SEED)
print(f"trained {result.steps} steps / {result.episodes} episodes "
      f"in {time.perf_counter() - t0:.0f} s")

m = load_training_metrics(result.metrics_path)
chunk = STEPS // 4
for k in range(4):
    seg = slice(k * chunk, (k + 1) * chunk)
    print(f"  steps {k * chunk:6d}-{(k + 1) * chunk:6d}: "
          f"mean |lateral error| {np.mean(np.abs(m['lateral_error'][seg])):.3f} m, "
          f"demo executed {100 * np.mean(m['executed_demo'][seg]):.0f}%, "
          f"mean c_track {np.mean(m['c_track'][seg]):.3f}")

# Detach the policy: no demonstrator, no noise, just the actor network.
policy = detach_demo(result.checkpoint_path, track)
lon = LongitudinalControl(mode="constant", constant_throttle=0.4)
log = run_episode(policy, track, lon, params, controller_id="policy")
r = metrics(log)
print(f"\ndetached policy lap: completed={r.completed} "
      f"ALE={r.ale_m:.3f} m, max |e|={np.max(np.abs(log.lateral_error)):.3f} m")
print(f"metrics CSV: {os.path.relpath(result.metrics_path)}")
print(f"checkpoint:  {os.path.relpath(result.checkpoint_path)}")
print("columns for the coefficient-trace figure: step, c_track, c_diff")
