"""Evaluate a trained policy: throttle sweep, waypoint noise, runtime.

Expects a checkpoint from demo 06 (run it first, or point CHECKPOINT at an
acceptance-grade one). Emits a metrics table mirroring the
throttle-position evaluation layout.
"""

import os
import sys

import steerlab as sl
from steerlab.evaluation import (compare_runtimes, metrics,
                                 noise_sweep_episode, run_episode,
                                 save_metrics_table, sweep,
                                 throttle_sweep_episode)
from steerlab.longitudinal import LongitudinalControl
from steerlab.training import detach_demo

OUT = os.path.join(os.path.dirname(__file__), "demo_out")
CHECKPOINT = os.path.join(OUT, "train_short", "checkpoint.txt")

if not os.path.exists(CHECKPOINT):
    sys.exit("no checkpoint found; run 06_train_with_demonstration.py first")

track = sl.generate_circle(50.0, 1.0)
params = sl.VehicleParams()

print("throttle sweep (one lap per throttle position):")
rows = sweep(lambda th: throttle_sweep_episode(CHECKPOINT, track, params, th),
             [0.4, 0.6, 0.8, 1.0])
for row in rows:
    r = row.report
    print(f"  throttle {row.value}: completed={r.completed} "
          f"ALE={r.ale_m:.4f} m AOE={r.aoe_deg:.2f} deg SD={r.sd_steer:.4f}")
save_metrics_table(rows, os.path.join(OUT, "throttle_sweep.csv"))

print("\nwaypoint-noise robustness at throttle 0.4:")
clean = metrics(throttle_sweep_episode(CHECKPOINT, track, params, 0.4))
for level in (0.1, 0.2):
    r = metrics(noise_sweep_episode(CHECKPOINT, track, params, level, seed=1))
    print(f"  ±{level} m: completed={r.completed} ALE={r.ale_m:.4f} m "
          f"(clean {clean.ale_m:.4f} m, x{r.ale_m / clean.ale_m:.2f})")

print("\nper-step compute, policy vs demonstrator (horizon 20):")
policy = detach_demo(CHECKPOINT, track)
mpc = sl.MpcPidController(track, params, v_nominal=12.0)
lon = LongitudinalControl(mode="constant", constant_throttle=0.4)
log_mpc = run_episode(mpc, track, lon, params, max_steps=400)
lon.begin_episode()
log_policy = run_episode(policy, track, lon, params, max_steps=400)
cmp = compare_runtimes(log_policy, log_mpc)
print(f"  policy  {1e3 * cmp.per_step_a:7.3f} ms/step")
print(f"  mpc-pid {1e3 * cmp.per_step_b:7.3f} ms/step")
print(f"  saving  {100 * cmp.savings:.1f}% "
      f"({cmp.per_step_b / cmp.per_step_a:.0f}x faster)")
