"""Plant vs linear model: steady-state cornering and the model mismatch.

The nonlinear single-track plant stands in for a full simulator; the linear
model is what the MPC plans with. This script shows the steady-state check
and how far the (deliberately perturbed) internal model drifts from the plant.
"""

import numpy as np

from steerlab import (ControlCommand, VehicleParams, VehicleState, discretize,
                      linear_single_track, mismatched_params, step_plant)
from steerlab.vehicle import steady_state_yaw_rate

params = VehicleParams()
print(f"plant: mass {params.mass:.0f} kg, wheelbase {params.wheelbase:.1f} m, "
      f"max steer {np.degrees(params.max_steer):.0f} deg")

# Hold a constant steering angle at (nearly) constant speed: the yaw rate
# settles on the analytic single-track value.
steer = 0.08
state = VehicleState(speed=15.0)
for _ in range(1200):
    throttle = (params.drag_coeff * state.speed ** 2 + params.roll_resist) / params.drive_gain
    state = step_plant(state, ControlCommand(steering=steer, throttle=throttle),
                       params, 0.05)
analytic = steady_state_yaw_rate(params, state.speed, steer * params.max_steer)
print(f"\nsteady cornering at {state.speed:.1f} m/s, steer {steer}:")
print(f"  simulated yaw rate {state.yaw_rate:.5f} rad/s, "
      f"analytic {analytic:.5f} rad/s "
      f"({100 * abs(state.yaw_rate - analytic) / analytic:.2f}% apart)")
print(f"  side slip {state.side_slip:.5f} rad, turn radius "
      f"{state.speed / state.yaw_rate:.1f} m")

# The MPC's internal model: heavier and softer tires than the plant.
internal = mismatched_params(params)
model = discretize(linear_single_track(internal, 12.0), 0.05)
print(f"\ninternal model at 12 m/s (mass +10%, stiffness -15%):")
print("  A =")
print(np.array_str(model.A, precision=3, suppress_small=True))
print("  discrete Ad diag:", np.round(np.diag(model.Ad), 4))

# One-step agreement in the small-angle regime.
x0 = np.array([0.0, 0.002, 0.0, 0.01])
plant_model = discretize(linear_single_track(params, 12.0), 0.05)
lin = plant_model.Ad @ x0 + plant_model.Bd[:, 0] * 0.005
s = VehicleState(speed=12.0, side_slip=x0[1], yaw_rate=x0[3])
s2 = step_plant(s, ControlCommand(steering=0.005 / params.max_steer,
                                  throttle=0.036), params, 0.05)
nonlin = np.array([s2.y, s2.side_slip, s2.yaw, s2.yaw_rate])
print("\none 0.05 s step, small steering:")
print("  linear   ", np.round(lin, 6))
print("  nonlinear", np.round(nonlin, 6))
