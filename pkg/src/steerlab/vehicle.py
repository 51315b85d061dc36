"""Single-track vehicle dynamics.

Two deliberately different models live here: the nonlinear plant that the
episodes run on, and the linear time-invariant lateral model the MPC plans
with. The mismatch between them (plus optional parameter perturbation) is
what makes the demonstrator imperfect away from its tuned operating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ParameterError, StateError
from .track import wrap_angle

STEER_RATE_LIMIT = 1.5708          # |steering-rate command| bound, 1/s
LOW_SPEED_THRESHOLD = 0.5          # below this the lateral model goes kinematic, m/s
_KINEMATIC_RELAX = 0.05            # pull time-constant toward kinematic values, s


@dataclass(frozen=True)
class VehicleParams:
    """Physical plant parameters (SI units)."""

    mass: float = 1500.0               # kg
    yaw_inertia: float = 2500.0        # kg m^2
    dist_front_axle: float = 1.2       # m, CG to front axle
    dist_rear_axle: float = 1.4        # m, CG to rear axle
    cornering_stiffness_front: float = 80000.0   # N/rad
    cornering_stiffness_rear: float = 100000.0   # N/rad
    max_steer: float = 0.5236          # rad at normalized command 1.0
    drive_gain: float = 6.0            # m/s^2 per unit throttle
    drag_coeff: float = 0.0015         # 1/m
    roll_resist: float = 0.1           # m/s^2
    brake_decel: float = 8.0           # m/s^2 per unit brake

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not (value > 0.0 and math.isfinite(value)):
                raise ParameterError(f"vehicle parameter {name} must be positive")

    @property
    def wheelbase(self) -> float:
        return self.dist_front_axle + self.dist_rear_axle


def mismatched_params(params: VehicleParams, mass_factor: float = 1.10,
                      stiffness_factor: float = 0.85) -> VehicleParams:
    """Perturbed copy of ``params`` for a controller's internal model."""
    return replace(
        params,
        mass=params.mass * mass_factor,
        cornering_stiffness_front=params.cornering_stiffness_front * stiffness_factor,
        cornering_stiffness_rear=params.cornering_stiffness_rear * stiffness_factor,
    )


@dataclass(frozen=True)
class VehicleState:
    """Full plant state. ``steering`` is the normalized road-wheel command in [-1, 1]."""

    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0
    speed: float = 0.0
    side_slip: float = 0.0
    yaw_rate: float = 0.0
    steering: float = 0.0

    def __post_init__(self):
        values = (self.x, self.y, self.yaw, self.speed, self.side_slip,
                  self.yaw_rate, self.steering)
        if not all(math.isfinite(v) for v in values):
            raise StateError("vehicle state contains non-finite values")
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))
        object.__setattr__(self, "speed", max(0.0, self.speed))
        object.__setattr__(self, "steering", min(1.0, max(-1.0, self.steering)))


@dataclass(frozen=True)
class ControlCommand:
    """Steering (or steering rate, if ``steering_rate`` is set), throttle, brake.

    All fields are clamped to their bounds at construction. The longitudinal
    PID never emits throttle and brake together; other callers may.
    """

    steering: float = 0.0
    steering_rate: float | None = None
    throttle: float = 0.0
    brake: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "steering", min(1.0, max(-1.0, float(self.steering))))
        if self.steering_rate is not None:
            rate = min(STEER_RATE_LIMIT, max(-STEER_RATE_LIMIT, float(self.steering_rate)))
            object.__setattr__(self, "steering_rate", rate)
        object.__setattr__(self, "throttle", min(1.0, max(0.0, float(self.throttle))))
        object.__setattr__(self, "brake", min(1.0, max(0.0, float(self.brake))))

    @property
    def rate_mode(self) -> bool:
        return self.steering_rate is not None


def _derivatives(x, y, yaw, v, beta, r, delta_phys, throttle, brake, p: VehicleParams):
    a_long = (p.drive_gain * throttle - p.drag_coeff * v * v
              - p.roll_resist - p.brake_decel * brake)
    if v <= 0.0 and a_long < 0.0:
        a_long = 0.0

    if v >= LOW_SPEED_THRESHOLD:
        vx = v * math.cos(beta)
        vy = v * math.sin(beta)
        alpha_f = delta_phys - math.atan2(vy + p.dist_front_axle * r, vx)
        alpha_r = -math.atan2(vy - p.dist_rear_axle * r, vx)
        f_front = p.cornering_stiffness_front * alpha_f * math.cos(delta_phys)
        f_rear = p.cornering_stiffness_rear * alpha_r
        d_beta = (f_front + f_rear) / (p.mass * v) - r
        d_r = (p.dist_front_axle * f_front - p.dist_rear_axle * f_rear) / p.yaw_inertia
    else:
        # Kinematic-bicycle pull: avoids the 1/v singularity at launch.
        wheelbase = p.wheelbase
        beta_kin = math.atan(p.dist_rear_axle * math.tan(delta_phys) / wheelbase)
        r_kin = v * math.cos(beta_kin) * math.tan(delta_phys) / wheelbase
        d_beta = (beta_kin - beta) / _KINEMATIC_RELAX
        d_r = (r_kin - r) / _KINEMATIC_RELAX

    return (v * math.cos(yaw + beta), v * math.sin(yaw + beta), r,
            a_long, d_beta, d_r)


def step_plant(state: VehicleState, command: ControlCommand,
               params: VehicleParams, dt: float) -> VehicleState:
    """Advance the nonlinear plant one control step via RK4 sub-stepping.

    In steering-rate mode the wheel angle is first advanced by
    ``rate * dt`` and clamped to [-1, 1]; the resulting angle is held for
    the whole step.
    """
    if dt <= 0.0:
        raise ParameterError("dt must be positive")
    if command.rate_mode:
        steer_norm = min(1.0, max(-1.0, state.steering + command.steering_rate * dt))
    else:
        steer_norm = command.steering
    delta_phys = steer_norm * params.max_steer

    # Lateral time constants scale with 1/v; shorten sub-steps near standstill.
    n_sub = 5 if state.speed >= 2.0 else 25
    h = dt / n_sub
    s = [state.x, state.y, state.yaw, state.speed, state.side_slip, state.yaw_rate]
    for _ in range(n_sub):
        k1 = _derivatives(*s, delta_phys, command.throttle, command.brake, params)
        s2 = [s[i] + 0.5 * h * k1[i] for i in range(6)]
        k2 = _derivatives(*s2, delta_phys, command.throttle, command.brake, params)
        s3 = [s[i] + 0.5 * h * k2[i] for i in range(6)]
        k3 = _derivatives(*s3, delta_phys, command.throttle, command.brake, params)
        s4 = [s[i] + h * k3[i] for i in range(6)]
        k4 = _derivatives(*s4, delta_phys, command.throttle, command.brake, params)
        s = [s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
             for i in range(6)]
        if s[3] < 0.0:
            s[3] = 0.0

    return VehicleState(x=s[0], y=s[1], yaw=s[2], speed=s[3],
                        side_slip=s[4], yaw_rate=s[5], steering=steer_norm)


def steady_state_yaw_rate(params: VehicleParams, v: float, delta_phys: float) -> float:
    """Analytic steady-state yaw rate of the linear single-track model."""
    wheelbase = params.wheelbase
    k_us = params.mass * (params.cornering_stiffness_rear * params.dist_rear_axle
                          - params.cornering_stiffness_front * params.dist_front_axle) / (
        params.cornering_stiffness_front * params.cornering_stiffness_rear * wheelbase)
    return v * delta_phys / (wheelbase + k_us * v * v)


@dataclass(frozen=True)
class LinearModel:
    """Continuous LTI lateral model X = [y, beta, yaw, yaw_rate], input = physical steer angle.

    ``Ad``/``Bd``/``dt`` are filled by :func:`discretize`.
    """

    A: np.ndarray
    B: np.ndarray
    v_nominal: float
    Ad: np.ndarray | None = None
    Bd: np.ndarray | None = None
    dt: float | None = None


def linear_single_track(params: VehicleParams, v_nominal: float) -> LinearModel:
    """Standard linear single-track model linearized at ``v_nominal``."""
    if v_nominal <= 0.0:
        raise ParameterError("v_nominal must be positive")
    m = params.mass
    iz = params.yaw_inertia
    lf = params.dist_front_axle
    lr = params.dist_rear_axle
    cf = params.cornering_stiffness_front
    cr = params.cornering_stiffness_rear
    v = v_nominal

    A = np.array([
        [0.0, v, v, 0.0],
        [0.0, -(cf + cr) / (m * v), 0.0, (cr * lr - cf * lf) / (m * v * v) - 1.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, (cr * lr - cf * lf) / iz, 0.0, -(cf * lf * lf + cr * lr * lr) / (iz * v)],
    ])
    B = np.array([[0.0], [cf / (m * v)], [0.0], [cf * lf / iz]])
    return LinearModel(A=A, B=B, v_nominal=v)


def _expm(M: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring of a truncated Taylor series."""
    norm = float(np.max(np.abs(M))) * M.shape[0]
    squarings = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0.5 else 0
    T = M / (2.0 ** squarings)
    result = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    k = 1
    while True:
        term = term @ T / k
        result = result + term
        if float(np.max(np.abs(term))) < tol:
            break
        k += 1
        if k > 200:
            break
    for _ in range(squarings):
        result = result @ result
    return result


def discretize(model: LinearModel, dt: float) -> LinearModel:
    """Zero-order-hold discretization, returning a new model with Ad/Bd set."""
    if dt <= 0.0:
        raise ParameterError("dt must be positive")
    n = model.A.shape[0]
    m = model.B.shape[1]
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = model.A
    aug[:n, n:] = model.B
    E = _expm(aug * dt)
    return LinearModel(A=model.A, B=model.B, v_nominal=model.v_nominal,
                       Ad=E[:n, :n], Bd=E[:n, n:], dt=dt)
