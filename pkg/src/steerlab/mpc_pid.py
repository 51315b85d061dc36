"""Demonstrator controller: receding-horizon MPC on the linear lateral model,
blended with a PID feedback term on lateral error.

The MPC plans in a path-aligned frame anchored at the current projection
(x along the local tangent, y left), so the LTI model's lateral state is
directly the tracked quantity. The QP over the steering sequence is condensed
by forward substitution and solved with projected gradient descent on the box
constraints.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ControllerFault, ParameterError
from .track import PathProjection, Track, wrap_angle
from .vehicle import (LinearModel, VehicleParams, VehicleState, discretize,
                      linear_single_track, mismatched_params)


@dataclass(frozen=True)
class MpcConfig:
    horizon: int = 20
    dt: float = 0.05
    Q: np.ndarray = field(default_factory=lambda: np.diag([0.5, 5.0]))
    P_term: np.ndarray = field(default_factory=lambda: 4.0 * np.diag([0.5, 5.0]))
    r_input: float = 1.0
    steer_bounds: tuple[float, float] = (-1.0, 1.0)
    qp_max_iters: int = 500
    qp_tol: float = 1e-8
    steer_scale: float = 0.5236   # physical rad per unit of normalized steering

    def __post_init__(self):
        if self.horizon < 2:
            raise ParameterError("horizon must be >= 2")
        if self.dt <= 0.0 or self.r_input <= 0.0:
            raise ParameterError("dt and r_input must be positive")
        for name in ("Q", "P_term"):
            mat = np.asarray(getattr(self, name), dtype=float)
            if mat.shape != (2, 2) or not np.allclose(mat, mat.T):
                raise ParameterError(f"{name} must be a symmetric 2x2 matrix")
            if np.any(np.linalg.eigvalsh(mat) < -1e-12):
                raise ParameterError(f"{name} must be positive semidefinite")
            object.__setattr__(self, name, mat)


@dataclass(frozen=True)
class PidGains:
    kp: float = 0.15
    ki: float = 0.01
    kd: float = 0.3
    integral_limit: float = 5.0

    def __post_init__(self):
        if self.integral_limit <= 0.0:
            raise ParameterError("integral_limit must be positive")


@dataclass(frozen=True)
class BlendWeights:
    c_mpc: float = 0.8
    c_pid: float = 0.2

    def __post_init__(self):
        if self.c_mpc < 0.0 or self.c_pid < 0.0:
            raise ParameterError("blend weights must be non-negative")


class LateralPid:
    """Positional PID on signed lateral error with clamped integral.

    Positive lateral error (left of path) yields a negative (rightward)
    steering contribution.
    """

    def __init__(self, gains: PidGains):
        self.gains = gains
        self.reset()

    def reset(self) -> None:
        self._integral = 0.0
        self._prev_error = None

    def step(self, error: float, dt: float) -> float:
        if dt <= 0.0:
            raise ParameterError("dt must be positive")
        g = self.gains
        self._integral += error * dt
        self._integral = min(g.integral_limit, max(-g.integral_limit, self._integral))
        derivative = 0.0 if self._prev_error is None else (error - self._prev_error) / dt
        self._prev_error = error
        return -(g.kp * error + g.ki * self._integral + g.kd * derivative)

    @property
    def integral(self) -> float:
        return self._integral


def path_tangent(track: Track, arc_position: float, h: float = 0.5) -> float:
    """Centered-difference tangent direction at an arc position.

    Smoother than the raw segment heading: on a polyline sampled from a
    curve, the chord direction is biased by half the per-segment turn angle,
    which this estimate cancels.
    """
    if track.closed:
        a = track.point_at_arc(arc_position - h)
        b = track.point_at_arc(arc_position + h)
    else:
        a = track.point_at_arc(max(arc_position - h, 0.0))
        b = track.point_at_arc(min(arc_position + h, track.length))
    return math.atan2(b[1] - a[1], b[0] - a[0])


def build_reference(track: Track, projection: PathProjection, v_nominal: float,
                    horizon: int, dt: float) -> np.ndarray:
    """Reference points for each horizon step, in the path-aligned frame.

    Samples the track at arc increments ``v_nominal * dt`` past the current
    projection and rotates them into the frame anchored at the projected
    point with x along the local path tangent (so column 1 is the signed
    lateral reference the MPC's y state should follow).
    """
    anchor = track.point_at_arc(projection.arc_position)
    theta = path_tangent(track, projection.arc_position)
    c = math.cos(theta)
    s = math.sin(theta)
    out = np.empty((horizon, 2))
    for k in range(1, horizon + 1):
        p = track.point_at_arc(projection.arc_position + k * v_nominal * dt)
        dx = p[0] - anchor[0]
        dy = p[1] - anchor[1]
        out[k - 1, 0] = c * dx + s * dy
        out[k - 1, 1] = -s * dx + c * dy
    return out


def prediction_matrices(model: LinearModel, horizon: int,
                        steer_scale: float) -> tuple[np.ndarray, np.ndarray]:
    """Condensed prediction of the lateral state: y = Phi @ x0 + G @ u.

    ``u`` is the normalized steering sequence; ``G`` is lower triangular.
    """
    if model.Ad is None or model.Bd is None:
        raise ParameterError("model must be discretized first")
    Ad = model.Ad
    Bd = model.Bd[:, 0] * steer_scale
    c_row = np.zeros(4)
    c_row[0] = 1.0

    powers = [np.eye(4)]
    for _ in range(horizon):
        powers.append(Ad @ powers[-1])
    Phi = np.stack([c_row @ powers[k] for k in range(1, horizon + 1)])
    G = np.zeros((horizon, horizon))
    impulse = [c_row @ powers[k] @ Bd for k in range(horizon)]
    for k in range(horizon):
        for j in range(k + 1):
            G[k, j] = impulse[k - j]
    return Phi, G


def condense_qp(state_vec: np.ndarray, reference: np.ndarray, model: LinearModel,
                config: MpcConfig,
                prediction: tuple[np.ndarray, np.ndarray] | None = None
                ) -> tuple[np.ndarray, np.ndarray]:
    """Quadratic cost 0.5 u'Hu + g'u over the steering sequence.

    Stage cost per step is e_k' Q e_k + r u_{k-1}^2 with
    e_k = (k v dt - x_ref_k, y_k - y_ref_k); the terminal step additionally
    carries P_term. The frame-x coordinate advances open-loop at v_nominal,
    so only the lateral component depends on u.
    """
    N = config.horizon
    if prediction is None:
        prediction = prediction_matrices(model, N, config.steer_scale)
    Phi, G = prediction

    x_pred = np.arange(1, N + 1) * model.v_nominal * config.dt
    ex = x_pred - reference[:, 0]
    d = Phi @ state_vec - reference[:, 1]

    w = np.full(N, config.Q[1, 1])
    m = config.Q[0, 1] * ex
    w[-1] += config.P_term[1, 1]
    m[-1] += config.P_term[0, 1] * ex[-1]

    H = 2.0 * (G.T @ (w[:, None] * G) + config.r_input * np.eye(N))
    g = 2.0 * (G.T @ (w * d + m))
    return H, g


def projected_gradient_box(H: np.ndarray, g: np.ndarray, lo: float, hi: float,
                           tol: float, max_iters: int,
                           trace: list | None = None) -> np.ndarray:
    """Monotone spectral projected gradient for 0.5 u'Hu + g'u on a box.

    Each iteration moves along the projected-gradient direction with the
    exact quadratic-minimizing step (clipped to the feasible segment), then
    updates the spectral step length Barzilai-Borwein style. The objective
    value is strictly non-increasing.
    """
    n = g.shape[0]
    u = np.zeros(n)
    grad = g.copy()
    f_val = 0.0
    alpha = 1.0 / max(float(np.abs(H).sum(axis=1).max()), 1e-12)
    if trace is not None:
        trace.append(f_val)

    for _ in range(max_iters):
        pg = u - (u - grad).clip(lo, hi)
        if math.sqrt(float(pg @ pg)) < tol:
            break
        d = (u - alpha * grad).clip(lo, hi) - u
        Hd = H @ d
        d_hd = float(d @ Hd)
        g_d = float(grad @ d)
        if d_hd > 0.0:
            t_star = -g_d / d_hd
            # Full spectral step whenever it still decreases f; exact
            # line-search step otherwise. Both keep f non-increasing.
            t = 1.0 if 2.0 * t_star > 1.0 else min(1.0, t_star)
            alpha = min(max(float(d @ d) / d_hd, 1e-14), 1e14)
        else:
            t = 1.0
        u = u + t * d
        grad = grad + t * Hd
        f_val = f_val + t * g_d + 0.5 * t * t * d_hd
        if trace is not None:
            trace.append(f_val)
    return u


def solve_mpc(state_vec, reference, model: LinearModel, config: MpcConfig,
              prediction: tuple[np.ndarray, np.ndarray] | None = None) -> float:
    """First input of the receding-horizon QP solution (normalized steering)."""
    state_vec = np.asarray(state_vec, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if reference.shape != (config.horizon, 2):
        raise ParameterError("reference must have one (x, y) row per horizon step")
    if not (np.all(np.isfinite(state_vec)) and np.all(np.isfinite(reference))):
        raise ControllerFault("non-finite QP data")
    H, g = condense_qp(state_vec, reference, model, config, prediction)
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(g))):
        raise ControllerFault("non-finite QP data")
    lo, hi = config.steer_bounds
    u = projected_gradient_box(H, g, lo, hi, config.qp_tol, config.qp_max_iters)
    return float(u[0])


def blend(u_mpc: float, u_pid: float, weights: BlendWeights) -> float:
    """Weighted sum of the two contributions, clamped to [-1, 1]."""
    u = weights.c_mpc * u_mpc + weights.c_pid * u_pid
    return min(1.0, max(-1.0, u))


class MpcPidController:
    """Full demonstrator: project, build reference, solve MPC, add PID, blend.

    One instance per episode (it owns the PID integral and the projection
    window hint); distinct instances are independent.
    """

    action_mode = "steering"

    def __init__(self, track: Track, plant_params: VehicleParams,
                 v_nominal: float = 12.0,
                 mpc_config: MpcConfig | None = None,
                 pid_gains: PidGains | None = None,
                 blend_weights: BlendWeights | None = None,
                 model_params: VehicleParams | None = None):
        self.track = track
        self.config = mpc_config if mpc_config is not None else MpcConfig(
            steer_scale=plant_params.max_steer)
        self.pid = LateralPid(pid_gains if pid_gains is not None else PidGains())
        self.weights = blend_weights if blend_weights is not None else BlendWeights()
        if model_params is None:
            model_params = mismatched_params(plant_params)
        self.model = discretize(linear_single_track(model_params, v_nominal),
                                self.config.dt)
        self._prediction = prediction_matrices(self.model, self.config.horizon,
                                               self.config.steer_scale)
        self.last_solve_time = 0.0
        self.total_solve_time = 0.0
        self._hint: int | None = None

    def begin_episode(self) -> None:
        self.pid.reset()
        self._hint = None
        self.last_solve_time = 0.0
        self.total_solve_time = 0.0

    def act(self, state: VehicleState) -> float:
        """Normalized steering command for the current plant state."""
        t0 = time.perf_counter()
        proj = self.track.project((state.x, state.y), hint=self._hint)
        self._hint = proj.nearest_segment_index
        reference = build_reference(self.track, proj, self.model.v_nominal,
                                    self.config.horizon, self.config.dt)
        tangent = path_tangent(self.track, proj.arc_position)
        x0 = np.array([proj.lateral_error, state.side_slip,
                       wrap_angle(state.yaw - tangent), state.yaw_rate])
        u_mpc = solve_mpc(x0, reference, self.model, self.config, self._prediction)
        u_pid = self.pid.step(proj.lateral_error, self.config.dt)
        u = blend(u_mpc, u_pid, self.weights)
        self.last_solve_time = time.perf_counter() - t0
        self.total_solve_time += self.last_solve_time
        return u
