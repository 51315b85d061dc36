"""Episode runner, tracking metrics, runtime comparison, and parameter sweeps.

Controllers only need an ``act(state) -> action`` method plus ``begin_episode``
and an ``action_mode`` attribute; both the MPC-PID demonstrator and the
detached policy satisfy this.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import ControllerFault, MetricsError, ParameterError
from .longitudinal import LongitudinalControl
from .track import Track, perturb_waypoints
from .training import detach_demo, heading_error, spawn_state
from .vehicle import ControlCommand, VehicleParams, VehicleState, step_plant

TRACE_HEADER = "t,x,y,yaw,v,steering,lateral_error,heading_error,solve_time"
METRICS_TABLE_HEADER = "throttle,ALE_m,AOE_deg,SD_steer,completed,total_solve_s"


@dataclass
class EpisodeLog:
    """Per-step trace of one episode at a uniform control period."""

    dt: float
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    yaw: np.ndarray
    v: np.ndarray
    steering: np.ndarray
    lateral_error: np.ndarray
    heading_error: np.ndarray
    solve_time: np.ndarray
    track_id: str = ""
    controller_id: str = ""
    completed: bool = False
    aborted: bool = False
    fault: bool = False

    @property
    def n_steps(self) -> int:
        return self.t.shape[0]


def run_episode(controller, track: Track, longitudinal: LongitudinalControl,
                plant: VehicleParams, dt: float = 0.05,
                abort_limit: float | None = None, max_steps: int = 20_000,
                heading_mode: str = "velocity", spawn_offset: float = 0.0,
                controller_id: str = "", track_id: str = "") -> EpisodeLog:
    """Drive one lap attempt and log every step, starting with a spawn record.

    Ends on lap completion (cumulative arc progress reaches the track
    length), corridor abort, the step cap, or a controller fault (the
    partial log is then flagged). ``abort_limit`` defaults to the track's
    corridor half width; ``spawn_offset`` shifts the start position to the
    left of the path by that many metres.
    """
    if abort_limit is None:
        abort_limit = track.corridor_half_width
    controller.begin_episode()
    longitudinal.begin_episode()
    state = spawn_state(track, speed=longitudinal.spawn_speed())
    if spawn_offset != 0.0:
        state = VehicleState(
            x=state.x - spawn_offset * math.sin(state.yaw),
            y=state.y + spawn_offset * math.cos(state.yaw),
            yaw=state.yaw, speed=state.speed)
    proj = track.project((state.x, state.y))
    rate_mode = getattr(controller, "action_mode", "steering") == "steering_rate"

    cols: dict[str, list[float]] = {k: [] for k in
                                    ("t", "x", "y", "yaw", "v", "steering",
                                     "lateral_error", "heading_error", "solve_time")}

    def record(t, solve):
        cols["t"].append(t)
        cols["x"].append(state.x)
        cols["y"].append(state.y)
        cols["yaw"].append(state.yaw)
        cols["v"].append(state.speed)
        cols["steering"].append(state.steering)
        cols["lateral_error"].append(proj.lateral_error)
        cols["heading_error"].append(heading_error(state, proj.heading_ref,
                                                   heading_mode))
        cols["solve_time"].append(solve)

    completed = False
    aborted = False
    fault = False
    progress = 0.0
    prev_arc = proj.arc_position
    record(0.0, 0.0)

    if abs(proj.lateral_error) > abort_limit:
        aborted = True
        max_steps = 0

    for k in range(max_steps):
        t0 = time.perf_counter()
        try:
            action = controller.act(state)
        except ControllerFault:
            fault = True
            aborted = True
            break
        solve = time.perf_counter() - t0

        throttle, brake = longitudinal.command(state.speed, k * dt, dt)
        if rate_mode:
            cmd = ControlCommand(steering_rate=action, throttle=throttle, brake=brake)
        else:
            cmd = ControlCommand(steering=action, throttle=throttle, brake=brake)
        state = step_plant(state, cmd, plant, dt)
        proj = track.project((state.x, state.y), hint=proj.nearest_segment_index)

        delta_arc = proj.arc_position - prev_arc
        if track.closed and delta_arc < -0.5 * track.length:
            delta_arc += track.length
        elif track.closed and delta_arc > 0.5 * track.length:
            delta_arc -= track.length
        progress += delta_arc
        prev_arc = proj.arc_position

        record((k + 1) * dt, solve)

        if abs(proj.lateral_error) > abort_limit:
            aborted = True
            break
        if progress >= track.length:
            completed = True
            break

    return EpisodeLog(dt=dt, controller_id=controller_id, track_id=track_id,
                      completed=completed, aborted=aborted, fault=fault,
                      **{k: np.asarray(v) for k, v in cols.items()})


@dataclass(frozen=True)
class MetricsReport:
    ale_m: float
    aoe_deg: float
    sd_steer: float
    completed: bool
    total_solve_s: float


def metrics(log: EpisodeLog) -> MetricsReport:
    """ALE / AOE / steering SD (population) / total controller time."""
    if log.n_steps < 1:
        raise MetricsError("episode log has no steps")
    ale = float(np.mean(np.abs(log.lateral_error)))
    aoe = float(np.degrees(np.mean(np.abs(log.heading_error))))
    sd = float(np.std(log.steering))
    return MetricsReport(ale_m=ale, aoe_deg=aoe, sd_steer=sd,
                         completed=log.completed,
                         total_solve_s=float(np.sum(log.solve_time)))


@dataclass(frozen=True)
class RuntimeComparison:
    total_a: float
    total_b: float
    per_step_a: float
    per_step_b: float
    savings: float      # 1 - total_a / total_b


def compare_runtimes(log_a: EpisodeLog, log_b: EpisodeLog) -> RuntimeComparison:
    """Controller-compute comparison; ``savings`` is how much faster a is than b."""
    if log_a.n_steps < 1 or log_b.n_steps < 1:
        raise MetricsError("both logs need at least one step")
    total_a = float(np.sum(log_a.solve_time))
    total_b = float(np.sum(log_b.solve_time))
    return RuntimeComparison(
        total_a=total_a, total_b=total_b,
        per_step_a=total_a / log_a.n_steps, per_step_b=total_b / log_b.n_steps,
        savings=1.0 - total_a / total_b)


@dataclass
class SweepRow:
    value: float
    report: MetricsReport | None
    error: str = ""


def sweep(make_episode, values) -> list[SweepRow]:
    """Run ``make_episode(value) -> EpisodeLog`` per axis value.

    Per-run faults are recorded in the row and the sweep continues.
    """
    rows = []
    for value in values:
        try:
            log = make_episode(value)
            rows.append(SweepRow(value=float(value), report=metrics(log)))
        except Exception as exc:   # noqa: BLE001 - sweep must survive bad runs
            rows.append(SweepRow(value=float(value), report=None, error=str(exc)))
    return rows


def throttle_sweep_episode(checkpoint_path, track: Track, plant: VehicleParams,
                           throttle: float, dt: float = 0.05) -> EpisodeLog:
    """One constant-throttle lap of the detached policy, for the sweep axis."""
    controller = detach_demo(checkpoint_path, track)
    lon = LongitudinalControl(mode="constant", constant_throttle=throttle)
    return run_episode(controller, track, lon, plant, dt=dt,
                       controller_id="policy", track_id="sweep")


def noise_sweep_episode(checkpoint_path, track: Track, plant: VehicleParams,
                        noise: float, seed: int = 0, dt: float = 0.05,
                        throttle: float = 0.4) -> EpisodeLog:
    """One lap on a waypoint-perturbed copy of the track."""
    noisy = perturb_waypoints(track, noise, seed) if noise > 0.0 else track
    controller = detach_demo(checkpoint_path, noisy)
    lon = LongitudinalControl(mode="constant", constant_throttle=throttle)
    return run_episode(controller, noisy, lon, plant, dt=dt,
                       controller_id="policy", track_id=f"noise={noise}")


# ---------------------------------------------------------------------------
# CSV round-trip helpers


def save_trace(log: EpisodeLog, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# dt={log.dt!r} completed={log.completed} aborted={log.aborted} "
                 f"fault={log.fault}\n")
        fh.write(TRACE_HEADER + "\n")
        for i in range(log.n_steps):
            fh.write(",".join(repr(float(col[i])) for col in
                              (log.t, log.x, log.y, log.yaw, log.v, log.steering,
                               log.lateral_error, log.heading_error,
                               log.solve_time)) + "\n")


def load_trace(path) -> EpisodeLog:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 2:
        raise ParameterError("trace file too short")
    flags = dict(item.split("=") for item in lines[0][1:].split())
    if lines[1] != TRACE_HEADER:
        raise ParameterError("unexpected trace header")
    data = np.array([[float(c) for c in line.split(",")] for line in lines[2:]])
    if data.size == 0:
        data = np.zeros((0, 9))
    return EpisodeLog(dt=float(flags["dt"]), t=data[:, 0], x=data[:, 1],
                      y=data[:, 2], yaw=data[:, 3], v=data[:, 4],
                      steering=data[:, 5], lateral_error=data[:, 6],
                      heading_error=data[:, 7], solve_time=data[:, 8],
                      completed=flags["completed"] == "True",
                      aborted=flags["aborted"] == "True",
                      fault=flags["fault"] == "True")


def save_metrics_table(rows: list[SweepRow], path,
                       axis_name: str = "throttle") -> None:
    header = METRICS_TABLE_HEADER
    if axis_name != "throttle":
        header = header.replace("throttle", axis_name, 1)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            if row.report is None:
                fh.write(f"{row.value!r},nan,nan,nan,False,nan\n")
            else:
                r = row.report
                fh.write(f"{row.value!r},{r.ale_m!r},{r.aoe_deg!r},{r.sd_steer!r},"
                         f"{r.completed},{r.total_solve_s!r}\n")


def load_metrics_table(path) -> list[SweepRow]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or len(lines[0].split(",")) != 6:
        raise ParameterError("unexpected metrics table header")
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        report = MetricsReport(ale_m=float(cells[1]), aoe_deg=float(cells[2]),
                               sd_steer=float(cells[3]),
                               completed=cells[4] == "True",
                               total_solve_s=float(cells[5]))
        rows.append(SweepRow(value=float(cells[0]), report=report))
    return rows


def load_training_metrics(path) -> dict[str, np.ndarray]:
    """Parse a training metrics CSV into named columns."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParameterError("empty metrics file")
    names = lines[0].split(",")
    data = np.array([[float(c) for c in line.split(",")] for line in lines[1:]])
    if data.size == 0:
        data = np.zeros((0, len(names)))
    return {name: data[:, i] for i, name in enumerate(names)}
