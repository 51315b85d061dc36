"""Decoupled longitudinal control: constant throttle or PID speed tracking.

The built-in reference profile is the standard European driving cycle encoded
as a compiled-in piecewise-linear table (four urban sub-cycles followed by the
extra-urban segment), with the leading idle removed so the trace starts on the
first acceleration ramp.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

KMH = 1.0 / 3.6

# One urban sub-cycle: (time s, speed km/h) breakpoints, 195 s total.
_URBAN_CYCLE = [
    (0, 0), (11, 0), (15, 15), (23, 15), (28, 0), (49, 0),
    (61, 32), (85, 32), (96, 0), (117, 0),
    (143, 50), (155, 50), (163, 35), (176, 35), (188, 0), (195, 0),
]

# Extra-urban segment: 400 s, peak 120 km/h.
_EXTRA_URBAN = [
    (0, 0), (20, 0), (41, 70), (91, 70), (111, 50), (180, 50),
    (205, 70), (255, 70), (290, 100), (320, 100), (340, 120), (350, 120),
    (370, 80), (380, 50), (390, 0), (400, 0),
]

LEAD_IDLE_S = 11.0


@dataclass(frozen=True)
class SpeedProfile:
    """Piecewise-linear speed reference: exact at sample points, linear between."""

    times: np.ndarray       # s, strictly increasing
    speeds: np.ndarray      # m/s, >= 0

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.speeds, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise ParameterError("profile needs matching 1-d time/speed arrays")
        if np.any(np.diff(t) <= 0.0):
            raise ParameterError("profile times must be strictly increasing")
        if np.any(v < 0.0):
            raise ParameterError("profile speeds must be non-negative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "speeds", v)
        t.setflags(write=False)
        v.setflags(write=False)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def speed_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.speeds))


def nedc_profile() -> SpeedProfile:
    """The standard driving-cycle trace in m/s, leading idle removed."""
    times = []
    speeds = []
    offset = 0.0
    for rep in range(4):
        for t, v in _URBAN_CYCLE:
            if rep > 0 and t == 0:
                continue   # shared breakpoint with the previous sub-cycle
            times.append(offset + t)
            speeds.append(v * KMH)
        offset += _URBAN_CYCLE[-1][0]
    for t, v in _EXTRA_URBAN:
        if t == 0:
            continue
        times.append(offset + t)
        speeds.append(v * KMH)

    t = np.asarray(times) - LEAD_IDLE_S
    keep = t >= 0.0
    return SpeedProfile(times=t[keep], speeds=np.asarray(speeds)[keep])


def load_profile_csv(path) -> SpeedProfile:
    """Read an external ``t,v`` CSV profile (header required, SI units)."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh.read().splitlines() if ln.strip()]
    if not lines or [c.strip().lower() for c in lines[0].split(",")] != ["t", "v"]:
        raise ParameterError("profile CSV must start with header 't,v'")
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != 2:
            raise ParameterError("profile CSV rows must have 2 columns")
        rows.append((float(cells[0]), float(cells[1])))
    arr = np.asarray(rows)
    return SpeedProfile(times=arr[:, 0], speeds=arr[:, 1])


@dataclass(frozen=True)
class LongitudinalGains:
    kp: float = 0.5
    ki: float = 0.05
    kd: float = 0.0
    integral_limit: float = 10.0


class SpeedPid:
    """PID on speed error, split into throttle/brake, never both at once."""

    def __init__(self, gains: LongitudinalGains | None = None):
        self.gains = gains if gains is not None else LongitudinalGains()
        self.reset()

    def reset(self) -> None:
        self._integral = 0.0
        self._prev_error = None

    def step(self, v: float, v_ref: float, dt: float) -> tuple[float, float]:
        """Return (throttle, brake), each in [0, 1], exactly one nonzero at most."""
        if dt <= 0.0:
            raise ParameterError("dt must be positive")
        g = self.gains
        error = v_ref - v
        self._integral += error * dt
        self._integral = min(g.integral_limit, max(-g.integral_limit, self._integral))
        derivative = 0.0 if self._prev_error is None else (error - self._prev_error) / dt
        self._prev_error = error
        raw = g.kp * error + g.ki * self._integral + g.kd * derivative
        if raw >= 0.0:
            return min(1.0, raw), 0.0
        return 0.0, min(1.0, -raw)


class LongitudinalControl:
    """Throttle/brake source for an episode: constant throttle or speed tracking."""

    def __init__(self, mode: str = "constant", constant_throttle: float = 0.4,
                 target_speed: float | None = None,
                 profile: SpeedProfile | None = None,
                 gains: LongitudinalGains | None = None):
        if mode not in ("constant", "speed", "profile"):
            raise ParameterError(f"unknown longitudinal mode: {mode!r}")
        if mode == "profile" and profile is None:
            profile = nedc_profile()
        if mode == "speed" and target_speed is None:
            raise ParameterError("speed mode needs target_speed")
        self.mode = mode
        self.constant_throttle = float(constant_throttle)
        self.target_speed = target_speed
        self.profile = profile
        self.pid = SpeedPid(gains)

    def begin_episode(self) -> None:
        self.pid.reset()

    def command(self, v: float, t: float, dt: float) -> tuple[float, float]:
        """(throttle, brake) for plant speed ``v`` at episode time ``t``."""
        if self.mode == "constant":
            return self.constant_throttle, 0.0
        v_ref = self.target_speed if self.mode == "speed" else self.profile.speed_at(t)
        return self.pid.step(v, v_ref, dt)

    def spawn_speed(self) -> float:
        """Natural episode start speed for this mode."""
        if self.mode == "speed":
            return float(self.target_speed)
        if self.mode == "profile":
            return self.profile.speed_at(float(self.profile.times[0]))
        return 0.0
