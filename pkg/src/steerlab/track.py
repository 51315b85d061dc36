"""Waypoint tracks: generators, CSV persistence, pose projection, robustness noise.

A track is an ordered polyline of waypoints, optionally closed. All geometry
queries (projection, lookahead, arc sampling) run against the polyline
segments, never against vertices alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ClosureError, ParameterError, TrackFormatError

DEFAULT_SPACING = 1.0
DEFAULT_CORRIDOR_HALF_WIDTH = 1.5
PROJECTION_WINDOW = 20


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class PathProjection:
    """Result of projecting a position onto a track.

    ``lateral_error`` is signed: positive means the position lies to the left
    of the local path direction. ``arc_position`` is measured in metres from
    the first waypoint along the polyline.
    """

    lateral_error: float
    heading_ref: float
    arc_position: float
    nearest_segment_index: int


class Track:
    """Ordered waypoint polyline, immutable after construction.

    Safe to share between threads; the projection-window hint is owned by the
    caller (pass ``hint=`` to :meth:`project`), not by the track.
    """

    def __init__(self, waypoints, closed: bool,
                 corridor_half_width: float = DEFAULT_CORRIDOR_HALF_WIDTH):
        pts = np.array(waypoints, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
            raise ParameterError("track needs at least 3 (x, y) waypoints")
        if not np.all(np.isfinite(pts)):
            raise ParameterError("waypoint coordinates must be finite")
        if corridor_half_width <= 0.0:
            raise ParameterError("corridor_half_width must be positive")

        if closed:
            starts = pts
            ends = np.roll(pts, -1, axis=0)
        else:
            starts = pts[:-1]
            ends = pts[1:]
        vec = ends - starts
        seg_len = np.hypot(vec[:, 0], vec[:, 1])
        if np.any(seg_len <= 0.0):
            raise ParameterError("consecutive waypoints must be distinct")

        self.waypoints = pts
        self.closed = bool(closed)
        self.corridor_half_width = float(corridor_half_width)
        self._seg_start = starts
        self._seg_vec = vec
        self._seg_len = seg_len
        self._seg_len2 = seg_len * seg_len
        self._cum = np.concatenate(([0.0], np.cumsum(seg_len)))
        self.length = float(self._cum[-1])
        for arr in (self.waypoints, self._seg_start, self._seg_vec,
                    self._seg_len, self._seg_len2, self._cum):
            arr.setflags(write=False)

    @property
    def n_waypoints(self) -> int:
        return self.waypoints.shape[0]

    @property
    def n_segments(self) -> int:
        return self._seg_start.shape[0]

    def project(self, position: Sequence[float], hint: int | None = None,
                window: int = PROJECTION_WINDOW) -> PathProjection:
        """Project a world position onto the nearest polyline segment.

        With ``hint`` set, only segments within ``window`` indices of the hint
        are searched (wrapping on closed tracks); callers stepping an episode
        pass the previous ``nearest_segment_index`` for O(1) amortized cost.
        """
        q = np.asarray(position, dtype=float)
        n = self.n_segments
        if hint is None or window >= n:
            idx = np.arange(n)
        else:
            offs = np.arange(-window, window + 1)
            if self.closed:
                idx = (hint + offs) % n
            else:
                idx = np.clip(hint + offs, 0, n - 1)
            idx = np.unique(idx)

        starts = self._seg_start[idx]
        vec = self._seg_vec[idx]
        w = q[None, :] - starts
        t = np.clip((w * vec).sum(axis=1) / self._seg_len2[idx], 0.0, 1.0)
        closest = starts + t[:, None] * vec
        diff = q[None, :] - closest
        d2 = (diff * diff).sum(axis=1)
        k = int(np.argmin(d2))
        seg = int(idx[k])

        tangent = self._seg_vec[seg]
        offset = diff[k]
        cross = tangent[0] * offset[1] - tangent[1] * offset[0]
        dist = math.sqrt(d2[k])
        lateral = math.copysign(dist, cross) if dist > 0.0 else 0.0
        heading = math.atan2(tangent[1], tangent[0])
        arc = float(self._cum[seg] + t[k] * self._seg_len[seg])
        return PathProjection(lateral, heading, arc, seg)

    def point_at_arc(self, s: float) -> np.ndarray:
        """World point at arc position ``s`` (wraps on closed tracks)."""
        if self.closed:
            s = s % self.length
        else:
            s = min(max(s, 0.0), self.length)
        seg = int(np.searchsorted(self._cum, s, side="right")) - 1
        seg = min(max(seg, 0), self.n_segments - 1)
        t = (s - self._cum[seg]) / self._seg_len[seg]
        return self._seg_start[seg] + t * self._seg_vec[seg]

    def waypoints_ahead(self, projection: PathProjection,
                        pose: Sequence[float], n: int) -> np.ndarray:
        """The next ``n`` waypoints past the projection, in the vehicle frame.

        The vehicle frame has x forward and y left of ``pose = (x, y, yaw)``.
        Open tracks pad by repeating the last waypoint so the output shape is
        always ``(n, 2)``.
        """
        if n < 1:
            raise ParameterError("n must be >= 1")
        first = projection.nearest_segment_index + 1
        count = self.n_waypoints
        if self.closed:
            idx = (first + np.arange(n)) % count
        else:
            idx = np.minimum(first + np.arange(n), count - 1)
        pts = self.waypoints[idx]
        x, y, yaw = pose
        c, s = math.cos(yaw), math.sin(yaw)
        dx = pts[:, 0] - x
        dy = pts[:, 1] - y
        return np.column_stack((c * dx + s * dy, -s * dx + c * dy))


def generate_circle(radius: float, spacing: float = DEFAULT_SPACING,
                    corridor_half_width: float = DEFAULT_CORRIDOR_HALF_WIDTH) -> Track:
    """Closed circular track of the given radius centered at the origin.

    Waypoints lie exactly on the circle, ordered counterclockwise starting
    from (radius, 0); the waypoint count is chosen so consecutive spacing is
    within 1% of the request.
    """
    if radius <= 0.0:
        raise ParameterError("radius must be positive")
    if spacing <= 0.0 or spacing >= 2.0 * math.pi * radius:
        raise ParameterError("spacing must be in (0, circumference)")
    n = int(round(2.0 * math.pi * radius / spacing))
    if n < 3:
        raise ParameterError("spacing too coarse: fewer than 3 waypoints")
    ang = 2.0 * math.pi * np.arange(n) / n
    pts = np.column_stack((radius * np.cos(ang), radius * np.sin(ang)))
    return Track(pts, closed=True, corridor_half_width=corridor_half_width)


def generate_closed_course(segments: Iterable[dict], spacing: float = DEFAULT_SPACING,
                           corridor_half_width: float = DEFAULT_CORRIDOR_HALF_WIDTH) -> Track:
    """Closed track built from straight and arc segments.

    Each segment is a dict: ``{"type": "straight", "length": metres}`` or
    ``{"type": "arc", "radius": metres, "angle": radians}`` where a positive
    angle turns left. The course starts at the origin heading +x and must
    return to the start within one spacing unit, else :class:`ClosureError`
    is raised. Self-intersection is not checked.
    """
    if spacing <= 0.0:
        raise ParameterError("spacing must be positive")
    specs = list(segments)
    if not specs:
        raise ParameterError("empty segment list")

    # Piecewise-analytic centerline: (kind, params, length) per segment.
    pieces = []
    x, y, heading = 0.0, 0.0, 0.0
    for spec in specs:
        kind = spec.get("type")
        if kind == "straight":
            length = float(spec["length"])
            if length <= 0.0:
                raise ParameterError("straight length must be positive")
            pieces.append(("straight", (x, y, heading), length))
            x += length * math.cos(heading)
            y += length * math.sin(heading)
        elif kind == "arc":
            radius = float(spec["radius"])
            angle = float(spec["angle"])
            if radius <= 0.0 or angle == 0.0:
                raise ParameterError("arc needs positive radius and nonzero angle")
            side = 1.0 if angle > 0.0 else -1.0
            cx = x - side * radius * math.sin(heading)
            cy = y + side * radius * math.cos(heading)
            pieces.append(("arc", (cx, cy, heading, radius, side), radius * abs(angle)))
            heading = heading + angle
            x = cx + side * radius * math.sin(heading)
            y = cy - side * radius * math.cos(heading)
        else:
            raise ParameterError(f"unknown segment type: {kind!r}")

    total = sum(p[2] for p in pieces)
    gap = math.hypot(x, y)
    if gap > spacing:
        raise ClosureError(f"course endpoint misses start by {gap:.3f} m")

    def point_at(s: float) -> tuple[float, float]:
        for kind, params, length in pieces:
            if s > length:   # sampled arcs always satisfy s < total
                s -= length
                continue
            if kind == "straight":
                px, py, h = params
                return px + s * math.cos(h), py + s * math.sin(h)
            cx, cy, h0, radius, side = params
            h = h0 + side * s / radius
            return (cx + side * radius * math.sin(h),
                    cy - side * radius * math.cos(h))
        return x, y   # endpoint, reachable only through float round-off

    n = int(total / spacing)
    if n < 3:
        raise ParameterError("course too short for 3 waypoints at this spacing")
    pts = np.array([point_at(k * total / n) for k in range(n)])
    return Track(pts, closed=True, corridor_half_width=corridor_half_width)


def save_track(track: Track, path) -> None:
    """Write a track as CSV: header ``x,y``, 17-significant-digit decimals."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# closed={'true' if track.closed else 'false'}\n")
        fh.write("x,y\n")
        for x, y in track.waypoints:
            fh.write(f"{float(x)!r},{float(y)!r}\n")


def load_track(path, corridor_half_width: float = DEFAULT_CORRIDOR_HALF_WIDTH) -> Track:
    """Read a track CSV written by :func:`save_track` (or any ``x,y`` CSV)."""
    closed = True
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header_seen = False
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            body = stripped[1:].strip().replace(" ", "")
            if body.startswith("closed="):
                closed = body[len("closed="):].lower() == "true"
            continue
        if not header_seen:
            if [c.strip().lower() for c in stripped.split(",")] != ["x", "y"]:
                raise TrackFormatError(f"line {lineno}: expected header 'x,y'")
            header_seen = True
            continue
        cells = stripped.split(",")
        if len(cells) != 2:
            raise TrackFormatError(f"line {lineno}: expected 2 columns, got {len(cells)}")
        try:
            rows.append((float(cells[0]), float(cells[1])))
        except ValueError as exc:
            raise TrackFormatError(f"line {lineno}: non-numeric value") from exc
    if not header_seen:
        raise TrackFormatError("missing 'x,y' header")
    if len(rows) < 3:
        raise TrackFormatError(f"need at least 3 waypoints, found {len(rows)}")
    return Track(np.array(rows), closed=closed, corridor_half_width=corridor_half_width)


def perturb_waypoints(track: Track, max_offset: float, seed: int) -> Track:
    """Shift every coordinate by an independent uniform sample in [-max_offset, max_offset]."""
    if max_offset < 0.0:
        raise ParameterError("max_offset must be >= 0")
    if max_offset == 0.0:
        return Track(track.waypoints.copy(), track.closed, track.corridor_half_width)
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-max_offset, max_offset, size=track.waypoints.shape)
    return Track(track.waypoints + noise, track.closed, track.corridor_half_width)
