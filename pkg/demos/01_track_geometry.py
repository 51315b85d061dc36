"""Tracks and projections: generate circuits, query poses, perturb waypoints.

Writes track CSVs and a projection table to ./demo_out so the numbers can be
inspected or plotted with any tool.
"""

import math
import os

import numpy as np

from steerlab import (generate_circle, generate_closed_course, load_track,
                      perturb_waypoints, save_track)

OUT = os.path.join(os.path.dirname(__file__), "demo_out")
os.makedirs(OUT, exist_ok=True)

# A 50 m circle sampled every metre: 314 waypoints exactly on the circle.
circle = generate_circle(50.0, 1.0)
print(f"circle: {circle.n_waypoints} waypoints, length {circle.length:.2f} m")
save_track(circle, os.path.join(OUT, "circle_r50.csv"))

# A stadium: two straights joined by 180-degree arcs.
stadium = generate_closed_course([
    {"type": "straight", "length": 120.0},
    {"type": "arc", "radius": 40.0, "angle": math.pi},
    {"type": "straight", "length": 120.0},
    {"type": "arc", "radius": 40.0, "angle": math.pi},
])
print(f"stadium: {stadium.n_waypoints} waypoints, length {stadium.length:.2f} m")
save_track(stadium, os.path.join(OUT, "stadium.csv"))

# Round trip through CSV is exact.
reloaded = load_track(os.path.join(OUT, "circle_r50.csv"))
assert np.array_equal(reloaded.waypoints, circle.waypoints)

# Projection: signed lateral error is positive left of the path direction.
print("\npose -> projection on the circle:")
for query in [(51.0, 0.0), (49.0, 0.0), (0.0, 52.5)]:
    p = circle.project(query)
    print(f"  {query}: lateral={p.lateral_error:+.3f} m, "
          f"arc={p.arc_position:.1f} m, segment={p.nearest_segment_index}")

# Lookahead waypoints in the vehicle frame (x forward, y left).
proj = circle.project((50.0, 0.0))
ahead = circle.waypoints_ahead(proj, (50.0, 0.0, math.pi / 2), 10)
print("\nfirst lookahead points for a tangent pose (curving left):")
print(np.round(ahead[:4], 3))

# Waypoint noise for robustness experiments: deterministic under a seed.
noisy = perturb_waypoints(circle, 0.2, seed=7)
shift = np.hypot(*(noisy.waypoints - circle.waypoints).T)
print(f"\nperturbed by ±0.2 m: mean |shift| {shift.mean():.3f} m, "
      f"max {shift.max():.3f} m")
save_track(noisy, os.path.join(OUT, "circle_r50_noisy.csv"))
