import math

import numpy as np
import pytest

from steerlab.errors import ClosureError, ParameterError, TrackFormatError
from steerlab.track import (Track, generate_circle, generate_closed_course,
                            load_track, perturb_waypoints, save_track)


@pytest.fixture(scope="module")
def circle50():
    return generate_circle(50.0, 1.0)


class TestGenerateCircle:
    def test_r50_point_count_and_radius(self, circle50):
        assert circle50.n_waypoints == 314
        assert circle50.closed
        radii2 = (circle50.waypoints ** 2).sum(axis=1)
        assert np.max(np.abs(radii2 - 50.0 ** 2)) < 1e-9

    def test_spacing_within_one_percent(self, circle50):
        gaps = np.hypot(*np.diff(np.vstack([circle50.waypoints,
                                            circle50.waypoints[:1]]), axis=0).T)
        assert np.all(np.abs(gaps - 1.0) < 0.01)

    def test_spacing_exceeding_circumference_rejected(self):
        with pytest.raises(ParameterError):
            generate_circle(1.0, 7.0)

    def test_bad_radius_rejected(self):
        with pytest.raises(ParameterError):
            generate_circle(-2.0, 1.0)
        with pytest.raises(ParameterError):
            generate_circle(5.0, 0.0)


class TestGenerateClosedCourse:
    def test_stadium_closes(self):
        spec = [
            {"type": "straight", "length": 100.0},
            {"type": "arc", "radius": 50.0, "angle": math.pi},
            {"type": "straight", "length": 100.0},
            {"type": "arc", "radius": 50.0, "angle": math.pi},
        ]
        track = generate_closed_course(spec)
        assert track.closed
        assert abs(track.length - (200.0 + 2.0 * math.pi * 50.0)) < 2.0

    def test_open_spec_rejected(self):
        with pytest.raises(ClosureError):
            generate_closed_course([{"type": "straight", "length": 10.0}])

    def test_four_quarter_arcs_match_circle(self, circle50):
        spec = [{"type": "arc", "radius": 50.0, "angle": math.pi / 2}] * 4
        course = generate_closed_course(spec, spacing=1.0)
        a = course.waypoints - course.waypoints.mean(axis=0)
        b = circle50.waypoints - circle50.waypoints.mean(axis=0)
        # Hausdorff distance between the recentred point sets.
        d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
        hausdorff = max(np.sqrt(d2.min(axis=1)).max(), np.sqrt(d2.min(axis=0)).max())
        assert hausdorff < 1.0 + 1e-6


class TestTrackCsv:
    def test_round_trip_exact(self, circle50, tmp_path):
        path = tmp_path / "circle.csv"
        save_track(circle50, path)
        back = load_track(path)
        assert back.closed == circle50.closed
        assert np.array_equal(back.waypoints, circle50.waypoints)

    def test_two_rows_rejected(self, tmp_path):
        path = tmp_path / "short.csv"
        path.write_text("x,y\n0.0,0.0\n1.0,0.0\n")
        with pytest.raises(TrackFormatError):
            load_track(path)

    def test_non_numeric_token_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,y\n0.0,0.0\n1.0,oops\n2.0,0.0\n")
        with pytest.raises(TrackFormatError, match="line 3"):
            load_track(path)

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "nohdr.csv"
        path.write_text("0.0,0.0\n1.0,0.0\n2.0,0.0\n")
        with pytest.raises(TrackFormatError):
            load_track(path)

    def test_open_flag_round_trip(self, tmp_path):
        track = Track([[0, 0], [1, 0], [2, 0], [3, 0]], closed=False)
        path = tmp_path / "open.csv"
        save_track(track, path)
        assert not load_track(path).closed


class TestProject:
    def test_radial_offset_magnitude(self, circle50):
        proj = circle50.project((51.0, 0.0))
        assert abs(abs(proj.lateral_error) - 1.0) < 2e-4
        # Outside a counterclockwise circle means right of the path.
        assert proj.lateral_error < 0.0
        inside = circle50.project((49.0, 0.0))
        assert inside.lateral_error > 0.0

    def test_on_centerline_zero_error(self, circle50):
        q = circle50.point_at_arc(37.2)
        assert abs(circle50.project(q).lateral_error) < 1e-9

    def test_brute_force_oracle(self, circle50):
        # Densely resample the polyline and compare nearest distances.
        rng = np.random.default_rng(3)
        pts = np.vstack([circle50.waypoints, circle50.waypoints[:1]])
        dense = []
        for a, b in zip(pts[:-1], pts[1:]):
            steps = max(2, int(np.hypot(*(b - a)) / 0.01))
            t = np.linspace(0.0, 1.0, steps, endpoint=False)
            dense.append(a + t[:, None] * (b - a))
        dense = np.vstack(dense)
        for _ in range(1000):
            q = rng.uniform(-70, 70, size=2)
            proj = circle50.project(q)
            brute = np.min(np.hypot(dense[:, 0] - q[0], dense[:, 1] - q[1]))
            assert abs(abs(proj.lateral_error) - brute) < 0.01

    def test_windowed_search_matches_full(self, circle50):
        rng = np.random.default_rng(5)
        hint = 0
        arc = 0.0
        for _ in range(200):
            arc = (arc + rng.uniform(0.0, 0.8)) % circle50.length
            q = circle50.point_at_arc(arc) + rng.normal(scale=0.3, size=2)
            full = circle50.project(q)
            windowed = circle50.project(q, hint=hint)
            hint = windowed.nearest_segment_index
            assert windowed == full

    def test_projection_idempotent_in_error(self, circle50):
        for arc in (0.0, 10.3, 200.7, 313.9):
            proj = circle50.project(circle50.point_at_arc(arc) + np.array([0.9, -0.4]))
            nearest = circle50.point_at_arc(proj.arc_position)
            assert abs(circle50.project(nearest).lateral_error) < 1e-9

    def test_never_worse_than_vertices(self, circle50):
        rng = np.random.default_rng(11)
        for _ in range(200):
            q = rng.uniform(-70, 70, size=2)
            proj = circle50.project(q)
            vertex_best = np.min(np.hypot(circle50.waypoints[:, 0] - q[0],
                                          circle50.waypoints[:, 1] - q[1]))
            assert abs(proj.lateral_error) <= vertex_best + 1e-12

    def test_heading_ref_normalized(self, circle50):
        rng = np.random.default_rng(13)
        for _ in range(100):
            proj = circle50.project(rng.uniform(-60, 60, size=2))
            assert -math.pi < proj.heading_ref <= math.pi


def straight_track():
    pts = np.column_stack((np.arange(0.0, 40.0), np.zeros(40)))
    return Track(pts, closed=False)


class TestWaypointsAhead:
    def test_aligned_straight_all_y_zero(self):
        track = straight_track()
        proj = track.project((3.2, 0.0))
        ahead = track.waypoints_ahead(proj, (3.2, 0.0, 0.0), 8)
        assert ahead.shape == (8, 2)
        assert np.max(np.abs(ahead[:, 1])) < 1e-12
        assert np.all(np.diff(ahead[:, 0]) > 0)

    def test_reversed_pose_x_negative(self):
        track = straight_track()
        proj = track.project((3.2, 0.0))
        ahead = track.waypoints_ahead(proj, (3.2, 0.0, math.pi), 5)
        assert np.all(ahead[:, 0] < 0)

    def test_open_track_pads_with_last(self):
        track = straight_track()
        proj = track.project((38.0, 0.0))
        ahead = track.waypoints_ahead(proj, (38.0, 0.0, 0.0), 6)
        assert ahead.shape == (6, 2)
        assert np.allclose(ahead[-1], ahead[-2])

    def test_circle_curves_one_side(self):
        track = generate_circle(50.0, 1.0)
        proj = track.project((50.0, 0.0))
        # Tangent pose on a counterclockwise circle: heading +y at (50, 0).
        ahead = track.waypoints_ahead(proj, (50.0, 0.0, math.pi / 2), 12)
        assert np.all(ahead[1:, 1] > 0)   # curving left
        # Analytic circle in vehicle frame: y = R - sqrt(R^2 - x^2).
        expect = 50.0 - np.sqrt(50.0 ** 2 - ahead[:, 0] ** 2)
        assert np.max(np.abs(ahead[:, 1] - expect)) < 0.02

    def test_rigid_transform_invariance(self):
        track = generate_circle(50.0, 1.0)
        proj = track.project((50.0, 1.0))
        base = track.waypoints_ahead(proj, (50.0, 1.0, 1.1), 10)
        angle, tx, ty = 0.83, -12.0, 7.5
        c, s = math.cos(angle), math.sin(angle)
        rot = np.array([[c, -s], [s, c]])
        moved = Track(track.waypoints @ rot.T + [tx, ty], closed=True)
        px, py = rot @ [50.0, 1.0] + [tx, ty]
        proj2 = moved.project((px, py))
        shifted = moved.waypoints_ahead(proj2, (px, py, 1.1 + angle), 10)
        assert np.max(np.abs(shifted - base)) < 1e-9

    def test_n_must_be_positive(self):
        track = straight_track()
        proj = track.project((0.0, 0.0))
        with pytest.raises(ParameterError):
            track.waypoints_ahead(proj, (0.0, 0.0, 0.0), 0)


class TestPerturbWaypoints:
    def test_zero_offset_identity(self, circle50):
        out = perturb_waypoints(circle50, 0.0, seed=1)
        assert np.array_equal(out.waypoints, circle50.waypoints)

    def test_same_seed_same_track(self, circle50):
        a = perturb_waypoints(circle50, 0.2, seed=42)
        b = perturb_waypoints(circle50, 0.2, seed=42)
        assert np.array_equal(a.waypoints, b.waypoints)

    def test_uniform_offset_statistics(self):
        base = Track(np.zeros((5000, 2)) + np.arange(5000)[:, None] * [1.0, 0.0],
                     closed=False)
        out = perturb_waypoints(base, 0.2, seed=9)
        offsets = np.abs(out.waypoints - base.waypoints).ravel()
        assert offsets.size == 10_000
        assert offsets.max() <= 0.2
        assert abs(offsets.mean() - 0.1) < 0.005   # 5% of the 0.1 expectation

    def test_small_noise_small_projection_shift(self, circle50):
        noisy = perturb_waypoints(circle50, 0.01, seed=4)
        rng = np.random.default_rng(6)
        for _ in range(50):
            q = circle50.point_at_arc(rng.uniform(0, circle50.length))
            q = q + rng.normal(scale=0.5, size=2)
            shift = abs(circle50.project(q).lateral_error
                        - noisy.project(q).lateral_error)
            assert shift < 0.05


class TestTrackInvariants:
    def test_too_few_waypoints(self):
        with pytest.raises(ParameterError):
            Track([[0, 0], [1, 0]], closed=False)

    def test_duplicate_waypoints(self):
        with pytest.raises(ParameterError):
            Track([[0, 0], [0, 0], [1, 0]], closed=False)

    def test_nonfinite_waypoints(self):
        with pytest.raises(ParameterError):
            Track([[0, 0], [np.nan, 1], [1, 0]], closed=False)

    def test_waypoints_read_only(self, circle50):
        with pytest.raises(ValueError):
            circle50.waypoints[0, 0] = 99.0
