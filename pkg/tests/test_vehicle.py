import math

import numpy as np
import pytest

from steerlab.errors import ParameterError, StateError
from steerlab.vehicle import (ControlCommand, LinearModel, VehicleParams,
                              VehicleState, discretize, linear_single_track,
                              mismatched_params, steady_state_yaw_rate,
                              step_plant)

PARAMS = VehicleParams()


def hold_speed_throttle(v: float, p: VehicleParams = PARAMS) -> float:
    """Throttle that balances drag and rolling resistance at speed v."""
    return (p.drag_coeff * v * v + p.roll_resist) / p.drive_gain


class TestCommandAndState:
    def test_command_clamping(self):
        cmd = ControlCommand(steering=1.7, throttle=2.0, brake=-0.5)
        assert cmd.steering == 1.0
        assert cmd.throttle == 1.0
        assert cmd.brake == 0.0
        assert not cmd.rate_mode

    def test_rate_mode_clamping(self):
        cmd = ControlCommand(steering_rate=2.0)
        assert cmd.rate_mode
        assert cmd.steering_rate == pytest.approx(1.5708)

    def test_state_normalizes_yaw(self):
        s = VehicleState(yaw=3 * math.pi)
        assert -math.pi < s.yaw <= math.pi
        assert abs(s.yaw - math.pi) < 1e-12

    def test_state_rejects_nonfinite(self):
        with pytest.raises(StateError):
            VehicleState(x=math.nan)

    def test_params_must_be_positive(self):
        with pytest.raises(ParameterError):
            VehicleParams(mass=-1.0)


class TestStepPlant:
    def test_straight_line_symmetry(self):
        s = VehicleState(speed=15.0)
        for _ in range(100):
            s = step_plant(s, ControlCommand(), PARAMS, 0.05)
        assert s.y == 0.0
        assert s.yaw == 0.0
        # advances roughly v*dt per step minus drag losses
        assert 0.5 * 15.0 * 5.0 < s.x <= 15.0 * 5.0

    def test_steady_state_circle_matches_analytic(self):
        # Near-constant speed: throttle balances resistances each step.
        steer = 0.06
        s = VehicleState(speed=15.0)
        for _ in range(1500):
            cmd = ControlCommand(steering=steer,
                                 throttle=hold_speed_throttle(s.speed))
            s = step_plant(s, cmd, PARAMS, 0.05)
        predicted = steady_state_yaw_rate(PARAMS, s.speed, steer * PARAMS.max_steer)
        assert abs(s.yaw_rate - predicted) / predicted < 0.02

    def test_steering_rate_integration_clamps(self):
        s = VehicleState(speed=10.0, steering=0.95)
        cmd = ControlCommand(steering_rate=1.5708, throttle=0.2)
        s2 = step_plant(s, cmd, PARAMS, 0.05)
        assert s2.steering == 1.0   # 0.95 + 0.0785 clamped

    def test_steering_rate_plain_arithmetic(self):
        s = VehicleState(speed=10.0, steering=0.40)
        s2 = step_plant(s, ControlCommand(steering_rate=0.4, throttle=0.2),
                        PARAMS, 0.05)
        assert s2.steering == pytest.approx(0.42, abs=1e-12)

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ParameterError):
            step_plant(VehicleState(), ControlCommand(), PARAMS, 0.0)

    def test_coasting_speed_non_increasing(self):
        s = VehicleState(speed=20.0)
        speeds = [s.speed]
        for _ in range(400):
            s = step_plant(s, ControlCommand(), PARAMS, 0.05)
            speeds.append(s.speed)
        assert all(b <= a + 1e-12 for a, b in zip(speeds, speeds[1:]))
        assert speeds[-1] >= 0.0

    def test_speed_never_negative_under_braking(self):
        s = VehicleState(speed=3.0)
        for _ in range(100):
            s = step_plant(s, ControlCommand(brake=1.0), PARAMS, 0.05)
        assert s.speed == 0.0

    def test_long_run_stays_finite(self):
        # Bounded random commands for 1e5 steps never go non-finite.
        rng = np.random.default_rng(17)
        s = VehicleState()
        for k in range(100_000):
            if k % 20 == 0:
                cmd = ControlCommand(steering=rng.uniform(-1, 1),
                                     throttle=rng.uniform(0, 1),
                                     brake=rng.uniform(0, 1) if rng.random() < 0.2 else 0.0)
            s = step_plant(s, cmd, PARAMS, 0.05)
        assert all(math.isfinite(v) for v in
                   (s.x, s.y, s.yaw, s.speed, s.side_slip, s.yaw_rate))

    def test_steering_always_clamped(self):
        rng = np.random.default_rng(23)
        s = VehicleState(speed=5.0, steering=0.9)
        for _ in range(300):
            s = step_plant(s, ControlCommand(steering_rate=rng.uniform(-3, 3),
                                             throttle=0.3), PARAMS, 0.05)
            assert -1.0 <= s.steering <= 1.0

    def test_low_speed_launch_is_graceful(self):
        s = VehicleState(speed=0.0)
        for _ in range(200):
            s = step_plant(s, ControlCommand(steering=0.5, throttle=0.5), PARAMS, 0.05)
        assert math.isfinite(s.yaw_rate)
        assert s.speed > 5.0


class TestLinearModel:
    def test_symmetric_vehicle_cancellation(self):
        p = VehicleParams(dist_front_axle=1.3, dist_rear_axle=1.3,
                          cornering_stiffness_front=90000.0,
                          cornering_stiffness_rear=90000.0)
        model = linear_single_track(p, 10.0)
        assert model.A[1][3] == pytest.approx(-1.0, abs=1e-15)

    def test_doubling_speed_halves_damping(self):
        m1 = linear_single_track(PARAMS, 10.0)
        m2 = linear_single_track(PARAMS, 20.0)
        assert m2.A[1][1] == pytest.approx(m1.A[1][1] / 2.0)
        assert m2.A[3][3] == pytest.approx(m1.A[3][3] / 2.0)

    def test_default_vehicle_stable_at_15(self):
        model = linear_single_track(PARAMS, 15.0)
        # y and yaw rows are pure integrators; the (beta, yaw-rate) core
        # must be strictly stable.
        core = model.A[np.ix_([1, 3], [1, 3])]
        assert np.all(np.real(np.linalg.eigvals(core)) < 0.0)

    def test_rejects_nonpositive_speed(self):
        with pytest.raises(ParameterError):
            linear_single_track(PARAMS, 0.0)

    def test_mismatched_params(self):
        m = mismatched_params(PARAMS)
        assert m.mass == pytest.approx(PARAMS.mass * 1.10)
        assert m.cornering_stiffness_front == pytest.approx(
            PARAMS.cornering_stiffness_front * 0.85)
        assert m.max_steer == PARAMS.max_steer


class TestDiscretize:
    def test_zero_a_identity(self):
        model = LinearModel(A=np.zeros((4, 4)), B=np.arange(4.0)[:, None],
                            v_nominal=10.0)
        d = discretize(model, 0.05)
        assert np.allclose(d.Ad, np.eye(4), atol=1e-15)
        assert np.allclose(d.Bd, model.B * 0.05, atol=1e-15)

    def test_double_integrator_closed_form(self):
        A = np.array([[0.0, 1.0], [0.0, 0.0]])
        B = np.array([[0.0], [1.0]])
        d = discretize(LinearModel(A=A, B=B, v_nominal=1.0), 0.1)
        assert np.allclose(d.Ad, [[1.0, 0.1], [0.0, 1.0]], atol=1e-15)
        assert np.allclose(d.Bd, [[0.005], [0.1]], atol=1e-15)

    def test_matches_rk4_substepping(self):
        # Independent integration oracle: 20 RK4 substeps of the augmented
        # LTI system reproduce the ZOH matrices to 1e-6 per entry.
        model = linear_single_track(PARAMS, 12.0)
        d = discretize(model, 0.05)
        h = 0.05 / 20
        Ad = np.eye(4)
        Bd = np.zeros((4, 1))

        def deriv(ad, bd):
            return model.A @ ad, model.A @ bd + model.B

        for _ in range(20):
            k1a, k1b = deriv(Ad, Bd)
            k2a, k2b = deriv(Ad + 0.5 * h * k1a, Bd + 0.5 * h * k1b)
            k3a, k3b = deriv(Ad + 0.5 * h * k2a, Bd + 0.5 * h * k2b)
            k4a, k4b = deriv(Ad + h * k3a, Bd + h * k3b)
            Ad = Ad + h / 6.0 * (k1a + 2 * k2a + 2 * k3a + k4a)
            Bd = Bd + h / 6.0 * (k1b + 2 * k2b + 2 * k3b + k4b)
        assert np.max(np.abs(d.Ad - Ad)) < 1e-6
        assert np.max(np.abs(d.Bd - Bd)) < 1e-6

    def test_euler_substepping_consistent_at_its_own_order(self):
        # A first-order Euler oracle converges to the same matrices at O(h).
        model = linear_single_track(PARAMS, 12.0)
        d = discretize(model, 0.05)
        diffs = []
        for n in (200, 2000):
            h = 0.05 / n
            Ad = np.eye(4)
            for _ in range(n):
                Ad = Ad + h * (model.A @ Ad)
            diffs.append(np.max(np.abs(d.Ad - Ad)))
        assert diffs[1] < diffs[0] / 5.0   # shrinks ~linearly with h
        assert diffs[1] < 2e-4


class TestLinearNonlinearConsistency:
    def test_small_angle_one_step_match(self):
        v = 12.0
        model = discretize(linear_single_track(PARAMS, v), 0.05)
        rng = np.random.default_rng(31)
        for _ in range(20):
            steer_phys = rng.uniform(-0.009, 0.009)
            x0 = np.array([0.0, rng.uniform(-0.005, 0.005), 0.0,
                           rng.uniform(-0.01, 0.01)])
            lin = model.Ad @ x0 + model.Bd[:, 0] * steer_phys

            s = VehicleState(speed=v, side_slip=x0[1], yaw_rate=x0[3])
            cmd = ControlCommand(steering=steer_phys / PARAMS.max_steer,
                                 throttle=hold_speed_throttle(v))
            s2 = step_plant(s, cmd, PARAMS, 0.05)
            nonlin = np.array([s2.y, s2.side_slip, s2.yaw, s2.yaw_rate])

            scale = max(np.max(np.abs(nonlin)), 1e-6)
            assert np.max(np.abs(lin - nonlin)) / scale < 0.05
