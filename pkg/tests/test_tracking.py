import math
from dataclasses import replace

import numpy as np
import pytest

from emberwatch.errors import DomainError, SingularResidual
from emberwatch.fire import (
    DEFAULT_ELLIPSE,
    FireFront,
    WindFuelState,
    calibrate_spread_rate,
    propagate_front,
    spread_coefficient,
)
from emberwatch.tracking import (
    FilterConfig,
    FullState,
    ObservationVector,
    TrackEstimate,
    adapt_noise,
    innovation_covariance,
    kalman_gain,
    multi_step_predict,
    multi_step_residual_cov,
    multi_step_state,
    observation_jacobian,
    observe,
    predict,
    propagate_covariance,
    state_transition,
    step_track,
    transition_jacobian,
    update,
)
from oracles import finite_difference_jacobian, jacobian_mismatch


def random_state(rng) -> FullState:
    return FullState(
        fire_x=float(rng.uniform(-500, 500)),
        fire_y=float(rng.uniform(-500, 500)),
        uav_x=float(rng.uniform(-500, 500)),
        uav_y=float(rng.uniform(-500, 500)),
        uav_z=float(rng.uniform(10, 200)),
        spread_rate=float(rng.uniform(0.1, 3.0)),
        wind_speed=float(rng.uniform(0.5, 12.0)),
        wind_azimuth=float(rng.uniform(0, 2 * math.pi)),
    )


def make_track(rng=None, pos_var=4.0, pose_var=1.0, weather_var=0.01) -> TrackEstimate:
    rng = rng or np.random.default_rng(0)
    mean = random_state(rng)
    p0 = np.diag([pos_var, pos_var, pose_var, pose_var, pose_var, weather_var, weather_var, weather_var])
    q0 = np.diag([0.01, 0.01, 0.5, 0.5, 0.5, 1e-4, 1e-4, 1e-4])
    r0 = np.diag([1e-4, 1e-4, 0.0025, 0.01, 4e-4])
    return TrackEstimate(mean=mean, covariance=p0, process_noise=q0, observation_noise=r0)


class TestStateTransition:
    def test_flat_spread_leaves_position(self):
        flat = replace(DEFAULT_ELLIPSE, a=1.0, b=0.0, c=0.0, d=0.0, l=0.0)  # LB == 1
        s = FullState(1, 2, 3, 4, 50, 2.0, 5.0, 0.7)
        out = state_transition(s, 1.0, flat)
        assert (out.fire_x, out.fire_y) == (1, 2)

    def test_unit_speed_north(self):
        rate = calibrate_spread_rate(1.0, 5.0, DEFAULT_ELLIPSE)
        s = FullState(0, 0, 3, 4, 50, rate, 5.0, 0.0)
        out = state_transition(s, 1.0, DEFAULT_ELLIPSE)
        assert out.fire_x == pytest.approx(0.0, abs=1e-15)
        assert out.fire_y == pytest.approx(1.0)
        # everything else untouched
        assert (out.uav_x, out.uav_y, out.uav_z) == (3, 4, 50)
        assert (out.spread_rate, out.wind_speed, out.wind_azimuth) == (rate, 5.0, 0.0)

    def test_matches_fire_propagation(self):
        # cross-module check against the ground-truth propagator
        wf = WindFuelState(spread_rate=2.0, wind_speed=5.0, wind_azimuth=math.pi / 3)
        front = FireFront(id=1, position=np.array([7.0, -2.0]), velocity=np.zeros(2))
        front = replace(front, velocity=np.zeros(2))
        import emberwatch.fire as fire

        front = replace(front, velocity=fire.front_velocity(wf, DEFAULT_ELLIPSE))
        moved = propagate_front(front, 0.5, 0.0, wf, DEFAULT_ELLIPSE, np.random.default_rng(0))
        s = FullState(7.0, -2.0, 0, 0, 40, 2.0, 5.0, math.pi / 3)
        out = state_transition(s, 0.5, DEFAULT_ELLIPSE)
        assert out.fire_x == pytest.approx(moved.position[0])
        assert out.fire_y == pytest.approx(moved.position[1])

    def test_uav_pose_control(self):
        s = FullState(0, 0, 3, 4, 50, 0.0, 5.0, 0.0)
        out = state_transition(s, 1.0, DEFAULT_ELLIPSE, uav_pose=(9.0, 8.0, 70.0))
        assert (out.uav_x, out.uav_y, out.uav_z) == (9.0, 8.0, 70.0)


class TestTransitionJacobian:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(21)
        dt = 1.0
        worst = 0.0
        for _ in range(100):
            s = random_state(rng)
            pose = s.uav_pose

            def f(vec):
                out = state_transition(FullState.from_array(vec), dt, DEFAULT_ELLIPSE, uav_pose=pose)
                return out.as_array()

            analytic = transition_jacobian(s, dt, DEFAULT_ELLIPSE)
            numeric = finite_difference_jacobian(f, s.as_array(), h=1e-6)
            worst = max(worst, jacobian_mismatch(analytic, numeric))
        assert worst < 1e-4

    def test_azimuth_sensitivity_at_zero(self):
        rate = calibrate_spread_rate(1.3, 5.0, DEFAULT_ELLIPSE)
        s = FullState(0, 0, 0, 0, 40, rate, 5.0, 0.0)
        dt = 0.5
        F = transition_jacobian(s, dt, DEFAULT_ELLIPSE)
        c = spread_coefficient(rate, 5.0, DEFAULT_ELLIPSE)
        assert F[0, 7] == pytest.approx(c * dt)  # d fire_x / d azimuth = C cos(0) dt
        assert F[1, 7] == pytest.approx(0.0, abs=1e-12)

    def test_zero_dt_identity_on_fire_weather_block(self):
        rng = np.random.default_rng(5)
        s = random_state(rng)
        F = transition_jacobian(s, 0.0, DEFAULT_ELLIPSE)
        keep = [0, 1, 5, 6, 7]
        assert np.allclose(F[np.ix_(keep, keep)], np.eye(5))
        assert np.allclose(F[2:5, :], 0.0)  # pose rows are control input


class TestObservation:
    def test_nadir_angles_zero(self):
        s = FullState(10, 20, 10, 20, 40, 1, 5, 0.3)
        z = observe(s)
        assert z.look_angle_x == 0.0
        assert z.look_angle_y == 0.0
        assert (z.spread_rate, z.wind_speed, z.wind_azimuth) == (1, 5, 0.3)

    def test_forty_five_degrees(self):
        s = FullState(50, 0, 0, 0, 50, 1, 5, 0.3)
        assert observe(s).look_angle_x == pytest.approx(math.pi / 4)

    def test_round_trip_inversion(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            s = random_state(rng)
            z = observe(s)
            qx = s.uav_x + s.uav_z * math.tan(z.look_angle_x)
            qy = s.uav_y + s.uav_z * math.tan(z.look_angle_y)
            assert qx == pytest.approx(s.fire_x, abs=1e-9)
            assert qy == pytest.approx(s.fire_y, abs=1e-9)

    def test_grounded_uav_rejected(self):
        s = FullState(0, 0, 0, 0, 0.0, 1, 5, 0.3)
        with pytest.raises(DomainError):
            observe(s)
        with pytest.raises(DomainError):
            observation_jacobian(s)

    def test_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(23)
        worst = 0.0
        for _ in range(100):
            s = random_state(rng)

            def h(vec):
                return observe(FullState.from_array(vec)).as_array()

            analytic = observation_jacobian(s)
            numeric = finite_difference_jacobian(h, s.as_array(), h=1e-6)
            worst = max(worst, jacobian_mismatch(analytic, numeric))
        assert worst < 1e-4

    def test_nadir_position_sensitivity(self):
        s = FullState(10, 20, 10, 20, 40, 1, 5, 0.3)
        H = observation_jacobian(s)
        assert H[0, 0] == pytest.approx(1 / 40)

    def test_antisymmetry_of_fire_and_uav_columns(self):
        rng = np.random.default_rng(29)
        for _ in range(20):
            s = random_state(rng)
            H = observation_jacobian(s)
            assert H[0, 0] + H[0, 2] == pytest.approx(0.0, abs=1e-15)
            assert H[1, 1] + H[1, 3] == pytest.approx(0.0, abs=1e-15)


class TestPredictUpdate:
    def test_zero_dt_zero_q_keeps_covariance(self):
        track = make_track()
        # pose block empty so the zero pose rows of F do not drop anything
        P = track.covariance.copy()
        P[2:5, :] = 0.0
        P[:, 2:5] = 0.0
        track = replace(track, covariance=P, process_noise=np.zeros((8, 8)))
        out = predict(track, 0.0, DEFAULT_ELLIPSE)
        assert np.allclose(out.covariance, P, atol=1e-12)

    def test_scalar_covariance_propagation(self):
        P = np.array([[1.0]])
        F = np.array([[2.0]])
        Q = np.array([[1.0]])
        assert propagate_covariance(P, F, Q)[0, 0] == pytest.approx(5.0)

    def test_orthogonal_transition_grows_trace(self):
        rng = np.random.default_rng(31)
        for _ in range(25):
            A = rng.normal(size=(8, 8))
            Fq, _ = np.linalg.qr(A)
            M = rng.normal(size=(8, 8))
            P = M @ M.T
            Q = np.diag(rng.uniform(0, 1, size=8))
            out = propagate_covariance(P, Fq, Q)
            assert np.trace(out) >= np.trace(P) - 1e-9

    def test_scalar_update_textbook(self):
        P = np.array([[1.0]])
        H = np.array([[1.0]])
        R = np.array([[1.0]])
        S = innovation_covariance(P, H, R)
        K = kalman_gain(P, H, S)
        assert K[0, 0] == pytest.approx(0.5)
        post = (np.eye(1) - K @ H) @ P
        assert post[0, 0] == pytest.approx(0.5)

    def test_exact_observation_keeps_mean(self):
        track = predict(make_track(), 1.0, DEFAULT_ELLIPSE)
        z = observe(track.mean)
        out, info = update(track, z)
        assert np.allclose(info.innovation, 0.0, atol=1e-12)
        assert np.allclose(out.mean.as_array(), track.mean.as_array(), atol=1e-9)

    def test_posterior_never_exceeds_prior(self):
        rng = np.random.default_rng(37)
        for _ in range(20):
            track = predict(make_track(rng), 1.0, DEFAULT_ELLIPSE)
            z = ObservationVector.from_array(
                observe(track.mean).as_array() + rng.normal(0, 0.05, size=5)
            )
            out, info = update(track, z)
            gap = np.linalg.eigvalsh(info.prior_covariance - out.covariance)
            assert gap.min() >= -1e-9

    def test_update_requires_predict(self):
        track = make_track()
        with pytest.raises(ValueError):
            update(track, observe(track.mean))

    def test_singular_residual_detected(self):
        track = predict(make_track(), 1.0, DEFAULT_ELLIPSE)
        bad = replace(
            track,
            covariance=np.zeros((8, 8)),
            prior_covariance=np.zeros((8, 8)),
            observation_noise=np.zeros((5, 5)),
        )
        with pytest.raises(SingularResidual):
            update(bad, observe(bad.mean))

    def test_covariances_stay_symmetric_psd(self):
        rng = np.random.default_rng(41)
        track = make_track(rng)
        cfg = FilterConfig(alpha_forget=0.9)
        wf = WindFuelState(2.0, 5.0, 1.0)
        for step in range(30):
            pose = track.mean.uav_pose
            z = ObservationVector.from_array(
                observe(track.mean).as_array() + rng.normal(0, 0.02, size=5)
            )
            track, _ = step_track(track, z, 1.0, cfg, DEFAULT_ELLIPSE, uav_pose=pose, step=step)
            for mat in (track.covariance, track.process_noise, track.observation_noise):
                assert np.allclose(mat, mat.T, atol=1e-12)
                assert np.linalg.eigvalsh(mat).min() >= -1e-9


class TestMultiStep:
    def test_one_step_equals_current_residual(self):
        track = predict(make_track(), 1.0, DEFAULT_ELLIPSE)
        H = observation_jacobian(track.prior_mean)
        expected = innovation_covariance(track.prior_covariance, H, track.observation_noise)
        _, S = multi_step_predict(track, 1)
        assert np.allclose(S, expected, atol=1e-12)

    def test_scalar_identity_dynamics(self):
        F = np.array([[1.0]])
        H = np.array([[1.0]])
        P = np.array([[3.0]])
        R = np.array([[2.0]])
        for r in (1, 2, 5, 17):
            assert multi_step_residual_cov(F, H, P, R, r)[0, 0] == pytest.approx(5.0)

    def test_scalar_growing_dynamics(self):
        F = np.array([[2.0]])
        H = np.array([[1.0]])
        P = np.array([[1.0]])
        R = np.array([[1.0]])
        # r=3 applies F twice: 2^2 * 1 * 2^2 + 1 = 17
        assert multi_step_residual_cov(F, H, P, R, 3)[0, 0] == pytest.approx(17.0)

    def test_matrix_power_matches_iterated_multiplication(self):
        track = predict(make_track(), 1.0, DEFAULT_ELLIPSE)
        F = track.transition_matrix
        vec = track.prior_mean.as_array()
        for r in (1, 2, 7, 23):
            iterated = vec.copy()
            for _ in range(r - 1):
                iterated = F @ iterated
            assert np.allclose(multi_step_state(F, vec, r), iterated, atol=1e-10)

    def test_requires_predict_and_positive_steps(self):
        track = make_track()
        with pytest.raises(ValueError):
            multi_step_predict(track, 1)
        track = predict(track, 1.0, DEFAULT_ELLIPSE)
        with pytest.raises(ValueError):
            multi_step_predict(track, 0)


class TestAdaptNoise:
    def _pieces(self, rng):
        track = predict(make_track(rng), 1.0, DEFAULT_ELLIPSE)
        z = ObservationVector.from_array(
            observe(track.mean).as_array() + rng.normal(0, 0.05, size=5)
        )
        post, info = update(track, z)
        residual = z.as_array() - observe(post.mean).as_array()
        return post, info, residual

    def test_alpha_one_is_frozen(self):
        post, info, residual = self._pieces(np.random.default_rng(43))
        out = adapt_noise(
            post, info.innovation, residual, info.gain, info.observation_matrix,
            info.prior_covariance, alpha_forget=1.0,
        )
        assert np.array_equal(out.process_noise, post.process_noise)
        assert np.array_equal(out.observation_noise, post.observation_noise)

    def test_alpha_zero_is_pure_residual(self):
        post, info, residual = self._pieces(np.random.default_rng(47))
        out = adapt_noise(
            post, info.innovation, residual, info.gain, info.observation_matrix,
            info.prior_covariance, alpha_forget=0.0,
        )
        kd = info.gain @ residual
        assert np.allclose(out.process_noise, np.outer(kd, kd), atol=1e-12)

    def test_observation_noise_converges_on_static_scene(self):
        # stationary fire, fixed UAV, noisy measurements with known covariance
        rng = np.random.default_rng(53)
        true_std = np.array([0.01, 0.01, 0.05, 0.1, 0.02])
        mean = FullState(5.0, -3.0, 0.0, 0.0, 60.0, 0.0, 5.0, 1.0)
        track = TrackEstimate(
            mean=mean,
            covariance=np.diag([4.0, 4.0, 1.0, 1.0, 1.0, 0.01, 0.04, 0.0025]),
            process_noise=np.diag([1e-6] * 5 + [1e-8] * 3),
            observation_noise=np.diag((true_std * 2.0) ** 2),  # start 4x off
        )
        cfg = FilterConfig(alpha_forget=0.97)
        truth = FullState(5.0, -3.0, 0.0, 0.0, 60.0, 0.0, 5.0, 1.0)
        for step in range(500):
            z = ObservationVector.from_array(
                observe(truth).as_array() + rng.normal(size=5) * true_std
            )
            track, _ = step_track(track, z, 1.0, cfg, DEFAULT_ELLIPSE, step=step)
        estimated = np.trace(track.observation_noise)
        expected = float(np.sum(true_std**2))
        assert abs(estimated - expected) / expected < 0.25


class TestZeroNoiseConvergence:
    def test_stationary_fire_position_locks_on(self):
        # exact measurements, tiny covariances: position error < 1e-6 m
        truth = FullState(120.0, 80.0, 100.0, 90.0, 50.0, 0.0, 5.0, 0.8)
        start = FullState(117.0, 84.0, 100.0, 90.0, 50.0, 0.05, 4.8, 0.7)
        # tiny covariance floors keep the gain alive; measurements are exact
        track = TrackEstimate(
            mean=start,
            covariance=np.diag([25.0, 25.0, 1e-6, 1e-6, 1e-6, 0.01, 0.04, 0.0025]),
            process_noise=np.diag([1e-8, 1e-8, 1e-12, 1e-12, 1e-12, 1e-10, 1e-10, 1e-10]),
            observation_noise=np.diag([1e-12] * 5),
        )
        cfg = FilterConfig(alpha_forget=1.0)
        for step in range(50):
            z = observe(truth)
            track, _ = step_track(
                track, z, 1.0, cfg, DEFAULT_ELLIPSE, uav_pose=truth.uav_pose, step=step
            )
        err = np.hypot(track.mean.fire_x - truth.fire_x, track.mean.fire_y - truth.fire_y)
        assert err < 1e-6


def test_filter_runs_are_deterministic():
    def run():
        rng = np.random.default_rng(99)
        track = make_track(np.random.default_rng(7))
        cfg = FilterConfig()
        for step in range(20):
            z = ObservationVector.from_array(
                observe(track.mean).as_array() + rng.normal(0, 0.01, size=5)
            )
            track, _ = step_track(track, z, 1.0, cfg, DEFAULT_ELLIPSE, step=step)
        return track

    a, b = run(), run()
    assert np.array_equal(a.mean.as_array(), b.mean.as_array())
    assert np.array_equal(a.covariance, b.covariance)
