import numpy as np
import pytest

from lanebench.geometry import ImageFrame
from lanebench.lanes import EGO_LEFT, EGO_RIGHT, LaneRepresentation
from lanebench.detectors import OracleDetector
from lanebench.detectors.base import DetectorHandle
from lanebench.metrics import classify_outcome, lateral_deviation
from lanebench.simulator import (MAX_STEER_RAD, PurePursuitController, Scenario,
                                 VehicleState, bicycle_step, lateral_control,
                                 run_scenario)


def test_bicycle_zero_steer_straight():
    s = VehicleState(v=10.0)
    out = bicycle_step(s, 0.0, 0.1, 2.65)
    assert out.x == pytest.approx(1.0)
    assert out.y == 0.0 and out.psi == 0.0


def test_bicycle_zero_speed_holds():
    s = VehicleState(v=0.0, x=3.0, y=1.0, psi=0.2)
    out = bicycle_step(s, 0.1, 0.05, 2.65)
    assert (out.x, out.y, out.psi) == (3.0, 1.0, 0.2)


def test_bicycle_constant_steer_circle():
    wheelbase = 2.65
    delta = 0.08
    v = 10.0
    dt = 0.01
    radius = wheelbase / np.tan(delta)
    state = VehicleState(v=v)
    xs, ys = [], []
    steps = int(np.ceil(2 * np.pi * radius / (v * dt))) + 5
    for _ in range(steps):
        state = bicycle_step(state, delta, dt, wheelbase)
        xs.append(state.x)
        ys.append(state.y)
    xs, ys = np.asarray(xs), np.asarray(ys)
    measured = (xs.max() - xs.min() + ys.max() - ys.min()) / 4.0
    assert abs(measured - radius) / radius < 1e-3


def test_bicycle_clamps_to_physical_limit():
    out = bicycle_step(VehicleState(v=5.0), 10.0, 0.01, 2.65)
    assert out.delta == pytest.approx(MAX_STEER_RAD)


def test_zero_steer_displacement_exact():
    scenario = Scenario()
    dt = 0.01
    state = VehicleState(v=17.3)
    n = 250
    for _ in range(n):
        state = bicycle_step(state, 0.0, dt, scenario.wheelbase)
    assert abs(state.x - 17.3 * dt * n) < 1e-9


def test_pure_pursuit_centered_straight_gives_zero():
    fwd = np.linspace(2.0, 40.0, 20)
    left = np.stack([fwd, np.full(20, 1.8)], axis=1)
    right = np.stack([fwd, np.full(20, -1.8)], axis=1)
    delta = lateral_control({EGO_LEFT: left, EGO_RIGHT: right},
                            VehicleState(v=16.0))
    assert delta == pytest.approx(0.0, abs=1e-12)


def test_pure_pursuit_steers_toward_offset_path():
    fwd = np.linspace(2.0, 40.0, 20)
    # Path shifted 0.5 m to the left: expect a left (positive) command.
    left = np.stack([fwd, np.full(20, 2.3)], axis=1)
    right = np.stack([fwd, np.full(20, -1.3)], axis=1)
    delta = lateral_control({EGO_LEFT: left, EGO_RIGHT: right},
                            VehicleState(v=16.0))
    assert delta > 0.0


def test_pure_pursuit_circle_matches_geometry():
    radius = 60.0
    wheelbase = 2.65
    ang = np.linspace(0.05, 0.9, 60)
    # Circle through the origin, curving left, vehicle tangent at origin.
    fwd = radius * np.sin(ang)
    left = radius * (1.0 - np.cos(ang))
    path = {EGO_LEFT: np.stack([fwd, left + 1.8], axis=1),
            EGO_RIGHT: np.stack([fwd, left - 1.8], axis=1)}
    delta = lateral_control(path, VehicleState(v=16.0), wheelbase=wheelbase)
    expect = np.arctan(wheelbase / radius)
    assert abs(delta - expect) / expect < 0.10


def test_single_line_mode_offsets_by_half_lane():
    fwd = np.linspace(2.0, 40.0, 20)
    left_only = {EGO_LEFT: np.stack([fwd, np.full(20, 1.8)], axis=1)}
    ctrl = PurePursuitController(2.65, 3.6)
    path = ctrl.desired_path(left_only)
    np.testing.assert_allclose(path[:, 1], 0.0, atol=1e-12)


def test_controller_holds_steer_without_lines():
    state = VehicleState(v=10.0, delta=0.01)
    ctrl = PurePursuitController(2.65, 3.6)
    delta, degraded = ctrl.steer_command({}, state)
    assert degraded and delta == pytest.approx(0.01)


def test_scenario_rate_multiple_validation():
    with pytest.raises(ValueError):
        Scenario(detect_rate_hz=20.0, actuate_rate_hz=90.0)


def test_benign_oracle_run_stays_centered(scenario, camera, scene):
    traj = run_scenario(scenario, OracleDetector(scene, camera), camera)
    assert traj.valid
    assert traj.max_abs_offset() <= 0.05
    assert len(traj.times) == scenario.duration_frames + 1
    assert traj.times[-1] == pytest.approx(2.5)


def test_offset_recovery(camera):
    sc = Scenario(initial_offset=0.5)
    traj = run_scenario(sc, OracleDetector(sc.scene(), camera), camera)
    inside = traj.times <= 2.5
    assert np.abs(traj.lateral_offsets[inside][-1]) < 0.2


def test_steer_rate_limit_every_substep(scenario, camera, scene):
    traj = run_scenario(scenario, OracleDetector(scene, camera), camera)
    limit = np.deg2rad(scenario.steer_rate_limit_deg) + 1e-12
    deltas = np.abs(np.diff(np.concatenate([[0.0], traj.steer_trace])))
    assert np.all(deltas <= limit)
    assert traj.steer_trace.size == scenario.duration_frames * traj.substeps_per_frame
    assert traj.substeps_per_frame == 5


class HardLeftDetector(DetectorHandle):
    """Fixed detections whose midline sits 1.2 m left of the true center."""

    family = "points"

    def __init__(self, cam, scenario):
        self.input_size = (cam.image_width, cam.image_height)
        self.cam = cam
        self.hs = scenario.h_samples(cam, self.input_size)

    def detect(self, frame):
        from lanebench.geometry import project_ground_to_image
        lines = []
        for r in (-3.0, 0.6):  # camera-ground right offsets of the fake pair
            pts = []
            for v in self.hs:
                fwd = self.cam.ground_to_image[1, 2] / (v - self.cam.horizon_row())
                px = project_ground_to_image(self.cam, np.array([r, fwd]))
                pts.append([px[0], v])
            lines.append(np.asarray(pts))
        return LaneRepresentation(points=lines)


def test_forced_left_failure_classified(scenario, camera, scene):
    det = HardLeftDetector(camera, scenario)
    attacked = run_scenario(scenario, det, camera)
    benign = run_scenario(scenario, OracleDetector(scene, camera), camera)
    trace = lateral_deviation(attacked, benign)
    out = classify_outcome(trace, "left")
    assert out.untargeted and out.targeted
    assert trace.deviation.min() < -0.735  # deviates left


def test_run_scenario_bit_reproducible(scenario, camera, scene):
    t1 = run_scenario(scenario, OracleDetector(scene, camera), camera, seed=3)
    t2 = run_scenario(scenario, OracleDetector(scene, camera), camera, seed=3)
    np.testing.assert_array_equal(t1.lateral_offsets, t2.lateral_offsets)
    np.testing.assert_array_equal(t1.steer_trace, t2.steer_trace)


def test_benign_run_ignores_attack_field(scenario, camera, scene):
    from lanebench.artifacts import DrawnLine
    line = DrawnLine(start=(10.0, -0.2), end=(30.0, 0.2), width=0.1)
    with_attack = Scenario(attack=line)
    a = run_scenario(with_attack.without_attack(),
                     OracleDetector(scene, camera), camera)
    b = run_scenario(scenario, OracleDetector(scene, camera), camera)
    np.testing.assert_array_equal(a.lateral_offsets, b.lateral_offsets)


def test_warp_mode_agrees_with_direct(camera):
    sc_direct = Scenario(duration_frames=20)
    sc_warp = Scenario(duration_frames=20, render_mode="warp")
    from lanebench.detectors import ClassicalDetector
    size = (camera.image_width, camera.image_height)

    def line_positions(sc):
        det = ClassicalDetector(size, h_samples=sc.h_samples(camera, size))
        rows = sc.h_samples(camera, size)[5:]
        traj = run_scenario(sc, det, camera)
        return traj, rows

    td, _ = line_positions(sc_direct)
    tw, _ = line_positions(sc_warp)
    assert td.valid and tw.valid
    # Agreement at the trajectory level implies the rendered lane lines fed
    # the controller consistently; also compare detected lines on frame 10.
    assert np.abs(td.lateral_offsets - tw.lateral_offsets).max() < 0.08

    from lanebench.scene import render_scene
    from lanebench.geometry import synthesize_frame
    state0 = sc_direct.initial_state()
    scene = sc_direct.scene()
    base = render_scene(scene, camera, state0)
    det = ClassicalDetector(size, h_samples=sc_direct.h_samples(camera, size))
    for t in (0.25, 0.5, 1.0):
        fwd = 16.0 * t
        warped = synthesize_frame(camera, base, (fwd, 0.0, 0.0))
        direct = render_scene(scene, camera, VehicleState(x=fwd, v=16.0))
        diffs = []
        rows_d, xs_d = det._row_peaks(det._response(direct.gray()))
        rows_w, xs_w = det._row_peaks(det._response(warped.gray()))
        for row in np.intersect1d(rows_d, rows_w):
            for half in (slice(0, 160), slice(160, 320)):
                cand_d = xs_d[(rows_d == row) & (xs_d >= half.start)
                              & (xs_d < half.stop)]
                cand_w = xs_w[(rows_w == row) & (xs_w >= half.start)
                              & (xs_w < half.stop)]
                if cand_d.size == 1 and cand_w.size == 1:
                    diffs.append(float(cand_d[0] - cand_w[0]))
        diffs = np.asarray(diffs)
        assert diffs.size >= 20  # plenty of rows agree at every sampled time
        # 2 px is the interpolation error bound; individual rows at the
        # resampling blur limit may exceed it slightly, the RMS may not.
        assert float(np.sqrt(np.mean(diffs ** 2))) <= 2.0
        assert float(np.median(np.abs(diffs))) <= 1.0


def test_speed_trace_replay(camera):
    sc = Scenario(speed_trace=((0.0, 10.0), (1.0, 20.0)))
    scene = sc.scene()
    traj = run_scenario(sc, OracleDetector(scene, camera), camera)
    # Straight centered drive: zero steering, so displacement is the exact
    # substep sum of the replayed speeds: 10 * 1.0 + 20 * 1.5.
    assert abs(traj.states[-1].x - 40.0) < 1e-9
    assert traj.states[10].v == 10.0   # t = 0.5 s
    assert traj.states[30].v == 20.0   # t = 1.5 s


def test_speed_at_hold_semantics():
    sc = Scenario(speed_trace=((0.0, 12.0), (2.0, 8.0)))
    assert sc.speed_at(0.0) == 12.0
    assert sc.speed_at(1.99) == 12.0
    assert sc.speed_at(2.0) == 8.0
    assert Scenario(speed_mps=17.0).speed_at(5.0) == 17.0
    with pytest.raises(ValueError):
        Scenario(speed_trace=((1.0, 5.0), (1.0, 6.0)))


def test_invalid_flag_on_detector_failure(scenario, camera):
    class FailingDetector(DetectorHandle):
        family = "poly"
        def __init__(self):
            self.input_size = (camera.image_width, camera.image_height)
            self.calls = 0
        def detect(self, frame):
            from lanebench.detectors.base import DetectorError
            self.calls += 1
            if self.calls > 3:
                raise DetectorError("synthetic failure")
            return LaneRepresentation(polynomials=[[0.0, 0.0, 0.0, 160.0]])

    traj = run_scenario(scenario, FailingDetector(), camera)
    assert not traj.valid
    assert len(traj.times) < scenario.duration_frames + 1
