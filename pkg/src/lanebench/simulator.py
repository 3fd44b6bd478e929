"""Closed-loop lane-centering simulation.

Per detection frame (20 Hz by default): render or warp the camera view,
adapt it to the detector input, detect, canonicalize and keep the ego pair,
project to the ground plane, compute the pure-pursuit steering command, then
run five 100 Hz actuation substeps that each move the steering angle by at
most the configured rate limit and advance a kinematic bicycle model.
"""

import numpy as np
from dataclasses import dataclass, field, replace
from functools import lru_cache

from .geometry import (CameraModel, ImageFrame, adapt_crop, detector_transform,
                       project_image_to_ground, synthesize_frame)
from .lanes import EGO_LEFT, EGO_RIGHT, canonicalize, filter_ego
from .scene import SceneGeometry, render_scene
from .artifacts import RoadPatch, DrawnLine, AttackArea
from .detectors.base import DetectorError, DetectorHandle

__all__ = [
    "VehicleState",
    "CameraConfig",
    "Scenario",
    "Trajectory",
    "PurePursuitController",
    "bicycle_step",
    "lateral_control",
    "run_scenario",
]

MAX_STEER_RAD = np.deg2rad(30.0)
STEER_RATE_LIMIT_RAD = np.deg2rad(0.25)  # per 100 Hz actuation message


@dataclass(frozen=True)
class VehicleState:
    """Planar pose plus speed and current steering angle."""

    x: float = 0.0
    y: float = 0.0
    psi: float = 0.0
    v: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if abs(self.delta) > MAX_STEER_RAD + 1e-12:
            raise ValueError("steering angle beyond the physical limit")


def bicycle_step(state: VehicleState, steer: float, dt: float,
                 wheelbase: float) -> VehicleState:
    """One kinematic bicycle update with the commanded steering angle.

    The caller is responsible for rate-limiting ``steer``; it is clamped to
    the physical steering limit here.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    delta = float(np.clip(steer, -MAX_STEER_RAD, MAX_STEER_RAD))
    psi = state.psi + (state.v / wheelbase) * np.tan(delta) * dt
    x = state.x + state.v * np.cos(state.psi) * dt
    y = state.y + state.v * np.sin(state.psi) * dt
    return VehicleState(x=x, y=y, psi=psi, v=state.v, delta=delta)


@dataclass(frozen=True)
class CameraConfig:
    image_w: int = 320
    image_h: int = 192
    focal_px: float = 280.0
    height_m: float = 1.2
    cx: float | None = None
    cy: float | None = None
    crop: tuple[int, int, int, int] | None = None

    def __post_init__(self):
        if self.crop is not None:
            object.__setattr__(self, "crop", tuple(self.crop))

    def build(self) -> CameraModel:
        return _build_camera(self)


@lru_cache(maxsize=16)
def _build_camera(cfg: CameraConfig) -> CameraModel:
    # One CameraModel per config so per-camera projection caches stay warm.
    return CameraModel.forward_facing(
        cfg.image_w, cfg.image_h, cfg.focal_px, cfg.height_m,
        cx=cfg.cx, cy=cfg.cy, crop_rect=cfg.crop)


@dataclass(frozen=True)
class Scenario:
    """One driving setup: lane geometry, speeds, rates and an optional attack."""

    name: str = "straight"
    lane_width: float = 3.6
    length_m: float = 200.0
    curve_radius: float = 0.0  # 0 = straight; positive bends left
    speed_mps: float = 16.0
    speed_trace: tuple = ()  # ((t_s, v_mps), ...) held until the next breakpoint
    wheelbase: float = 2.65
    duration_frames: int = 50
    generation_frames: int = 20
    detect_rate_hz: float = 20.0
    actuate_rate_hz: float = 100.0
    initial_offset: float = 0.0  # meters right of the lane center
    initial_heading: float = 0.0
    attack: RoadPatch | DrawnLine | None = None
    attack_area: AttackArea = field(default_factory=AttackArea)
    render_mode: str = "direct"  # or "warp"
    camera: CameraConfig = field(default_factory=CameraConfig)
    road_gray: float = 96.0
    sky_gray: float = 168.0
    line_gray: float = 255.0
    line_width_m: float = 0.10
    lookahead_time_s: float = 0.75
    lookahead_min_m: float = 5.0
    detect_threshold: float = 0.5
    h_row_margin: int = 12
    h_row_step: int = 3
    steer_rate_limit_deg: float = 0.25  # per actuation message

    def __post_init__(self):
        ratio = self.actuate_rate_hz / self.detect_rate_hz
        if abs(ratio - round(ratio)) > 1e-9 or ratio < 1:
            raise ValueError("actuate rate must be an integer multiple of detect rate")
        if self.render_mode not in ("direct", "warp"):
            raise ValueError(f"unknown render_mode {self.render_mode!r}")
        if self.speed_trace:
            trace = tuple((float(t), float(v)) for t, v in self.speed_trace)
            if any(b[0] <= a[0] for a, b in zip(trace, trace[1:])):
                raise ValueError("speed_trace timestamps must increase")
            object.__setattr__(self, "speed_trace", trace)

    def speed_at(self, t: float) -> float:
        """Replayed speed: the last trace value at or before t (else constant)."""
        if not self.speed_trace:
            return self.speed_mps
        value = self.speed_trace[0][1]
        for ts, vs in self.speed_trace:
            if ts <= t + 1e-12:
                value = vs
            else:
                break
        return value

    @property
    def substeps(self) -> int:
        return int(round(self.actuate_rate_hz / self.detect_rate_hz))

    def scene(self) -> SceneGeometry:
        kwargs = dict(road_gray=self.road_gray, sky_gray=self.sky_gray,
                      line_gray=self.line_gray, line_width_m=self.line_width_m)
        if self.curve_radius:
            return SceneGeometry.arc(self.curve_radius, self.lane_width,
                                     self.length_m, **kwargs)
        return SceneGeometry.straight(self.lane_width, self.length_m, **kwargs)

    def initial_state(self) -> VehicleState:
        return VehicleState(x=0.0, y=-self.initial_offset,
                            psi=self.initial_heading, v=self.speed_at(0.0))

    def h_samples(self, cam: CameraModel, input_size: tuple[int, int]) -> np.ndarray:
        """Detector-frame sample rows below the projected horizon."""
        tf = detector_transform(cam, input_size)
        horizon_det = (cam.horizon_row() - tf.y0) * tf.sy
        start = int(np.ceil(horizon_det)) + self.h_row_margin
        return np.arange(start, input_size[1] - 1, self.h_row_step,
                         dtype=np.float64)

    def without_attack(self) -> "Scenario":
        return replace(self, attack=None)

    def with_attack(self, artifact) -> "Scenario":
        return replace(self, attack=artifact)


@dataclass
class Trajectory:
    """Per-frame states and lateral offsets plus the 100 Hz steering trace."""

    times: np.ndarray
    states: list
    lateral_offsets: np.ndarray  # meters right of the lane center
    steer_trace: np.ndarray  # steering angle after every actuation substep
    substeps_per_frame: int
    degraded_frames: int = 0
    valid: bool = True

    def max_abs_offset(self) -> float:
        return float(np.max(np.abs(self.lateral_offsets)))


class PurePursuitController:
    """Steer toward a lookahead point on the desired path (lane center).

    With both ego lines the desired path is their pointwise mean; with one,
    that line shifted by half a lane width toward the center. The command is
    delta = atan(2 L sin(alpha) / Ld) with Ld = max(v * t_la, Ld_min).
    """

    def __init__(self, wheelbase: float, lane_width: float,
                 lookahead_time_s: float = 1.0, lookahead_min_m: float = 5.0):
        self.wheelbase = wheelbase
        self.lane_width = lane_width
        self.t_la = lookahead_time_s
        self.min_ld = lookahead_min_m

    def desired_path(self, ego_bev: dict) -> np.ndarray | None:
        """Path points (forward, left) in the vehicle frame, or None."""
        left = ego_bev.get(EGO_LEFT)
        right = ego_bev.get(EGO_RIGHT)
        half = self.lane_width / 2.0
        if left is not None and right is not None:
            shared = min(len(left), len(right))
            path = (left[:shared] + right[:shared]) / 2.0
        elif left is not None:
            path = left.copy()
            path[:, 1] -= half  # shift right (less left) toward the center
        elif right is not None:
            path = right.copy()
            path[:, 1] += half
        else:
            return None
        return path[np.argsort(path[:, 0])]

    def steer_command(self, ego_bev: dict, state: VehicleState,
                      ) -> tuple[float, bool]:
        """(desired steering angle, degraded flag). Holds delta with no lines."""
        path = self.desired_path(ego_bev)
        if path is None or len(path) == 0:
            return state.delta, True
        ld = max(state.v * self.t_la, self.min_ld)
        dist = np.hypot(path[:, 0], path[:, 1])
        ahead = np.flatnonzero(dist >= ld)
        target = path[ahead[0]] if ahead.size else path[-1]
        alpha = np.arctan2(target[1], target[0])  # positive = target left
        ld_eff = max(float(np.hypot(*target)), 1e-6)
        delta = np.arctan(2.0 * self.wheelbase * np.sin(alpha) / ld_eff)
        return float(np.clip(delta, -MAX_STEER_RAD, MAX_STEER_RAD)), False


def lateral_control(ego_bev: dict, state: VehicleState, wheelbase: float = 2.65,
                    lane_width: float = 3.6, lookahead_time_s: float = 1.0,
                    lookahead_min_m: float = 5.0) -> float:
    """Functional wrapper around the pure-pursuit steering command."""
    ctrl = PurePursuitController(wheelbase, lane_width, lookahead_time_s,
                                 lookahead_min_m)
    return ctrl.steer_command(ego_bev, state)[0]


def _ego_lines_bev(labeled, cam: CameraModel, tf) -> dict:
    """Project ego lines from detector pixels to vehicle-frame (fwd, left)."""
    out = {}
    horizon = cam.horizon_row()
    for ln in labeled.lines:
        mask = ln.present()
        if not mask.any():
            continue
        pts_det = np.stack([ln.xs[mask], labeled.h_samples[mask]], axis=1)
        pts_img = tf.to_image(pts_det)
        below = pts_img[:, 1] > horizon + 1.0
        if below.sum() < 2:
            continue
        ground = project_image_to_ground(cam, pts_img[below])
        fwd = ground[:, 1]
        left = -ground[:, 0]
        out[ln.role] = np.stack([fwd, left], axis=1)
    return out


def run_scenario(scenario: Scenario, detector: DetectorHandle,
                 cam: CameraModel | None = None, seed: int = 0) -> Trajectory:
    """Simulate the closed loop and return the trajectory.

    Detector failures abort the run; the partial trajectory is returned with
    ``valid=False``. The seed feeds detectors that carry configured noise;
    rendering and control are fully deterministic.
    """
    cam = cam or scenario.camera.build()
    scene = scenario.scene()
    controller = PurePursuitController(
        scenario.wheelbase, scenario.lane_width,
        scenario.lookahead_time_s, scenario.lookahead_min_m)
    tf = detector_transform(cam, detector.input_size)
    h_samples = scenario.h_samples(cam, detector.input_size)
    center_x = detector.input_size[0] / 2.0
    dt_frame = 1.0 / scenario.detect_rate_hz
    n_sub = scenario.substeps
    dt_sub = dt_frame / n_sub
    rate_limit = np.deg2rad(scenario.steer_rate_limit_deg)

    state = scenario.initial_state()
    times, states, offsets, steer_trace = [], [], [], []
    degraded = 0
    valid = True
    base_frame: ImageFrame | None = None
    base_pose: VehicleState | None = None

    for k in range(scenario.duration_frames):
        t = k / scenario.detect_rate_hz
        times.append(t)
        states.append(state)
        offsets.append(scene.lateral_offset_right(state.x, state.y))

        if scenario.render_mode == "warp" and base_frame is not None:
            motion = _relative_motion(base_pose, state)
            frame = synthesize_frame(cam, base_frame, motion)
        else:
            frame = render_scene(scene, cam, state,
                                 patch=_patch_of(scenario),
                                 line=_line_of(scenario))
            if scenario.render_mode == "warp" and base_frame is None:
                base_frame, base_pose = frame, state

        adapted = adapt_crop(cam, frame, detector.input_size)
        if hasattr(detector, "set_pose"):
            detector.set_pose(state)
        try:
            rep = detector.detect(adapted)
        except DetectorError:
            valid = False
            break
        labeled = filter_ego(
            canonicalize(rep, h_samples, scenario.detect_threshold), center_x)
        ego_bev = _ego_lines_bev(labeled, cam, tf)
        steer_goal, was_degraded = controller.steer_command(ego_bev, state)
        degraded += int(was_degraded)

        for i in range(n_sub):
            state = replace(state, v=scenario.speed_at(t + i * dt_sub))
            change = np.clip(steer_goal - state.delta, -rate_limit, rate_limit)
            state = bicycle_step(state, state.delta + change, dt_sub,
                                 scenario.wheelbase)
            steer_trace.append(state.delta)

    if valid:
        # Closing sample so a duration of n frames spans n/detect_rate seconds.
        times.append(scenario.duration_frames / scenario.detect_rate_hz)
        states.append(state)
        offsets.append(scene.lateral_offset_right(state.x, state.y))

    return Trajectory(times=np.asarray(times),
                      states=states,
                      lateral_offsets=np.asarray(offsets),
                      steer_trace=np.asarray(steer_trace),
                      substeps_per_frame=n_sub,
                      degraded_frames=degraded,
                      valid=valid)


def _patch_of(scenario: Scenario) -> RoadPatch | None:
    return scenario.attack if isinstance(scenario.attack, RoadPatch) else None


def _line_of(scenario: Scenario) -> DrawnLine | None:
    return scenario.attack if isinstance(scenario.attack, DrawnLine) else None


def _relative_motion(base: VehicleState, now: VehicleState,
                     ) -> tuple[float, float, float]:
    """(forward, left, yaw) of ``now`` in ``base``'s ground frame."""
    dx = now.x - base.x
    dy = now.y - base.y
    c, s = np.cos(base.psi), np.sin(base.psi)
    fwd = dx * c + dy * s
    left = -dx * s + dy * c
    return fwd, left, now.psi - base.psi
