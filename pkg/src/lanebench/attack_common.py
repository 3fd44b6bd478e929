"""Shared machinery for attack generation: frame contexts and loss evaluation.

Attacks are generated against the frames of an idealized reference drive
(the vehicle tracking the lane center at the scenario speed), so candidate
artifacts are scored on a fixed, detector-independent generation window.
"""

import numpy as np

from .geometry import adapt_crop
from .objective import attack_loss, expected_road_center
from .scene import GenerationContext
from .simulator import Scenario, VehicleState

__all__ = ["reference_states", "ArtifactEvaluator", "NEUTRAL_CENTER"]

NEUTRAL_CENTER = 0.5


def reference_states(scenario: Scenario, n_frames: int) -> list[VehicleState]:
    """Vehicle states tracking the lane center, one per detection frame."""
    dt = 1.0 / scenario.detect_rate_hz
    center = scenario.scene().centerline
    seg = np.diff(center, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    # Arc-length coordinate of the vehicle's start: project the world origin
    # onto the centerline (lane polylines extend behind the start point).
    rel = -center[:-1]
    t0 = np.clip((rel * seg).sum(axis=1) / np.maximum(seg_len ** 2, 1e-12),
                 0.0, 1.0)
    proj = center[:-1] + t0[:, None] * seg
    d2 = (proj ** 2).sum(axis=1)
    k0 = int(np.argmin(d2))
    s_origin = cum[k0] + t0[k0] * seg_len[k0]
    states = []
    s = s_origin
    for k in range(n_frames):
        v = scenario.speed_at(k * dt)
        i = int(np.clip(np.searchsorted(cum, s) - 1, 0, len(seg) - 1))
        frac = (s - cum[i]) / max(seg_len[i], 1e-12)
        pos = center[i] + frac * seg[i]
        heading = np.arctan2(seg[i, 1], seg[i, 0])
        states.append(VehicleState(x=float(pos[0]), y=float(pos[1]),
                                   psi=float(heading), v=v))
        s += v * dt
    return states


class ArtifactEvaluator:
    """Scores artifacts by the mean detector road center over the window."""

    def __init__(self, scenario: Scenario, detector, cam=None,
                 n_frames: int | None = None):
        self.scenario = scenario
        self.detector = detector
        self.cam = cam or scenario.camera.build()
        self.n_frames = n_frames or scenario.generation_frames
        scene = scenario.scene()
        bounds = scenario.attack_area.bounds()
        self.h_samples = scenario.h_samples(self.cam, detector.input_size)
        self.states = reference_states(scenario, self.n_frames)
        self.contexts = [
            GenerationContext.build(scene, self.cam, state, bounds)
            for state in self.states
        ]
        self._identity_adapt = (
            self.cam.crop_rect == (0, 0, self.cam.image_width, self.cam.image_height)
            and tuple(detector.input_size) == (self.cam.image_width,
                                               self.cam.image_height))

    def frames(self, artifact) -> list:
        out = []
        for ctx in self.contexts:
            frame = ctx.apply(artifact)
            if not self._identity_adapt:
                frame = adapt_crop(self.cam, frame, self.detector.input_size)
            out.append(frame)
        return out

    def frame_centers(self, artifact) -> np.ndarray:
        centers = []
        for state, frame in zip(self.states, self.frames(artifact)):
            if hasattr(self.detector, "set_pose"):
                self.detector.set_pose(state)
            rep = self.detector.detect(frame)
            centers.append(self._center(rep))
        return np.asarray(centers)

    def _center(self, rep) -> float:
        try:
            return expected_road_center(rep, image_width=self.detector.input_size[0],
                                        h_samples=self.h_samples)
        except ValueError:
            return NEUTRAL_CENTER

    def loss(self, artifact, direction: str) -> float:
        return attack_loss(self.frame_centers(artifact), direction)
