"""Host-side conformance of the external adapter (skipped when not built).

The primary suite never needs the adapter; these tests only run when the
frontend package has been compiled (frontend/dist/main.js present) and node
is available.
"""

import base64
import json
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

from lanebench.detectors import launch_command
from lanebench.geometry import adapt_crop
from lanebench.detectors.builtin import ClassicalDetector, OracleDetector
from lanebench.lanes import LabeledLanes, LabeledLine, canonicalize, filter_ego
from lanebench.metrics import AccuracyConfig, match_and_score
from lanebench.scene import render_scene
from lanebench.simulator import Scenario, VehicleState, run_scenario
from lanebench.artifacts import DrawnLine

ROOT = Path(__file__).resolve().parent.parent
ADAPTER = ROOT / "frontend" / "dist" / "main.js"
FIXTURE = ROOT / "frontend" / "test" / "fixtures" / "golden_transcript.json"

pytestmark = pytest.mark.skipif(
    not ADAPTER.is_file() or shutil.which("node") is None,
    reason="adapter not built (frontend/dist) or node unavailable")


def _node_cmd(*args: str) -> list[str]:
    return ["node", str(ADAPTER), *args]


def test_golden_transcript_from_host_side():
    fixture = json.loads(FIXTURE.read_text())
    proc = subprocess.Popen(_node_cmd(*fixture["backend_args"]),
                            stdin=subprocess.PIPE, stdout=subprocess.PIPE)
    try:
        replies = []
        for exchange in fixture["exchanges"]:
            line = exchange.get("send_raw") or json.dumps(exchange["send"])
            proc.stdin.write(line.encode() + b"\n")
            proc.stdin.flush()
            replies.append(json.loads(proc.stdout.readline()))
        assert len(replies) == 12
        for reply, exchange in zip(replies, fixture["exchanges"]):
            expected = exchange["expect"]
            for key, value in expected.items():
                assert reply[key] == value, (key, reply, expected)
            if expected["type"] == "error":
                assert isinstance(reply.get("msg"), str) and reply["msg"]
            else:
                assert sorted(reply) == sorted(expected)
    finally:
        proc.stdin.close()
        proc.terminate()
        proc.wait(timeout=5)


def test_echo_backend_round_trip_through_remote_detector():
    coeffs = [[0.0, 0.0, 0.0, 120.0], [0.0, 0.0, 0.0, 200.0]]
    det = launch_command(_node_cmd("--backend", "echo", "--width", "320",
                                   "--height", "192", "--coeffs",
                                   json.dumps(coeffs)))
    try:
        assert det.family == "poly"
        assert det.input_size == (320, 192)
        scenario = Scenario()
        cam = scenario.camera.build()
        frame = render_scene(scenario.scene(), cam, scenario.initial_state())
        rep = det.detect(frame)
        np.testing.assert_allclose(rep.polynomials, coeffs)
        grad = det.gradient(frame, "right",
                            np.zeros((192, 320), dtype=bool))
        assert not grad.any()
    finally:
        det.close()


def test_naive_backend_matches_builtin_classical_on_shared_frames():
    scenario = Scenario()
    cam = scenario.camera.build()
    size = (cam.image_width, cam.image_height)
    hs = scenario.h_samples(cam, size)
    classical = ClassicalDetector(size, h_samples=hs)
    remote = launch_command(_node_cmd("--backend", "naive", "--width", "320",
                                      "--height", "192"))
    scene = scenario.scene()
    cfg = AccuracyConfig(h_samples=hs)
    try:
        accs = []
        line = DrawnLine(start=(9.0, -0.4), end=(35.0, 0.3), width=0.1)
        for k in range(20):
            state = VehicleState(x=1.2 * k, y=0.12 * np.sin(k / 3.0), v=16.0)
            frame = render_scene(scene, cam, state,
                                 line=line if k % 2 else None)
            ref = filter_ego(canonicalize(classical.detect(frame), hs), 160.0)
            got = filter_ego(canonicalize(remote.detect(frame), hs), 160.0)
            accs.append(match_and_score(got, ref, cfg).accuracy)
        assert float(np.mean(accs)) >= 0.9
    finally:
        remote.close()


def test_adapter_drives_closed_loop_via_cmd_detector():
    scenario = Scenario(duration_frames=10)
    cam = scenario.camera.build()
    det = launch_command(_node_cmd("--backend", "naive"))
    try:
        traj = run_scenario(scenario, det, cam)
        assert traj.valid
        assert traj.max_abs_offset() < 0.1
    finally:
        det.close()
