"""Closed-loop run: benign stability, then the drawn-line attack.

Prints the lateral offset trace of both runs and the resulting deviation
classification at the 0.735 m / 2.5 s criterion.
"""

import numpy as np

from lanebench.attack_line import optimize_line
from lanebench.detectors import ClassicalDetector
from lanebench.harness.config import load_scenario
from lanebench.metrics import classify_outcome, lateral_deviation
from lanebench.simulator import run_scenario

sc = load_scenario("straight_attack")
cam = sc.camera.build()
size = (cam.crop_rect[2], cam.crop_rect[3])
det = ClassicalDetector(size, h_samples=sc.h_samples(cam, size))

benign = run_scenario(sc, det, cam)
print(f"benign: max |offset| {benign.max_abs_offset():.3f} m over "
      f"{benign.times[-1]:.1f} s")

res = optimize_line(sc, det, "right", iterations=200, seed=0, cam=cam)
attacked = run_scenario(sc.with_attack(res.line), det, cam)
trace = lateral_deviation(attacked, benign)
out = classify_outcome(trace, "right")
peak = trace.times[np.argmax(np.abs(trace.deviation))]
print(f"attacked: max |deviation| {np.abs(trace.deviation).max():.3f} m "
      f"at t={peak:.2f} s -> targeted={out.targeted} untargeted={out.untargeted}")
