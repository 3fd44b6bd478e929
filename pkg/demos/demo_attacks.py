"""Generate both attack artifacts against the classical detector.

Searches a drawn line with the TPE sampler and runs a short white-box patch
optimization, then renders each artifact into a frame for inspection.
"""

from pathlib import Path

import numpy as np

from lanebench.artifacts import AttackBudget
from lanebench.attack_line import optimize_line
from lanebench.attack_patch import optimize_patch
from lanebench.detectors import ClassicalDetector
from lanebench.imageio import encode_pgm
from lanebench.harness.config import load_scenario
from lanebench.scene import render_scene

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

sc = load_scenario("straight_attack")
cam = sc.camera.build()
size = (cam.crop_rect[2], cam.crop_rect[3])
det = ClassicalDetector(size, h_samples=sc.h_samples(cam, size))

line_res = optimize_line(sc, det, "right", iterations=60, seed=0, cam=cam)
print(f"drawn line: {np.round(line_res.line.start, 2)} -> "
      f"{np.round(line_res.line.end, 2)} width {line_res.line.width:.3f} m, "
      f"loss {line_res.best_loss:.3f}")
frame = render_scene(sc.scene(), cam, sc.initial_state(), line=line_res.line)
(out / "attack_line.pgm").write_bytes(encode_pgm(frame.gray()))

patch_res = optimize_patch(sc, det, "right", budget=AttackBudget(iterations=4),
                           mode="white_box", seed=0, cam=cam)
print(f"patch: losses {patch_res.losses[0]:.6f} -> {patch_res.best_loss:.6f}, "
      f"PAR {patch_res.patch.par_mask.mean():.2f}")
frame = render_scene(sc.scene(), cam, sc.initial_state(), patch=patch_res.patch)
(out / "attack_patch.pgm").write_bytes(encode_pgm(frame.gray()))
print(f"wrote frames to {out}")
