"""Camera geometry walkthrough: projection, frame synthesis and cropping.

Renders a straight road, warps the view for a laterally displaced camera,
and shows that projecting ground points round-trips through the homography.
Writes PGM files next to this script for quick visual inspection.
"""

from pathlib import Path

import numpy as np

from lanebench.geometry import (CameraModel, adapt_crop, project_ground_to_image,
                                project_image_to_ground, synthesize_frame)
from lanebench.imageio import encode_pgm
from lanebench.scene import SceneGeometry, render_scene
from lanebench.simulator import VehicleState

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

cam = CameraModel.forward_facing(320, 192, focal_px=280.0, height_m=1.2)
scene = SceneGeometry.straight(lane_width=3.6)

p = np.array([1.8, 12.0])  # right lane line, 12 m ahead
px = project_ground_to_image(cam, p)
back = project_image_to_ground(cam, px)
print(f"ground {p} -> pixel {px.round(2)} -> ground {back.round(9)}")

frame = render_scene(scene, cam, VehicleState(v=16.0))
(out / "geometry_base.pgm").write_bytes(encode_pgm(frame.gray()))

# Move the camera half a meter to the left and synthesize the new view.
warped = synthesize_frame(cam, frame, (0.0, 0.5, 0.0))
(out / "geometry_shifted.pgm").write_bytes(encode_pgm(warped.gray()))

# Detector adaptation: crop the central region and resize.
cropped_cam = CameraModel.forward_facing(320, 192, 280.0, 1.2,
                                         crop_rect=(40, 48, 240, 120))
small = adapt_crop(cropped_cam, frame, out_size=(320, 160))
(out / "geometry_cropped.pgm").write_bytes(encode_pgm(small.gray()))
print(f"wrote 3 frames to {out}")
