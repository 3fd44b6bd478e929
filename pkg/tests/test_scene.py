import numpy as np
import pytest

from lanebench.artifacts import DrawnLine, RoadPatch
from lanebench.geometry import project_ground_to_image
from lanebench.scene import GenerationContext, SceneGeometry, render_scene
from lanebench.simulator import Scenario, VehicleState


def test_benign_scene_symmetric(benign_frame):
    gray = benign_frame.gray()
    flipped = gray[:, ::-1]
    # Road/lane geometry is mirror symmetric; allow a gray level of slack
    # from the half-pixel center offset of an even image width.
    assert np.abs(gray[100:, :] - flipped[100:, :]).max() <= 160.0
    for row in (120, 150, 180):
        w = np.maximum(gray[row] - 150.0, 0.0)
        c = (w * np.arange(320)).sum() / w.sum()
        assert abs(c - 159.5) <= 1.0


def test_zero_perturbation_patch_is_local(scene, camera):
    state = VehicleState(v=16.0)
    benign = render_scene(scene, camera, state)
    patch = RoadPatch(ground_origin=(7.0, 0.0), size=(3.6, 36.0))
    with_patch = render_scene(scene, camera, state, patch=patch)
    diff_rows, diff_cols = np.nonzero(
        np.any(benign.pixels != with_patch.pixels, axis=2))
    assert diff_rows.size > 0
    # All differing pixels back-project inside the patch rectangle (pad for
    # the supersample footprint).
    corners = []
    for fx in (7.0, 43.0):
        for ry in (-1.8, 1.8):
            corners.append(project_ground_to_image(camera, np.array([ry, fx])))
    corners = np.asarray(corners)
    assert diff_cols.min() >= corners[:, 0].min() - 2
    assert diff_cols.max() <= corners[:, 0].max() + 2
    assert diff_rows.min() >= corners[:, 1].min() - 2
    assert diff_rows.max() <= corners[:, 1].max() + 2


def test_drawn_line_endpoints_project_correctly(scene, camera):
    state = VehicleState(v=16.0)
    line = DrawnLine(start=(10.0, -0.5), end=(30.0, 0.7), width=0.12, color=235.0)
    frame = render_scene(scene, camera, state, line=line)
    benign = render_scene(scene, camera, state)
    changed = np.any(frame.pixels != benign.pixels, axis=2)
    rows, cols = np.nonzero(changed)
    pts = []
    for fx, ry in ((line.start[0], line.start[1]), (line.end[0], line.end[1])):
        # lane frame y is rightward; camera ground x is rightward too
        pts.append(project_ground_to_image(camera, np.array([ry, fx])))
    for px in pts:
        d = np.hypot(cols - px[0], rows - px[1])
        assert d.min() <= 1.5


def test_generation_context_matches_direct_render(scene, camera):
    state = VehicleState(v=16.0)
    ctx = GenerationContext.build(scene, camera, state, ((7.0, 43.0), (-1.8, 1.8)))
    benign = render_scene(scene, camera, state)
    assert np.array_equal(ctx.apply(None).pixels, benign.pixels)
    line = DrawnLine(start=(9.0, -0.2), end=(35.0, 0.1), width=0.1)
    via_ctx = ctx.apply(line)
    direct = render_scene(scene, camera, state, line=line)
    # Same composition path up to float pooling order; allow one gray level.
    diff = np.abs(via_ctx.gray() - direct.gray())
    assert diff.max() <= 1.0


def test_patch_cells_indexable(scene, camera):
    patch = RoadPatch(ground_origin=(7.0, 0.0), size=(3.6, 36.0))
    assert patch.grid_shape() == (240, 24)
    xs = np.array([7.0, 42.9, 25.0])
    ys = np.array([-1.79, 1.79, 0.0])
    ix, iy = patch.cell_index(xs, ys)
    assert ix.tolist() == [0, 239, 120]
    assert iy.tolist() == [0, 23, 12]


def test_patch_rendered_gray_clamps():
    patch = RoadPatch(ground_origin=(7.0, 0.0), size=(1.5, 1.5), base_gray=101.0)
    pert = np.full(patch.grid_shape(), 400.0)
    clamped = patch.with_perturbation(pert).rendered_gray()
    assert clamped.max() == 255.0
    pert2 = np.full(patch.grid_shape(), -400.0)
    assert patch.with_perturbation(pert2).rendered_gray().min() == 0.0


def test_patch_perturbation_outside_mask_rejected():
    patch = RoadPatch(ground_origin=(7.0, 0.0), size=(1.5, 1.5))
    mask = np.zeros(patch.grid_shape(), dtype=bool)
    pert = np.ones(patch.grid_shape())
    with pytest.raises(ValueError):
        RoadPatch(ground_origin=(7.0, 0.0), size=(1.5, 1.5), perturbation=pert,
                  par_mask=mask)


def test_lane_overdraw_segments(scene):
    # A 5.4 m wide patch swallows both lane lines; overdraw restores them.
    patch = RoadPatch(ground_origin=(7.0, 0.0), size=(5.4, 36.0))
    segs = scene.lane_overdraw_segments(patch)
    assert len(segs) == 2
    lats = sorted(seg[1] for seg in segs)
    assert lats[0] == pytest.approx(-1.8)
    assert lats[1] == pytest.approx(1.8)
    # Lane lines stay visible on top of an extreme patch.
    cam = Scenario().camera.build()
    pert = np.full(patch.grid_shape(), -255.0)
    dark = RoadPatch(ground_origin=(7.0, 0.0), size=(5.4, 36.0),
                     perturbation=pert, lane_overdraw=segs)
    frame = render_scene(scene, cam, VehicleState(v=16.0), patch=dark)
    row = 130  # inside the patch depth range
    assert frame.gray()[row].max() >= 200.0


def test_rendered_frames_are_grayscale(benign_frame, scene, camera):
    px = benign_frame.pixels
    assert np.array_equal(px[:, :, 0], px[:, :, 1])
    assert np.array_equal(px[:, :, 1], px[:, :, 2])
    patch = RoadPatch(ground_origin=(7.0, 0.0), size=(3.6, 36.0))
    rng = np.random.default_rng(0)
    noisy = patch.with_perturbation(rng.normal(0, 40, patch.grid_shape()))
    frame = render_scene(scene, camera, VehicleState(v=16.0), patch=noisy)
    assert np.array_equal(frame.pixels[:, :, 0], frame.pixels[:, :, 2])


def test_arc_scene_offsets():
    scene = SceneGeometry.arc(radius=500.0, lane_width=3.6, length=100.0)
    # Chord discretization of the arc leaves ~ (step^2 / 8R) ~ 1 mm slack.
    assert scene.lateral_offset_right(0.0, 0.0) == pytest.approx(0.0, abs=2e-3)
    # A point left of the start (positive world y) is a negative right-offset.
    assert scene.lateral_offset_right(0.0, 0.5) == pytest.approx(-0.5, abs=3e-3)
