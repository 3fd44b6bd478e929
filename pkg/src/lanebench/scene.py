"""Ground-plane scene description and the camera rasterizer.

Rendering back-projects supersampled pixel centers onto the ground plane,
evaluates the scene color at each ground point and averages the subsamples,
so thin paint (down to centimeter line widths) contributes fractional
coverage instead of vanishing. Paint order, bottom to top: road surface,
patch (with lane lines kept on top of it), lane lines, drawn line.

World frame: x along the road, y to the LEFT (standard heading convention);
the lane frame used by artifacts measures lateral offsets to the RIGHT, so
y_world = -y_lane for straight scenes.
"""

import numpy as np
from dataclasses import dataclass, field
from functools import lru_cache

from .geometry import CameraModel, ImageFrame, image_to_ground_masked
from .artifacts import RoadPatch, DrawnLine

__all__ = ["SceneGeometry", "render_scene", "GenerationContext"]

SUPERSAMPLE = 3
_MIN_FORWARD_M = 0.5


@dataclass(frozen=True)
class SceneGeometry:
    """Lane geometry plus the flat colors of the synthetic world."""

    lane_polylines: tuple  # world-frame (n, 2) arrays, one per painted line
    centerline: np.ndarray  # world-frame (n, 2) lane center
    lane_width: float = 3.6
    road_gray: float = 96.0
    sky_gray: float = 168.0
    line_gray: float = 255.0
    line_width_m: float = 0.10

    def __post_init__(self):
        object.__setattr__(self, "lane_polylines",
                           tuple(np.asarray(p, dtype=np.float64)
                                 for p in self.lane_polylines))
        object.__setattr__(self, "centerline",
                           np.asarray(self.centerline, dtype=np.float64))

    @classmethod
    def straight(cls, lane_width: float = 3.6, length: float = 200.0,
                 **kwargs) -> "SceneGeometry":
        half = lane_width / 2.0
        xs = np.array([-15.0, length])
        left = np.stack([xs, np.full(2, half)], axis=1)
        right = np.stack([xs, np.full(2, -half)], axis=1)
        center = np.stack([xs, np.zeros(2)], axis=1)
        return cls(lane_polylines=(left, right), centerline=center,
                   lane_width=lane_width, **kwargs)

    @classmethod
    def arc(cls, radius: float, lane_width: float = 3.6, length: float = 200.0,
            step: float = 2.0, **kwargs) -> "SceneGeometry":
        """Constant-curvature lane; positive radius bends left."""
        arc_len = np.arange(-15.0, length + step, step)
        ang = arc_len / radius
        cx = radius * np.sin(ang)
        cy = radius * (1.0 - np.cos(ang))
        center = np.stack([cx, cy], axis=1)
        # Offset along the local normal (pointing left of travel).
        nx, ny = -np.sin(ang), np.cos(ang)
        half = lane_width / 2.0
        left = np.stack([cx + half * nx, cy + half * ny], axis=1)
        right = np.stack([cx - half * nx, cy - half * ny], axis=1)
        return cls(lane_polylines=(left, right), centerline=center,
                   lane_width=lane_width, **kwargs)

    def lateral_offset_right(self, x: float, y: float) -> float:
        """Signed distance of a world point from the centerline, right positive."""
        seg_a = self.centerline[:-1]
        seg_b = self.centerline[1:]
        d = seg_b - seg_a
        rel = np.array([x, y]) - seg_a
        seg_len2 = (d ** 2).sum(axis=1)
        t = np.clip((rel * d).sum(axis=1) / np.maximum(seg_len2, 1e-12), 0.0, 1.0)
        proj = seg_a + t[:, None] * d
        dist2 = ((np.array([x, y]) - proj) ** 2).sum(axis=1)
        k = int(np.argmin(dist2))
        # Cross product sign: positive = point left of segment direction.
        cross = d[k, 0] * (y - seg_a[k, 1]) - d[k, 1] * (x - seg_a[k, 0])
        return -np.sign(cross) * float(np.sqrt(dist2[k])) if cross != 0.0 \
            else float(np.sqrt(dist2[k])) * 0.0

    def lane_overdraw_segments(self, patch: RoadPatch) -> tuple:
        """Lane-line pieces crossing the patch rectangle (lane-frame coords)."""
        x0, yc = patch.ground_origin
        width, length = patch.size
        y_lo, y_hi = yc - width / 2.0, yc + width / 2.0
        segs = []
        for poly in self.lane_polylines:
            # lane frame: x forward, y right = -y_world
            lx, ly = poly[:, 0], -poly[:, 1]
            for a in range(len(lx) - 1):
                xs = np.clip([lx[a], lx[a + 1]], x0, x0 + length)
                if xs[0] == xs[1]:
                    continue
                ys = np.interp(xs, [lx[a], lx[a + 1]], [ly[a], ly[a + 1]])
                if np.all((ys >= y_lo - 0.2) & (ys <= y_hi + 0.2)):
                    segs.append((xs[0], ys[0], xs[1], ys[1], self.line_width_m))
        return tuple(segs)


def _cover_polyline(mask_out: np.ndarray, pts: np.ndarray, poly: np.ndarray,
                    radius: float) -> None:
    """OR into mask_out the points within radius of the polyline (in place)."""
    for a in range(len(poly) - 1):
        p0, p1 = poly[a], poly[a + 1]
        lo = np.minimum(p0, p1) - radius
        hi = np.maximum(p0, p1) + radius
        cand = np.flatnonzero((pts[:, 0] >= lo[0]) & (pts[:, 0] <= hi[0])
                              & (pts[:, 1] >= lo[1]) & (pts[:, 1] <= hi[1])
                              & ~mask_out)
        if cand.size == 0:
            continue
        d = p1 - p0
        len2 = float(d @ d)
        rel = pts[cand] - p0
        t = np.clip((rel @ d) / max(len2, 1e-12), 0.0, 1.0)
        closest = p0 + t[:, None] * d
        dist2 = ((pts[cand] - closest) ** 2).sum(axis=1)
        mask_out[cand[dist2 <= radius * radius]] = True


def _segment_cover(pts: np.ndarray, p0: np.ndarray, p1: np.ndarray,
                   radius: float) -> np.ndarray:
    mask = np.zeros(len(pts), dtype=bool)
    _cover_polyline(mask, pts, np.stack([p0, p1]), radius)
    return mask


def _world_to_lane(pts_world: np.ndarray) -> np.ndarray:
    """Straight-scene lane frame: x forward, y to the right."""
    out = pts_world.copy()
    out[:, 1] = -out[:, 1]
    return out


def _scene_gray(scene: SceneGeometry, pts_world: np.ndarray,
                patch: RoadPatch | None, line: DrawnLine | None) -> np.ndarray:
    color = np.full(len(pts_world), scene.road_gray)
    if patch is not None:
        lane_pts = _world_to_lane(pts_world)
        inside = patch.contains(lane_pts[:, 0], lane_pts[:, 1])
        if inside.any():
            ix, iy = patch.cell_index(lane_pts[inside, 0], lane_pts[inside, 1])
            color[inside] = patch.rendered_gray()[ix, iy]
    radius = scene.line_width_m / 2.0
    line_mask = np.zeros(len(pts_world), dtype=bool)
    for poly in scene.lane_polylines:
        _cover_polyline(line_mask, pts_world, poly, radius)
    color[line_mask] = scene.line_gray
    if line is not None:
        lane_pts = _world_to_lane(pts_world)
        p0 = np.asarray(line.start, dtype=np.float64)
        p1 = np.asarray(line.end, dtype=np.float64)
        cover = _segment_cover(lane_pts, p0, p1, line.width / 2.0)
        color[cover] = line.color
    return color


def _subsample_pixels(cam: CameraModel, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-plane coordinates of k*k jitter-free subsamples per pixel.

    Returned as flat arrays ordered (row, sub_row, col, sub_col) so pooling
    is a reshape + mean.
    """
    offs = (np.arange(k) + 0.5) / k - 0.5
    us = (np.arange(cam.image_width)[:, None] + offs[None, :]).ravel()
    vs = (np.arange(cam.image_height)[:, None] + offs[None, :]).ravel()
    uu, vv = np.meshgrid(us, vs)
    return uu.ravel(), vv.ravel()


@lru_cache(maxsize=8)
def _camera_grid(cam: CameraModel, k: int):
    """State-independent back-projection of the supersample grid.

    Returns (ground (n, 2) camera-frame coords, valid mask); cached per
    camera since it never changes between frames.
    """
    uu, vv = _subsample_pixels(cam, k)
    pix = np.stack([uu, vv], axis=1)
    ground, valid = image_to_ground_masked(cam, pix, min_forward=_MIN_FORWARD_M)
    ground = np.ascontiguousarray(ground[valid])
    return ground, valid


def _vehicle_to_world(state, r: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Camera-ground (right, forward) coords to world, given a vehicle state."""
    c, s = np.cos(state.psi), np.sin(state.psi)
    x = state.x + f * c + r * s
    y = state.y + f * s - r * c
    return np.stack([x, y], axis=1)


def render_scene(scene: SceneGeometry, cam: CameraModel, state,
                 patch: RoadPatch | None = None, line: DrawnLine | None = None,
                 supersample: int = SUPERSAMPLE) -> ImageFrame:
    """Rasterize the scene from the camera mounted at ``state``.

    Deterministic: fixed subsample grid, no randomness. Pixels whose
    subsamples all miss the ground render as flat sky.
    """
    k = supersample
    h, w = cam.image_height, cam.image_width
    ground, valid = _camera_grid(cam, k)
    colors = np.full(valid.size, scene.sky_gray)
    if valid.any():
        world = _vehicle_to_world(state, ground[:, 0], ground[:, 1])
        colors[valid] = _scene_gray(scene, world, patch, line)
    pooled = colors.reshape(h, k, w, k).mean(axis=(1, 3))
    return ImageFrame.from_gray(pooled)


@dataclass
class GenerationContext:
    """Cached benign render of one frame for fast artifact re-evaluation.

    Only subsamples whose ground point falls inside the padded attack area
    are kept; applying an artifact recolors those, re-pools the affected
    pixels and leaves the rest of the benign frame untouched.
    """

    cam: CameraModel
    scene: SceneGeometry
    benign: ImageFrame
    k: int
    area_pixels: np.ndarray      # flat pixel indices touched by the area
    sub_pixel_slot: np.ndarray   # per cached subsample: index into area_pixels
    sub_lane_xy: np.ndarray      # per cached subsample: lane-frame ground coords
    sub_benign: np.ndarray       # per cached subsample: benign color
    sub_paintable: np.ndarray    # False where benign lane paint stays on top
    pixel_sums: np.ndarray       # benign color sum over each area pixel's subsamples

    @classmethod
    def build(cls, scene: SceneGeometry, cam: CameraModel, state,
              area_bounds: tuple, pad: float = 0.5,
              supersample: int = SUPERSAMPLE) -> "GenerationContext":
        k = supersample
        h, w = cam.image_height, cam.image_width
        ground, valid = _camera_grid(cam, k)
        n_sub = valid.size
        colors = np.full(n_sub, scene.sky_gray)
        world = _vehicle_to_world(state, ground[:, 0], ground[:, 1])
        colors[valid] = _scene_gray(scene, world, None, None)
        pooled = colors.reshape(h, k, w, k).mean(axis=(1, 3))
        benign = ImageFrame.from_gray(pooled)

        (x0, x1), (y0, y1) = area_bounds
        lane_all = np.full((n_sub, 2), np.nan)
        lane_all[valid] = _world_to_lane(world)
        in_area = (valid & (lane_all[:, 0] >= x0 - pad) & (lane_all[:, 0] <= x1 + pad)
                   & (lane_all[:, 1] >= y0 - pad) & (lane_all[:, 1] <= y1 + pad))
        # Flat pixel index of each subsample under the (h, k, w, k) layout.
        sub_idx = np.arange(n_sub)
        col_sub = sub_idx % (w * k)
        row_sub = sub_idx // (w * k)
        pixel_flat = (row_sub // k) * w + col_sub // k
        # Cache every subsample of every touched pixel so re-pooling is exact
        # even for pixels straddling the area boundary.
        touched = np.unique(pixel_flat[in_area])
        area_sub = np.flatnonzero(np.isin(pixel_flat, touched))
        area_pixels, slot = np.unique(pixel_flat[area_sub], return_inverse=True)
        sums = np.zeros(len(area_pixels))
        np.add.at(sums, slot, colors[area_sub])
        benign_colors = colors[area_sub]
        return cls(cam=cam, scene=scene, benign=benign, k=k,
                   area_pixels=area_pixels, sub_pixel_slot=slot,
                   sub_lane_xy=lane_all[area_sub], sub_benign=benign_colors,
                   sub_paintable=benign_colors != scene.line_gray,
                   pixel_sums=sums)

    def apply(self, artifact) -> ImageFrame:
        """Benign frame with a RoadPatch or DrawnLine composited in."""
        if artifact is None:
            return self.benign
        new_colors = self.sub_benign.copy()
        if isinstance(artifact, RoadPatch):
            inside = artifact.contains(self.sub_lane_xy[:, 0], self.sub_lane_xy[:, 1])
            inside &= self.sub_paintable
            if inside.any():
                ix, iy = artifact.cell_index(self.sub_lane_xy[inside, 0],
                                             self.sub_lane_xy[inside, 1])
                new_colors[inside] = artifact.rendered_gray()[ix, iy]
        elif isinstance(artifact, DrawnLine):
            p0 = np.asarray(artifact.start, dtype=np.float64)
            p1 = np.asarray(artifact.end, dtype=np.float64)
            cover = _segment_cover(self.sub_lane_xy, p0, p1, artifact.width / 2.0)
            new_colors[cover] = artifact.color
        else:
            raise TypeError(f"unsupported artifact {type(artifact).__name__}")
        sums = self.pixel_sums.copy()
        np.add.at(sums, self.sub_pixel_slot, new_colors - self.sub_benign)
        pooled = sums / (self.k * self.k)
        gray = self.benign.gray()
        flat = gray.ravel()
        flat[self.area_pixels] = pooled
        return ImageFrame.from_gray(flat.reshape(gray.shape))

    def patch_pixel_cells(self, patch: RoadPatch):
        """Sparse render Jacobian support: (pixel flat idx, cell flat idx, weight).

        Weight is the fraction of the pixel's subsamples covered by the cell,
        i.e. d(pixel gray)/d(cell gray) ignoring clamping.
        """
        inside = patch.contains(self.sub_lane_xy[:, 0], self.sub_lane_xy[:, 1])
        inside &= self.sub_paintable
        idx = np.flatnonzero(inside)
        if idx.size == 0:
            return (np.zeros(0, dtype=int), np.zeros(0, dtype=int), np.zeros(0))
        ix, iy = patch.cell_index(self.sub_lane_xy[idx, 0], self.sub_lane_xy[idx, 1])
        n_long, n_lat = patch.grid_shape()
        cell_flat = ix * n_lat + iy
        pixel_flat = self.area_pixels[self.sub_pixel_slot[idx]]
        key = pixel_flat.astype(np.int64) * (n_long * n_lat) + cell_flat
        uniq, counts = np.unique(key, return_counts=True)
        return (uniq // (n_long * n_lat), uniq % (n_long * n_lat),
                counts / (self.k * self.k))
