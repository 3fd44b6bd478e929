"""Ground-plane <-> image-plane projection and camera-frame synthesis.

Coordinate conventions used throughout:

Camera ground frame (meters, origin at the camera foot point):
  - x: lateral, positive to the RIGHT of the camera
  - y: longitudinal, positive FORWARD along the optical axis

Image frame (pixels):
  - u: column, increasing right
  - v: row, increasing down

The homography ``ground_to_image`` maps homogeneous ground points
(x_right, y_forward, 1) to homogeneous pixels (u, v, 1). The inverse is
computed once at construction; both directions are hot paths.
"""

import numpy as np
from dataclasses import dataclass, field

__all__ = [
    "HorizonError",
    "CameraModel",
    "ImageFrame",
    "DetectorTransform",
    "project_ground_to_image",
    "project_image_to_ground",
    "synthesize_frame",
    "adapt_crop",
    "bilinear_resize",
    "detector_transform",
]


class HorizonError(ValueError):
    """A point maps to or above the horizon (homogeneous w ~ 0 or behind camera)."""


_W_EPS = 1e-12


@dataclass(frozen=True)
class ImageFrame:
    """8-bit RGB raster. ``pixels`` has shape (height, width, 3), dtype uint8."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.shape != (self.height, self.width, 3):
            raise ValueError(
                f"pixel buffer shape {px.shape} does not match "
                f"{self.height}x{self.width}x3"
            )
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_gray(cls, gray: np.ndarray) -> "ImageFrame":
        """Replicate a (h, w) gray array into the three channels."""
        g = np.asarray(gray)
        if g.dtype != np.uint8:
            g = np.clip(np.rint(g), 0, 255).astype(np.uint8)
        h, w = g.shape
        return cls(width=w, height=h, pixels=np.repeat(g[:, :, None], 3, axis=2))

    def gray(self) -> np.ndarray:
        """(h, w) float64 gray values, mean of the RGB channels."""
        return self.pixels.astype(np.float64).mean(axis=2)


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Pinhole-over-ground camera: dimensions, homography and adaptation crop.

    crop_rect is (x0, y0, w, h) in pixels, applied by :func:`adapt_crop`
    before handing frames to a detector. Instances hash by identity so
    renderers can cache per-camera projection grids.
    """

    image_width: int
    image_height: int
    ground_to_image: np.ndarray
    crop_rect: tuple[int, int, int, int]
    image_to_ground: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        h = np.asarray(self.ground_to_image, dtype=np.float64)
        if h.shape != (3, 3):
            raise ValueError("ground_to_image must be a 3x3 matrix")
        det = np.linalg.det(h)
        if abs(det) <= 1e-12:
            raise ValueError(f"ground_to_image is not invertible (|det|={abs(det):.3e})")
        x0, y0, w, hh = self.crop_rect
        if not (0 <= x0 and 0 <= y0 and w > 0 and hh > 0
                and x0 + w <= self.image_width and y0 + hh <= self.image_height):
            raise ValueError(f"crop_rect {self.crop_rect} outside image bounds")
        inv = np.linalg.inv(h)
        # Fix the homogeneous sign of the inverse so that w > 0 marks ground
        # points in front of the camera: probe the bottom-center pixel.
        probe = inv @ np.array([self.image_width / 2.0, self.image_height - 1.0, 1.0])
        if probe[2] < 0:
            inv = -inv
        object.__setattr__(self, "ground_to_image", h)
        object.__setattr__(self, "image_to_ground", inv)

    @classmethod
    def forward_facing(cls, image_width: int, image_height: int, focal_px: float,
                       height_m: float, cx: float | None = None,
                       cy: float | None = None,
                       crop_rect: tuple[int, int, int, int] | None = None,
                       ) -> "CameraModel":
        """Analytic model for a camera looking straight ahead at height_m.

        u = cx + f * x / y and v = cy + f * height / y, written as a single
        homography on (x_right, y_forward, 1). The horizon is the row v = cy.
        """
        if cx is None:
            cx = image_width / 2.0
        if cy is None:
            cy = image_height / 2.0
        h = np.array([
            [focal_px, cx, 0.0],
            [0.0, cy, focal_px * height_m],
            [0.0, 1.0, 0.0],
        ])
        if crop_rect is None:
            crop_rect = (0, 0, image_width, image_height)
        return cls(image_width=image_width, image_height=image_height,
                   ground_to_image=h, crop_rect=crop_rect)

    def horizon_row(self) -> float:
        """Image row of the vanishing line for the straight-ahead direction."""
        col = self.ground_to_image[:, 1]
        if abs(col[2]) < _W_EPS:
            return -np.inf
        return col[1] / col[2]


def _apply_h(h: np.ndarray, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Apply homography to (..., 2) points; returns (mapped (...,2), w (...,))."""
    pts = np.asarray(pts, dtype=np.float64)
    single = pts.ndim == 1
    p = np.atleast_2d(pts)
    hom = np.empty((p.shape[0], 3))
    hom[:, :2] = p
    hom[:, 2] = 1.0
    out = hom @ h.T
    w = out[:, 2]
    safe = np.where(np.abs(w) < _W_EPS, 1.0, w)
    mapped = out[:, :2] / safe[:, None]
    if single:
        return mapped[0], w[0]
    return mapped, w


def project_ground_to_image(cam: CameraModel, p) -> np.ndarray:
    """Map ground point(s) (x_right, y_forward) in meters to pixel (u, v).

    Accepts a single (2,) point or an (n, 2) array. Results may fall outside
    the image bounds. Raises :class:`HorizonError` for degenerate points.
    """
    mapped, w = _apply_h(cam.ground_to_image, p)
    if np.any(np.abs(w) < _W_EPS):
        raise HorizonError("point at horizon")
    return mapped


def project_image_to_ground(cam: CameraModel, q) -> np.ndarray:
    """Inverse of :func:`project_ground_to_image`.

    Raises :class:`HorizonError` when the pixel lies on or above the horizon
    line (no ground intersection in front of the camera).
    """
    mapped, w = _apply_h(cam.image_to_ground, q)
    if np.any(w < _W_EPS):
        raise HorizonError("pixel at or above the horizon")
    return mapped


def image_to_ground_masked(cam: CameraModel, q: np.ndarray,
                           min_forward: float = 0.05,
                           ) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized back-projection with a validity mask instead of raising.

    Valid points are strictly in front of the camera with forward distance
    greater than ``min_forward``. Used by the renderer and frame synthesis.
    """
    mapped, w = _apply_h(cam.image_to_ground, q)
    valid = (w > _W_EPS) & (mapped[:, 1] > min_forward)
    return mapped, valid


def motion_matrix(d_forward: float, d_left: float, d_yaw: float) -> np.ndarray:
    """Rigid map from the MOVED camera's ground frame back to the base frame.

    The motion is the new camera pose expressed in the base camera's ground
    frame: translated d_forward along the optical axis, d_left to the left,
    and yawed d_yaw (positive = turning left).
    """
    c, s = np.cos(d_yaw), np.sin(d_yaw)
    # Ground axes are (x=right, y=forward); the new origin sits at
    # (-d_left, d_forward) and a positive (left) yaw maps the new forward
    # axis to (-s, c) in the base frame.
    return np.array([
        [c, -s, -d_left],
        [s, c, d_forward],
        [0.0, 0.0, 1.0],
    ])


def synthesize_frame(cam: CameraModel, base: ImageFrame,
                     motion: tuple[float, float, float]) -> ImageFrame:
    """Warp ``base`` to the view from a camera displaced by ``motion``.

    motion = (d_forward m, d_left m, d_yaw rad), the new camera pose in the
    base camera's ground frame, |d_yaw| < pi/4. Rows at or above the horizon
    are copied through unchanged (the horizon is invariant under planar
    motion). Pixels whose source falls outside the base image are filled by
    clamping to the nearest valid column/row (side-area fill policy).
    """
    d_forward, d_left, d_yaw = motion
    if abs(d_yaw) >= np.pi / 4:
        raise ValueError("|d_yaw| must be below pi/4")
    if base.width != cam.image_width or base.height != cam.image_height:
        raise ValueError("frame does not match camera dimensions")
    if d_forward == 0.0 and d_left == 0.0 and d_yaw == 0.0:
        return ImageFrame(base.width, base.height, base.pixels.copy())

    # q_base = H @ M @ H^-1 @ q_new for ground pixels.
    m = cam.ground_to_image @ motion_matrix(d_forward, d_left, d_yaw) @ cam.image_to_ground
    h_img, w_img = base.height, base.width
    uu, vv = np.meshgrid(np.arange(w_img, dtype=np.float64),
                         np.arange(h_img, dtype=np.float64))
    pix = np.stack([uu.ravel(), vv.ravel()], axis=1)
    _, w_ground = _apply_h(cam.image_to_ground, pix)
    ground_mask = w_ground > _W_EPS

    src, w_src = _apply_h(m, pix)
    ok = ground_mask & (np.abs(w_src) > _W_EPS)

    out = base.pixels.copy().astype(np.float64)
    sx = np.clip(src[ok, 0], 0.0, w_img - 1.0)
    sy = np.clip(src[ok, 1], 0.0, h_img - 1.0)
    sampled = _bilinear_sample(base.pixels.astype(np.float64), sx, sy)
    flat = out.reshape(-1, 3)
    flat[ok] = sampled
    return ImageFrame(base.width, base.height,
                      np.clip(np.rint(flat.reshape(h_img, w_img, 3)), 0, 255).astype(np.uint8))


def _bilinear_sample(img: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sample (h, w, c) float image at fractional coords, clamped to edges."""
    h, w = img.shape[:2]
    x0 = np.clip(np.floor(x).astype(int), 0, w - 1)
    y0 = np.clip(np.floor(y).astype(int), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (x - x0)[:, None]
    fy = (y - y0)[:, None]
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def bilinear_resize(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Center-aligned bilinear resize of an (h, w[, c]) array to (out_h, out_w)."""
    img = np.asarray(img, dtype=np.float64)
    squeeze = img.ndim == 2
    if squeeze:
        img = img[:, :, None]
    h, w = img.shape[:2]
    if (out_w, out_h) == (w, h):
        out = img.copy()
    else:
        xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
        ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
        gx, gy = np.meshgrid(np.clip(xs, 0, w - 1), np.clip(ys, 0, h - 1))
        out = _bilinear_sample(img, gx.ravel(), gy.ravel()).reshape(out_h, out_w, -1)
    if squeeze:
        out = out[:, :, 0]
    return out


@dataclass(frozen=True)
class DetectorTransform:
    """Affine map between full-image pixels and detector-input pixels."""

    x0: float
    y0: float
    sx: float
    sy: float

    def to_detector(self, pts: np.ndarray) -> np.ndarray:
        p = np.asarray(pts, dtype=np.float64)
        out = np.empty_like(p)
        out[..., 0] = (p[..., 0] - self.x0) * self.sx
        out[..., 1] = (p[..., 1] - self.y0) * self.sy
        return out

    def to_image(self, pts: np.ndarray) -> np.ndarray:
        p = np.asarray(pts, dtype=np.float64)
        out = np.empty_like(p)
        out[..., 0] = p[..., 0] / self.sx + self.x0
        out[..., 1] = p[..., 1] / self.sy + self.y0
        return out


def detector_transform(cam: CameraModel, out_size: tuple[int, int]) -> DetectorTransform:
    """Transform induced by adapt_crop for a given detector input size (w, h)."""
    x0, y0, w, h = cam.crop_rect
    out_w, out_h = out_size
    return DetectorTransform(x0=float(x0), y0=float(y0),
                             sx=out_w / float(w), sy=out_h / float(h))


def adapt_crop(cam: CameraModel, frame: ImageFrame,
               out_size: tuple[int, int] | None = None) -> ImageFrame:
    """Cut the camera's crop_rect and resize to the detector input size.

    ``out_size`` is (width, height); None keeps the crop's own size. Raises
    ValueError when the frame does not match the camera dimensions.
    """
    if frame.width != cam.image_width or frame.height != cam.image_height:
        raise ValueError(
            f"frame {frame.width}x{frame.height} does not match camera "
            f"{cam.image_width}x{cam.image_height}"
        )
    x0, y0, w, h = cam.crop_rect
    sub = frame.pixels[y0:y0 + h, x0:x0 + w]
    if out_size is None:
        out_size = (w, h)
    out_w, out_h = out_size
    if (out_w, out_h) == (w, h):
        return ImageFrame(out_w, out_h, sub.copy())
    resized = bilinear_resize(sub.astype(np.float64), out_w, out_h)
    return ImageFrame(out_w, out_h, np.clip(np.rint(resized), 0, 255).astype(np.uint8))
