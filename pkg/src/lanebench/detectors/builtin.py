"""Built-in reference detectors.

The oracle reads the analytic lane geometry and is immune to road-surface
attacks by construction, so it validates the control loop. The classical
detector is a bright-marking scanner that genuinely reacts to pixels and can
be deceived by drawn lines and high-contrast patch textures.
"""

import numpy as np
from dataclasses import dataclass

from ..geometry import CameraModel, ImageFrame, project_ground_to_image, detector_transform
from ..lanes import LaneRepresentation
from ..objective import erc_polynomials, attack_loss
from .base import DetectorHandle, DetectorError

__all__ = ["OracleDetector", "ClassicalDetector", "ClassicalConfig", "default_h_samples"]


def default_h_samples(input_size: tuple[int, int], horizon_frac: float = 0.5,
                      margin: int = 12, step: int = 3) -> np.ndarray:
    w, h = input_size
    start = int(h * horizon_frac) + margin
    return np.arange(start, h - 1, step, dtype=np.float64)


class OracleDetector(DetectorHandle):
    """Projects the scenario's true ego lines; ignores the pixels entirely.

    The simulator binds the vehicle pose before each detect call. Output is
    the points family in detector-input coordinates, with optional Gaussian
    pixel noise derived deterministically from the bound pose. Because the
    pixels never enter the output, the loss gradient is identically zero,
    which the gradient interface reports honestly.
    """

    family = "points"
    supports_gradient = True

    def __init__(self, scene, cam: CameraModel, input_size: tuple[int, int] | None = None,
                 noise_px: float = 0.0, seed: int = 0):
        self.scene = scene
        self.cam = cam
        self.input_size = input_size or (cam.crop_rect[2], cam.crop_rect[3])
        self.noise_px = noise_px
        self.seed = seed
        self._pose = None
        self._transform = detector_transform(cam, self.input_size)

    def set_pose(self, state) -> None:
        self._pose = (float(state.x), float(state.y), float(state.psi))

    def line_points(self, state=None) -> list[np.ndarray]:
        """Detector-frame (x, y) samples of each painted lane line."""
        pose = self._pose if state is None else (state.x, state.y, state.psi)
        if pose is None:
            raise DetectorError("oracle has no bound pose")
        px, py, psi = pose
        c, s = np.cos(psi), np.sin(psi)
        lines = []
        for poly in self.scene.lane_polylines:
            # Fine steps so the projected samples reach the bottom image row.
            dense = _densify(poly, 0.15)
            dx = dense[:, 0] - px
            dy = dense[:, 1] - py
            fwd = dx * c + dy * s
            right = dx * s - dy * c
            ahead = fwd > 0.8
            if ahead.sum() < 2:
                continue
            img = project_ground_to_image(self.cam, np.stack(
                [right[ahead], fwd[ahead]], axis=1))
            det = self._transform.to_detector(img)
            order = np.argsort(det[:, 1])
            det = det[order]
            keep = (det[:, 1] >= 0) & (det[:, 1] <= self.input_size[1] - 1)
            if keep.sum() < 2:
                continue
            lines.append(det[keep])
        return lines

    def sampled_lines(self, h_samples, state=None) -> list[np.ndarray]:
        """Per-line x values on h_samples (NaN where the line is absent)."""
        hs = np.asarray(h_samples, dtype=np.float64)
        out = []
        for det in self.line_points(state):
            ys, xs = det[:, 1], det[:, 0]
            ys, idx = np.unique(ys, return_index=True)
            xs = xs[idx]
            vals = np.full(hs.shape, np.nan)
            inside = (hs >= ys[0]) & (hs <= ys[-1])
            vals[inside] = np.interp(hs[inside], ys, xs)
            out.append(vals)
        return out

    def detect(self, frame: ImageFrame) -> LaneRepresentation:
        self.check_frame(frame)
        lines = self.line_points()
        if self.noise_px > 0.0:
            rng = np.random.default_rng(
                np.random.SeedSequence((self.seed,) + tuple(
                    np.float64(v).view(np.uint64) for v in self._pose)))
            lines = [ln + rng.normal(0.0, self.noise_px, ln.shape) for ln in lines]
            lines = [ln[np.argsort(ln[:, 1])] for ln in lines]
            lines = [_strictly_increasing_y(ln) for ln in lines]
        return LaneRepresentation(points=[ln for ln in lines if len(ln) >= 2])

    def gradient(self, frame: ImageFrame, direction: str,
                 region: np.ndarray) -> np.ndarray:
        self.check_frame(frame)
        return np.zeros((frame.height, frame.width))


def _densify(poly: np.ndarray, step: float) -> np.ndarray:
    pts = [poly[0]]
    for a in range(len(poly) - 1):
        seg = poly[a + 1] - poly[a]
        n = max(1, int(np.ceil(np.hypot(*seg) / step)))
        for i in range(1, n + 1):
            pts.append(poly[a] + seg * (i / n))
    return np.asarray(pts)


def _strictly_increasing_y(line: np.ndarray) -> np.ndarray:
    keep = np.concatenate([[True], np.diff(line[:, 1]) > 0])
    return line[keep]


@dataclass(frozen=True)
class ClassicalConfig:
    """Pinned thresholds of the bright-marking scanner."""

    response_threshold: float = 25.0
    local_mean_window: int = 21
    smooth_rows: int = 3
    max_row_gap: int = 3
    chain_dx_per_row: float = 5.0
    min_rows: int = 8
    poly_degree: int = 3
    # Chains spanning less than this fraction of the below-horizon field are
    # fit linearly: a cubic extrapolated far beyond its support swings wildly.
    full_fit_span_frac: float = 0.55


class ClassicalDetector(DetectorHandle):
    """Per-row bright-marking scanner emitting the ego pair as cubics.

    Pipeline: grayscale, light vertical smoothing, per-row top-hat response
    (value minus local row mean), thresholded local maxima with parabolic
    sub-pixel refinement, nearest-neighbor chaining down the rows, and a
    least-squares cubic fit per chain. Of the fitted chains, the one closest
    to the image center on each side is emitted, since only the ego pair
    feeds lane centering.
    """

    family = "poly"
    supports_gradient = True

    def __init__(self, input_size: tuple[int, int], h_samples=None,
                 config: ClassicalConfig | None = None):
        self.input_size = tuple(input_size)
        self.config = config or ClassicalConfig()
        self.h_samples = (np.asarray(h_samples, dtype=np.float64)
                          if h_samples is not None
                          else default_h_samples(self.input_size))

    def detect(self, frame: ImageFrame) -> LaneRepresentation:
        self.check_frame(frame)
        coeffs = self._detect_gray(frame.gray())
        return LaneRepresentation(polynomials=coeffs)

    def _detect_gray(self, gray: np.ndarray) -> np.ndarray:
        rows, xs = self._row_peaks(self._response(gray))
        chains = [c for c in self._chain(rows, xs)
                  if len(c) >= self.config.min_rows]
        return self._select_and_fit(chains)

    def _select_and_fit(self, chains: list[list]) -> np.ndarray:
        """Fit the chain nearest the image center on each side (the ego pair)."""
        cfg = self.config
        if not chains:
            return np.zeros((0, cfg.poly_degree + 1))
        center = self.input_size[0] / 2.0
        left, right = None, None
        for chain in chains:
            bottom_x = chain[-1][1]
            if bottom_x < center:
                if left is None or bottom_x > left[-1][1]:
                    left = chain
            else:
                if right is None or bottom_x < right[-1][1]:
                    right = chain
        out = []
        for chain in (left, right):
            if chain is None:
                continue
            ys = np.array([p[0] for p in chain], dtype=np.float64)
            cx = np.array([p[1] for p in chain], dtype=np.float64)
            out.append(self._fit_cubic(ys, cx))
        return np.asarray(out).reshape(-1, cfg.poly_degree + 1)

    def _fit_cubic(self, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
        """Least-squares fit in normalized y for conditioning, pixel-basis output."""
        deg = min(self.config.poly_degree, len(ys) - 1)
        span = ys.max() - ys.min()
        if span < self.config.full_fit_span_frac * (self.input_size[1] / 2.0):
            deg = 1
        scale = float(self.input_size[1])
        fit = np.polyfit(ys / scale, xs, deg)
        # x = sum c_k u^(deg-k) with u = y/s  =>  pixel coeff = c_k / s^(deg-k)
        powers = scale ** np.arange(deg, -1, -1, dtype=np.float64)
        fit = fit / powers
        if deg < self.config.poly_degree:
            fit = np.concatenate([np.zeros(self.config.poly_degree - deg), fit])
        return fit

    def _response(self, gray: np.ndarray) -> np.ndarray:
        cfg = self.config
        k = cfg.smooth_rows
        pad = k // 2
        padded = np.pad(gray, ((pad, pad), (0, 0)), mode="edge")
        smooth = np.zeros_like(gray)
        for i in range(k):
            smooth += padded[i:i + gray.shape[0]]
        smooth /= k
        m = cfg.local_mean_window
        pad_c = m // 2
        padded_c = np.pad(smooth, ((0, 0), (pad_c, pad_c)), mode="edge")
        csum = np.cumsum(padded_c, axis=1)
        local = (csum[:, m - 1:] - np.concatenate(
            [np.zeros((gray.shape[0], 1)), csum[:, :-m]], axis=1)) / m
        return smooth - local

    def _row_peaks(self, resp: np.ndarray, row_offset: int = 0,
                   ) -> tuple[np.ndarray, np.ndarray]:
        """Rows and sub-pixel x of every accepted local maximum (vectorized)."""
        cfg = self.config
        inner = resp[:, 1:-1]
        is_peak = (inner >= cfg.response_threshold) \
            & (inner > resp[:, :-2]) & (inner >= resp[:, 2:])
        rows, cols = np.nonzero(is_peak)
        cols = cols + 1
        r0 = resp[rows, cols - 1]
        r1 = resp[rows, cols]
        r2 = resp[rows, cols + 1]
        denom = r0 - 2.0 * r1 + r2
        frac = np.where(denom < -1e-12,
                        0.5 * (r0 - r2) / np.where(denom < -1e-12, denom, -1.0),
                        0.0)
        return rows + row_offset, cols + np.clip(frac, -0.5, 0.5)

    def _chain(self, rows: np.ndarray, xs: np.ndarray) -> list[list]:
        """Greedy nearest-neighbor chaining, top of the image downward.

        Chains falling more than max_row_gap behind the sweep row are closed,
        keeping the per-peak candidate scan short even on noisy frames.
        """
        cfg = self.config
        open_chains: list[dict] = []
        closed: list[list] = []
        order = np.argsort(rows, kind="stable")
        rows = rows[order]
        xs = xs[order]
        i = 0
        n = len(rows)
        while i < n:
            r = rows[i]
            j = i
            while j < n and rows[j] == r:
                j += 1
            still_open = []
            for chain in open_chains:
                if r - chain["last_row"] > cfg.max_row_gap:
                    closed.append(chain["pts"])
                else:
                    still_open.append(chain)
            open_chains = still_open
            claimed: set[int] = set()
            for k in range(i, j):
                x = xs[k]
                best = None
                for ci, chain in enumerate(open_chains):
                    if ci in claimed:
                        continue
                    gap = r - chain["last_row"]
                    if gap <= 0:
                        continue
                    dx = abs(x - chain["last_x"])
                    if dx > cfg.chain_dx_per_row * gap:
                        continue
                    if best is None or dx < best[0]:
                        best = (dx, ci)
                if best is None:
                    open_chains.append({"last_row": int(r), "last_x": float(x),
                                        "pts": [(int(r), float(x))]})
                else:
                    chain = open_chains[best[1]]
                    claimed.add(best[1])
                    chain["last_row"] = int(r)
                    chain["last_x"] = float(x)
                    chain["pts"].append((int(r), float(x)))
            i = j
        closed.extend(chain["pts"] for chain in open_chains)
        return closed

    def frame_loss(self, gray: np.ndarray, direction: str) -> float:
        """Per-frame attack-loss contribution, NaN-free even with no lines."""
        coeffs = self._detect_gray(gray)
        if coeffs.shape[0] == 0:
            return attack_loss([0.5], direction)
        center = erc_polynomials(coeffs, self.h_samples,
                                 image_width=self.input_size[0])
        return attack_loss([center], direction)

    def gradient(self, frame: ImageFrame, direction: str,
                 region: np.ndarray) -> np.ndarray:
        """Central finite differences, one gray level, over the region mask.

        A one-pixel edit only moves the response on the three rows its
        vertical smoothing touches, so the base response and peaks are cached
        and only those rows are recomputed per probe; results are identical
        to re-running the full pipeline.
        """
        self.check_frame(frame)
        region = np.asarray(region, dtype=bool)
        if region.shape != (frame.height, frame.width):
            raise DetectorError("region mask must match the frame shape")
        gray = frame.gray()
        h = frame.height
        base_rows, base_xs = self._row_peaks(self._response(gray))
        grad = np.zeros_like(gray)
        rows, cols = np.nonzero(region)
        for r, c in zip(rows, cols):
            orig = gray[r, c]
            hi = min(orig + 1.0, 255.0)
            lo = max(orig - 1.0, 0.0)
            if hi == lo:
                continue
            lo_row = max(0, r - 1)
            hi_row = min(h - 1, r + 1)
            vals = []
            for v in (hi, lo):
                gray[r, c] = v
                vals.append(self._loss_with_rows_replaced(
                    gray, direction, base_rows, base_xs, lo_row, hi_row))
            gray[r, c] = orig
            grad[r, c] = (vals[0] - vals[1]) / (hi - lo)
        return grad

    def _loss_with_rows_replaced(self, gray: np.ndarray, direction: str,
                                 base_rows: np.ndarray, base_xs: np.ndarray,
                                 lo_row: int, hi_row: int) -> float:
        window_lo = max(0, lo_row - 1)
        window_hi = min(gray.shape[0] - 1, hi_row + 1)
        resp = self._response(gray[window_lo:window_hi + 1])
        take = slice(lo_row - window_lo, lo_row - window_lo + (hi_row - lo_row + 1))
        new_rows, new_xs = self._row_peaks(resp[take], row_offset=lo_row)
        keep = (base_rows < lo_row) | (base_rows > hi_row)
        rows = np.concatenate([base_rows[keep], new_rows])
        xs = np.concatenate([base_xs[keep], new_xs])
        chains = [c for c in self._chain(rows, xs)
                  if len(c) >= self.config.min_rows]
        coeffs = self._select_and_fit(chains)
        if coeffs.shape[0] == 0:
            return attack_loss([0.5], direction)
        center = erc_polynomials(coeffs, self.h_samples,
                                 image_width=self.input_size[0])
        return attack_loss([center], direction)
