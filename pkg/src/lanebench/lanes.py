"""Lane representation families, canonical sampling and ego-line filtering.

Four output families are supported:

  - points:       per-line (x, y) pixel lists with strictly increasing y
  - prob_maps:    (L, H, W) per-pixel lane-existence probabilities
  - polynomials:  (L, d+1) coefficient rows, highest degree first, x = p(y)
  - anchors:      proposals with probability, y rows, anchor x and offsets

Canonical form is a set of lines sampled on a common row set with NaN
marking absent rows, plus a role label per line.
"""

import numpy as np
from dataclasses import dataclass, field

__all__ = [
    "AnchorProposal",
    "LaneRepresentation",
    "LabeledLine",
    "LabeledLanes",
    "EGO_LEFT",
    "EGO_RIGHT",
    "canonicalize",
    "filter_ego",
]

EGO_LEFT = "ego-left"
EGO_RIGHT = "ego-right"
LEFT_LEFT = "left-left"
RIGHT_RIGHT = "right-right"
OTHER = "other"

_ROLES = (EGO_LEFT, EGO_RIGHT, LEFT_LEFT, RIGHT_RIGHT, OTHER)
_ROW_SUM_TOL = 1e-6


@dataclass(frozen=True)
class AnchorProposal:
    """One anchor: probability, row indices and x = anchor + offset per row."""

    pi: float
    ys: np.ndarray
    xs: np.ndarray
    deltas: np.ndarray

    def __post_init__(self):
        ys = np.asarray(self.ys, dtype=np.float64)
        xs = np.asarray(self.xs, dtype=np.float64)
        ds = np.asarray(self.deltas, dtype=np.float64)
        if not (ys.shape == xs.shape == ds.shape):
            raise ValueError("ys, xs and deltas must have matching shapes")
        if not 0.0 <= self.pi <= 1.0:
            raise ValueError(f"anchor probability {self.pi} outside [0, 1]")
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "deltas", ds)


@dataclass(frozen=True)
class LaneRepresentation:
    """Exactly one of the four family payloads is set."""

    points: list | None = None
    prob_maps: np.ndarray | None = None
    polynomials: np.ndarray | None = None
    anchors: list | None = None
    row_normalized: bool = True  # prob_maps: rows are distributions (row-wise family)

    def __post_init__(self):
        present = [name for name in ("points", "prob_maps", "polynomials", "anchors")
                   if getattr(self, name) is not None]
        if len(present) != 1:
            raise ValueError(f"exactly one family must be set, got {present}")
        if self.points is not None:
            pts = [np.asarray(line, dtype=np.float64).reshape(-1, 2)
                   for line in self.points]
            for line in pts:
                if line.shape[0] >= 2 and not np.all(np.diff(line[:, 1]) > 0):
                    raise ValueError("per-line y samples must be strictly increasing")
            object.__setattr__(self, "points", pts)
        if self.prob_maps is not None:
            maps = np.asarray(self.prob_maps, dtype=np.float64)
            if maps.ndim != 3:
                raise ValueError("prob_maps must have shape (L, H, W)")
            if maps.min() < 0.0 or maps.max() > 1.0:
                raise ValueError("probabilities must lie in [0, 1]")
            if self.row_normalized and np.any(maps.sum(axis=2) > 1.0 + _ROW_SUM_TOL):
                raise ValueError("row-wise family: per-row mass must sum to <= 1")
            object.__setattr__(self, "prob_maps", maps)
        if self.polynomials is not None:
            coeffs = np.atleast_2d(np.asarray(self.polynomials, dtype=np.float64))
            object.__setattr__(self, "polynomials", coeffs)
        if self.anchors is not None:
            props = [a if isinstance(a, AnchorProposal) else AnchorProposal(**a)
                     for a in self.anchors]
            object.__setattr__(self, "anchors", props)

    @property
    def family(self) -> str:
        if self.points is not None:
            return "points"
        if self.prob_maps is not None:
            return "probmap"
        if self.polynomials is not None:
            return "poly"
        return "anchors"


@dataclass
class LabeledLine:
    """A line sampled on the shared row set; NaN marks absent rows."""

    role: str
    xs: np.ndarray

    def __post_init__(self):
        if self.role not in _ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        self.xs = np.asarray(self.xs, dtype=np.float64)

    def present(self) -> np.ndarray:
        return ~np.isnan(self.xs)

    def bottom_x(self) -> float | None:
        """x at the lowest (closest to the vehicle) present row, None if empty."""
        idx = np.flatnonzero(self.present())
        if idx.size == 0:
            return None
        return float(self.xs[idx[-1]])


@dataclass
class LabeledLanes:
    """Lines on a shared strictly increasing row set ``h_samples``."""

    h_samples: np.ndarray
    lines: list = field(default_factory=list)

    def __post_init__(self):
        self.h_samples = np.asarray(self.h_samples, dtype=np.float64)
        if self.h_samples.size and not np.all(np.diff(self.h_samples) > 0):
            raise ValueError("h_samples must be strictly increasing")
        ego_roles = [ln.role for ln in self.lines if ln.role in (EGO_LEFT, EGO_RIGHT)]
        if len(ego_roles) != len(set(ego_roles)):
            raise ValueError("at most one line per ego role")

    def by_role(self, role: str) -> LabeledLine | None:
        for ln in self.lines:
            if ln.role == role:
                return ln
        return None


def canonicalize(rep: LaneRepresentation, h_samples, threshold: float = 0.5,
                 ) -> LabeledLanes:
    """Convert any family to lines sampled on ``h_samples`` (roles all 'other').

    prob_maps: per row the argmax column if its probability clears the
    threshold. polynomials: evaluated at every row. anchors: proposals with
    pi >= threshold, present on their own rows. points: linear resampling.
    """
    hs = np.asarray(h_samples, dtype=np.float64)
    if hs.size == 0:
        raise ValueError("empty h_samples")
    lines: list[LabeledLine] = []

    if rep.points is not None:
        for line in rep.points:
            xs = np.full(hs.shape, np.nan)
            if line.shape[0] == 1:
                exact = np.isclose(hs, line[0, 1])
                xs[exact] = line[0, 0]
            elif line.shape[0] >= 2:
                inside = (hs >= line[0, 1]) & (hs <= line[-1, 1])
                xs[inside] = np.interp(hs[inside], line[:, 1], line[:, 0])
            lines.append(LabeledLine(OTHER, xs))
    elif rep.prob_maps is not None:
        height = rep.prob_maps.shape[1]
        rows = np.clip(np.rint(hs).astype(int), 0, height - 1)
        for lane_map in rep.prob_maps:
            probs = lane_map[rows]
            best = probs.argmax(axis=1).astype(np.float64)
            best_p = probs.max(axis=1)
            xs = np.where(best_p >= threshold, best, np.nan)
            lines.append(LabeledLine(OTHER, xs))
    elif rep.polynomials is not None:
        for coeffs in rep.polynomials:
            lines.append(LabeledLine(OTHER, np.polyval(coeffs, hs)))
    else:
        for prop in rep.anchors:
            if prop.pi < threshold:
                continue
            xs = np.full(hs.shape, np.nan)
            vals = prop.xs + prop.deltas
            for y, x in zip(prop.ys, vals):
                hit = np.isclose(hs, y)
                xs[hit] = x
            lines.append(LabeledLine(OTHER, xs))
    return LabeledLanes(h_samples=hs, lines=lines)


def filter_ego(labeled: LabeledLanes, image_center_x: float) -> LabeledLanes:
    """Keep only the two lines straddling the image center at the bottom.

    ego-left is the line whose bottom-row x is the greatest value strictly
    below the center; ego-right the smallest value at or right of it. The
    bottom-most present sample is used because rows closest to the vehicle
    dominate lane centering. Returns 0-2 lines.
    """
    left_best: tuple[float, LabeledLine] | None = None
    right_best: tuple[float, LabeledLine] | None = None
    for ln in labeled.lines:
        bx = ln.bottom_x()
        if bx is None:
            continue
        if bx < image_center_x:
            if left_best is None or bx > left_best[0]:
                left_best = (bx, ln)
        else:
            if right_best is None or bx < right_best[0]:
                right_best = (bx, ln)
    kept = []
    if left_best is not None:
        kept.append(LabeledLine(EGO_LEFT, left_best[1].xs.copy()))
    if right_best is not None:
        kept.append(LabeledLine(EGO_RIGHT, right_best[1].xs.copy()))
    return LabeledLanes(h_samples=labeled.h_samples.copy(), lines=kept)
