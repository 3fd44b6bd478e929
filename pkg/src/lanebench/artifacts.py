"""Physical attack artifacts placed on the road surface.

Ground coordinates of artifacts are expressed in the lane frame at the
first simulation frame: x is meters forward from the vehicle's starting
position along the lane, y is meters to the RIGHT of the lane center.
"""

import numpy as np
from dataclasses import dataclass, field

__all__ = ["RoadPatch", "DrawnLine", "AttackBudget", "AttackArea"]

PATCH_CELL_M = 0.15
LINE_WIDTH_MIN_M = 0.012
LINE_WIDTH_MAX_M = 0.12


@dataclass(frozen=True)
class AttackArea:
    """Rectangle the artifact must stay inside: [near, near+length] x [±width/2]."""

    near_m: float = 7.0
    length_m: float = 36.0
    width_m: float = 3.6

    def bounds(self) -> tuple[tuple[float, float], ...]:
        half = self.width_m / 2.0
        return ((self.near_m, self.near_m + self.length_m), (-half, half))

    def contains(self, x: float, y: float) -> bool:
        (x0, x1), (y0, y1) = self.bounds()
        return x0 <= x <= x1 and y0 <= y <= y1


@dataclass(frozen=True)
class AttackBudget:
    """Optimization budget and step sizes shared by the patch attacks."""

    iterations: int = 200
    learning_rate: float = 1e-2
    lambda_reg: float = 1e-3
    par: float = 0.5
    nes_samples: int = 100
    nes_sigma: float = 10.0  # gray levels

    def __post_init__(self):
        for name in ("learning_rate", "lambda_reg", "nes_sigma"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.iterations < 0 or self.nes_samples <= 0:
            raise ValueError("iterations and nes_samples must be positive")
        if not 0.0 < self.par <= 1.0:
            raise ValueError("perturbable area ratio must lie in (0, 1]")


@dataclass(frozen=True)
class RoadPatch:
    """Gray road patch with a perturbation grid under stealth constraints.

    The rendered surface is clamp(base_gray + perturbation, 0, 255), equal in
    all three color channels. ``perturbation`` has one row per longitudinal
    cell and one column per lateral cell at ``cell_m`` resolution; cells
    outside ``par_mask`` must stay exactly zero.
    """

    ground_origin: tuple[float, float]  # (forward m, lateral-right m of center)
    size: tuple[float, float]  # (width m across lane, length m along lane)
    base_gray: float = 101.0
    cell_m: float = PATCH_CELL_M
    perturbation: np.ndarray | None = None
    par_mask: np.ndarray | None = None
    lane_overdraw: tuple = ()  # ((x0,y0,x1,y1, width_m), ...) lane paint on the patch

    def __post_init__(self):
        width, length = self.size
        if width <= 0 or length <= 0:
            raise ValueError("patch size must be positive")
        shape = self.grid_shape()
        pert = (np.zeros(shape) if self.perturbation is None
                else np.asarray(self.perturbation, dtype=np.float64))
        mask = (np.ones(shape, dtype=bool) if self.par_mask is None
                else np.asarray(self.par_mask, dtype=bool))
        if pert.shape != shape or mask.shape != shape:
            raise ValueError(f"grid shape must be {shape}")
        if np.any(pert[~mask] != 0.0):
            raise ValueError("perturbation outside the PAR mask must be zero")
        object.__setattr__(self, "perturbation", pert)
        object.__setattr__(self, "par_mask", mask)

    def grid_shape(self) -> tuple[int, int]:
        width, length = self.size
        return (max(1, int(round(length / self.cell_m))),
                max(1, int(round(width / self.cell_m))))

    def rendered_gray(self) -> np.ndarray:
        return np.clip(self.base_gray + self.perturbation, 0.0, 255.0)

    def with_perturbation(self, pert: np.ndarray) -> "RoadPatch":
        return RoadPatch(ground_origin=self.ground_origin, size=self.size,
                         base_gray=self.base_gray, cell_m=self.cell_m,
                         perturbation=pert, par_mask=self.par_mask,
                         lane_overdraw=self.lane_overdraw)

    def cell_index(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Grid indices of ground points (lane frame); caller masks to the rect."""
        x0, yc = self.ground_origin
        width, length = self.size
        n_long, n_lat = self.grid_shape()
        ix = np.clip(((x - x0) / self.cell_m).astype(int), 0, n_long - 1)
        iy = np.clip(((y - (yc - width / 2.0)) / self.cell_m).astype(int), 0, n_lat - 1)
        return ix, iy

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x0, yc = self.ground_origin
        width, length = self.size
        return ((x >= x0) & (x <= x0 + length)
                & (y >= yc - width / 2.0) & (y <= yc + width / 2.0))


@dataclass(frozen=True)
class DrawnLine:
    """A painted line segment: endpoints in the lane frame, width and gray."""

    start: tuple[float, float]
    end: tuple[float, float]
    width: float
    color: float = 230.0

    def __post_init__(self):
        if tuple(self.start) == tuple(self.end):
            raise ValueError("line endpoints must differ")
        if not LINE_WIDTH_MIN_M <= self.width <= LINE_WIDTH_MAX_M:
            raise ValueError(
                f"line width {self.width} outside "
                f"[{LINE_WIDTH_MIN_M}, {LINE_WIDTH_MAX_M}] m"
            )
        if not 0.0 <= self.color <= 255.0:
            raise ValueError("color must be an 8-bit gray value")
