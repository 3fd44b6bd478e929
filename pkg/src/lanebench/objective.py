"""Expected-road-center objective shared by all attack strategies.

Each detector family is reduced to a single scalar: the probability-weighted
mean lateral position of everything the detector reported, expressed in
normalized image width so that a centered road reads 0.5. Attacks to the
right maximize the value, attacks to the left minimize it; the optimizers
always minimize ``attack_loss``.
"""

import numpy as np

from .lanes import LaneRepresentation

__all__ = [
    "erc_probmaps",
    "erc_polynomials",
    "erc_anchors",
    "expected_road_center",
    "attack_loss",
]


def _norm(x, width: float | None):
    """Map pixel columns to [0, 1], saturated at the image edges.

    Detector families that emit positions directly are bounded by the image
    by construction; saturating here keeps families that emit unbounded
    parameterizations (polynomial fits) comparable, instead of rewarding
    evaluations far outside the visible scene. Identity when width is None
    (inputs already normalized).
    """
    if width is None:
        return np.asarray(x, dtype=np.float64)
    if width <= 1:
        raise ValueError("image width must exceed 1 pixel")
    return np.clip(np.asarray(x, dtype=np.float64) / (width - 1.0), 0.0, 1.0)


def erc_probmaps(maps: np.ndarray, row_normalize: bool = True) -> float:
    """Center of mass of (L, H, W) probability maps in normalized width.

    With ``row_normalize`` each row is scaled to unit mass first (rows with
    no mass contribute nothing), which makes the result a position and keeps
    the centered-road value at 0.5. The raw variant sums the maps as given.
    """
    maps = np.asarray(maps, dtype=np.float64)
    if maps.ndim != 3:
        raise ValueError("prob_maps must have shape (L, H, W)")
    n_lanes, height, width = maps.shape
    if n_lanes < 1:
        raise ValueError("need at least one map")
    total = maps.sum()
    if total <= 0.0:
        raise ValueError("no lane mass")
    cols = np.arange(width, dtype=np.float64) / (width - 1.0)
    if row_normalize:
        row_mass = maps.sum(axis=2, keepdims=True)
        scaled = np.divide(maps, row_mass, out=np.zeros_like(maps),
                           where=row_mass > 0.0)
    else:
        scaled = maps
    return float((scaled * cols).sum() / (n_lanes * height))


def erc_polynomials(coeffs: np.ndarray, h_samples,
                    image_width: float | None = None) -> float:
    """Mean polynomial evaluation over all lines and sampled rows.

    Coefficients are highest-degree-first in x = p(y). With ``image_width``
    the x values are normalized by (width - 1); otherwise they are taken as
    already normalized.
    """
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=np.float64))
    hs = np.asarray(h_samples, dtype=np.float64)
    if coeffs.shape[0] < 1:
        raise ValueError("need at least one polynomial")
    if hs.size == 0:
        raise ValueError("empty h_samples")
    vals = np.stack([np.polyval(c, hs) for c in coeffs])
    return float(_norm(vals, image_width).mean())


def erc_anchors(anchors, image_width: float | None = None) -> float:
    """Probability-weighted anchor positions; probabilities used as given."""
    if not anchors:
        raise ValueError("empty anchor set")
    total = 0.0
    for prop in anchors:
        xs = np.asarray(prop.xs, dtype=np.float64) + np.asarray(prop.deltas,
                                                                dtype=np.float64)
        if xs.size == 0:
            raise ValueError("anchor proposal with no rows")
        total += float(_norm(xs, image_width).mean()) * float(prop.pi)
    return total


def expected_road_center(rep: LaneRepresentation, image_width: float | None,
                         h_samples=None, row_normalize: bool = True) -> float:
    """Dispatch the family-specific center computation.

    The points family is scored as the mean sampled position, consistent with
    the other families. ``h_samples`` is only needed for polynomials.
    """
    if rep.prob_maps is not None:
        return erc_probmaps(rep.prob_maps, row_normalize=row_normalize)
    if rep.polynomials is not None:
        if h_samples is None:
            raise ValueError("polynomial family needs h_samples")
        return erc_polynomials(rep.polynomials, h_samples, image_width)
    if rep.anchors is not None:
        return erc_anchors(rep.anchors, image_width)
    xs = np.concatenate([line[:, 0] for line in rep.points if line.shape[0]])
    if xs.size == 0:
        raise ValueError("no lane points")
    return float(_norm(xs, image_width).mean())


def attack_loss(frame_centers, direction: str) -> float:
    """Scalar to minimize: negated mean center for right attacks, plain for left."""
    centers = np.asarray(list(frame_centers), dtype=np.float64)
    if centers.size == 0:
        raise ValueError("need at least one frame")
    mean = float(centers.mean())
    if direction == "right":
        return -mean
    if direction == "left":
        return mean
    raise ValueError(f"unknown direction {direction!r}")
