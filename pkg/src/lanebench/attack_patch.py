"""Dirty-road-patch attack: projected gradient descent under stealth limits.

The perturbation lives on a coarse ground-plane grid. White-box mode pulls
per-pixel loss gradients from the detector and chains them through the
render coverage weights; black-box mode estimates the gradient with
antithetic NES sampling. Both share the same regularized update:

    delta <- delta - lr * (g / max|g| + lambda * delta)

with the gradient scaled to unit peak amplitude so the configured learning
rate moves the iterate at a victim-independent pace, followed by zeroing
outside the PAR mask and clamping so the rendered gray stays in [0, 255].
Internally deltas are optimized in width-normalized units (gray / 255).
"""

import numpy as np

from .artifacts import AttackBudget, RoadPatch
from .attack_common import ArtifactEvaluator
from .detectors.base import CapabilityError
from .simulator import Scenario

__all__ = ["nes_gradient", "optimize_patch", "PatchResult"]


def nes_gradient(f, x: np.ndarray, sigma: float, n_samples: int,
                 seed: int = 0) -> np.ndarray:
    """Antithetic NES estimate: (1 / (n sigma)) * sum_k f(x + sigma u_k) u_k.

    Samples come in (u, -u) pairs, each pair drawn from its own
    counter-derived stream, so the estimate does not depend on evaluation
    order and is reproducible given the seed.
    """
    if n_samples % 2 != 0 or n_samples <= 0:
        raise ValueError("n_samples must be a positive even count (antithetic pairs)")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for k in range(n_samples // 2):
        rng = np.random.default_rng(np.random.SeedSequence((seed, k)))
        u = rng.standard_normal(x.shape)
        grad += f(x + sigma * u) * u
        grad -= f(x - sigma * u) * u
    return grad / (n_samples * sigma)


class PatchResult:
    """Optimization outcome: the patch plus its loss history."""

    def __init__(self, patch: RoadPatch, losses: list[float], best_loss: float):
        self.patch = patch
        self.losses = losses
        self.best_loss = best_loss


def optimize_patch(scenario: Scenario, detector, direction: str,
                   budget: AttackBudget | None = None, mode: str = "white_box",
                   seed: int = 0, cam=None, base_gray: float = 101.0,
                   cell_m: float = 0.15, grad_pixel_stride: int = 3,
                   evaluator: ArtifactEvaluator | None = None,
                   iterate_hook=None) -> PatchResult:
    """Generate a dirty-road patch against ``detector`` on the scenario.

    The patch geometry comes from the scenario's attack area; lane paint
    crossing the patch is recorded as overdraw and always rendered on top.
    The PAR mask is fixed at iteration zero: the highest-magnitude gradient
    cells in white-box mode, a seeded uniform draw in black-box mode. The
    returned patch carries the best iterate seen. ``iterate_hook``, when
    given, observes (gray-level perturbation, mask) after every update.
    """
    if mode not in ("white_box", "black_box"):
        raise ValueError(f"unknown mode {mode!r}")
    budget = budget or AttackBudget()
    if mode == "white_box" and not detector.supports_gradient:
        raise CapabilityError("white_box mode needs a gradient-capable detector")

    area = scenario.attack_area
    patch = RoadPatch(
        ground_origin=(area.near_m, 0.0),
        size=(area.width_m, area.length_m),
        base_gray=base_gray,
        cell_m=cell_m,
    )
    scene = scenario.scene()
    patch = RoadPatch(ground_origin=patch.ground_origin, size=patch.size,
                      base_gray=base_gray, cell_m=cell_m,
                      lane_overdraw=scene.lane_overdraw_segments(patch))
    ev = evaluator or ArtifactEvaluator(scenario, detector, cam=cam)
    shape = patch.grid_shape()
    n_cells = shape[0] * shape[1]
    n_masked = max(1, int(np.floor(budget.par * n_cells)))

    lo = -patch.base_gray / 255.0
    hi = (255.0 - patch.base_gray) / 255.0
    sigma_norm = budget.nes_sigma / 255.0

    def rendered(delta_norm: np.ndarray) -> RoadPatch:
        return patch.with_perturbation(255.0 * delta_norm)

    def full_loss(delta_norm: np.ndarray) -> float:
        return ev.loss(rendered(delta_norm), direction)

    delta = np.zeros(shape)
    losses: list[float] = []
    if budget.iterations == 0:
        mask = _random_mask(shape, n_masked, seed)
        out = _masked_patch(patch, delta, mask)
        return PatchResult(out, losses, full_loss(delta))

    if mode == "white_box":
        g0 = _whitebox_gradient(ev, rendered(delta), direction, patch,
                                grad_pixel_stride)
        mask = _top_magnitude_mask(g0, shape, n_masked)
    else:
        mask = _random_mask(shape, n_masked, seed)

    best_delta = delta.copy()
    best_loss = full_loss(delta)
    losses.append(best_loss)
    mask_flat = mask.ravel()

    for it in range(budget.iterations):
        if mode == "white_box":
            grad = _whitebox_gradient(ev, rendered(delta), direction, patch,
                                      grad_pixel_stride)
        else:
            masked_idx = np.flatnonzero(mask_flat)

            def f_masked(vec: np.ndarray) -> float:
                d = delta.copy().ravel()
                d[masked_idx] = np.clip(vec, lo, hi)
                return full_loss(d.reshape(shape))

            g_vec = nes_gradient(f_masked, delta.ravel()[masked_idx],
                                 sigma_norm, budget.nes_samples,
                                 seed=_derive(seed, it))
            grad = np.zeros(n_cells)
            grad[masked_idx] = g_vec
            grad = grad.reshape(shape)

        peak = np.abs(grad).max()
        step_dir = grad / peak if peak > 0 else grad
        delta = delta - budget.learning_rate * (step_dir + budget.lambda_reg * delta)
        delta[~mask] = 0.0
        delta = np.clip(delta, lo, hi)
        if iterate_hook is not None:
            iterate_hook(255.0 * delta, mask)
        loss = full_loss(delta)
        losses.append(loss)
        if loss < best_loss:
            best_loss = loss
            best_delta = delta.copy()

    return PatchResult(_masked_patch(patch, best_delta, mask), losses, best_loss)


def _masked_patch(patch: RoadPatch, delta_norm: np.ndarray,
                  mask: np.ndarray) -> RoadPatch:
    return RoadPatch(ground_origin=patch.ground_origin, size=patch.size,
                     base_gray=patch.base_gray, cell_m=patch.cell_m,
                     perturbation=255.0 * delta_norm, par_mask=mask,
                     lane_overdraw=patch.lane_overdraw)


def _derive(seed: int, salt: int) -> int:
    return int(np.random.SeedSequence((seed, salt)).generate_state(1)[0])


def _random_mask(shape: tuple[int, int], n_masked: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xA5)))
    flat = np.zeros(shape[0] * shape[1], dtype=bool)
    flat[rng.choice(flat.size, size=n_masked, replace=False)] = True
    return flat.reshape(shape)


def _top_magnitude_mask(grad: np.ndarray, shape: tuple[int, int],
                        n_masked: int) -> np.ndarray:
    order = np.argsort(-np.abs(grad).ravel(), kind="stable")
    flat = np.zeros(shape[0] * shape[1], dtype=bool)
    flat[order[:n_masked]] = True
    return flat.reshape(shape)


def _whitebox_gradient(ev: ArtifactEvaluator, patch: RoadPatch, direction: str,
                       geometry: RoadPatch, stride: int) -> np.ndarray:
    """Cell-space loss gradient via the detector's pixel gradients.

    d(loss)/d(cell gray) is accumulated as pixel gradients weighted by the
    fraction of each pixel covered by the cell; the 255 factor moves it to
    normalized units. Requires the identity detector adaptation so pixel
    indices line up between render and detector input.
    """
    if not ev._identity_adapt:
        raise CapabilityError(
            "white-box patch gradients require the identity detector adaptation")
    h, w = ev.cam.image_height, ev.cam.image_width
    shape = geometry.grid_shape()
    n_lat = shape[1]
    total = np.zeros(shape[0] * n_lat)
    n_frames = len(ev.contexts)
    for state, ctx in zip(ev.states, ev.contexts):
        frame = ctx.apply(patch)
        pix_idx, cell_idx, weights = ctx.patch_pixel_cells(geometry)
        if pix_idx.size == 0:
            continue
        region = np.zeros(h * w, dtype=bool)
        rows = pix_idx // w
        cols = pix_idx % w
        keep = (rows % stride == 0) & (cols % stride == 0)
        region[pix_idx[keep]] = True
        grad_px = ev.detector.gradient(frame, direction, region.reshape(h, w))
        contrib = grad_px.ravel()[pix_idx] * weights
        np.add.at(total, cell_idx, contrib)
    return (255.0 * total / n_frames).reshape(shape)
