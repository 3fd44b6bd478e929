"""Drawing-lane-line attack: line parameter search with a TPE sampler.

The search space is (start_x, start_y, end_x, end_y, width): endpoints
inside the scenario's attack area, width between 1.2 and 12 cm. Losses are
never differentiated, so any detector works. The sampler splits past
observations at a loss quantile, fits per-dimension Gaussian kernel
densities to the good split, and proposes the candidate with the best
good-to-bad density ratio.
"""

import math
import numpy as np
from dataclasses import dataclass, field
from statistics import NormalDist

from .artifacts import DrawnLine, LINE_WIDTH_MIN_M, LINE_WIDTH_MAX_M
from .attack_common import ArtifactEvaluator
from .simulator import Scenario

__all__ = ["TpeState", "tpe_suggest", "optimize_line", "LineResult"]

_NORMAL = NormalDist()


@dataclass
class TpeState:
    """Observation history plus the sampler's knobs."""

    observations: list = field(default_factory=list)  # (params array, loss)
    gamma: float = 0.25
    n_startup: int = 20
    n_candidates: int = 24
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")

    def observe(self, params: np.ndarray, loss: float) -> None:
        self.observations.append((np.asarray(params, dtype=np.float64),
                                  float(loss)))

    def best(self) -> tuple[np.ndarray, float]:
        if not self.observations:
            raise ValueError("no observations")
        idx = int(np.argmin([l for _, l in self.observations]))
        return self.observations[idx]


def _kde_bandwidths(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Per-kernel bandwidth: neighbor spacing floored at 1% of the range."""
    span = hi - lo
    floor = 0.01 * span
    if values.size == 1:
        return np.array([max(span, floor)])
    order = np.argsort(values, kind="stable")
    sorted_vals = values[order]
    gaps = np.diff(sorted_vals)
    left = np.concatenate([[span], gaps])
    right = np.concatenate([gaps, [span]])
    bw_sorted = np.maximum(np.maximum(left, right), floor)
    bw = np.empty_like(bw_sorted)
    bw[order] = bw_sorted
    return bw


def _trunc_sample(rng, mu: float, bw: float, lo: float, hi: float) -> float:
    a = _NORMAL.cdf((lo - mu) / bw)
    b = _NORMAL.cdf((hi - mu) / bw)
    u = rng.uniform(a, b)
    u = min(max(u, 1e-12), 1.0 - 1e-12)
    return mu + bw * _NORMAL.inv_cdf(u)


def _trunc_logpdf(x: float, mus: np.ndarray, bws: np.ndarray,
                  lo: float, hi: float) -> float:
    """Log density of the equal-weight truncated-Gaussian mixture."""
    z = (x - mus) / bws
    raw = np.exp(-0.5 * z * z) / (bws * math.sqrt(2.0 * math.pi))
    mass = np.array([_NORMAL.cdf((hi - m) / b) - _NORMAL.cdf((lo - m) / b)
                     for m, b in zip(mus, bws)])
    dens = raw / np.maximum(mass, 1e-12)
    return math.log(max(float(dens.mean()), 1e-300))


def tpe_suggest(state: TpeState, space) -> np.ndarray:
    """Next point to evaluate inside the box ``space`` ((lo, hi) per dim).

    Uniform until ``n_startup`` observations exist; afterwards candidates are
    drawn from the good-split density and ranked by the good/bad log-density
    ratio. Fully deterministic given the state seed and history length.
    """
    space = np.asarray(space, dtype=np.float64)
    if space.ndim != 2 or space.shape[1] != 2 or np.any(space[:, 1] <= space[:, 0]):
        raise ValueError("space must be nondegenerate (lo < hi per dimension)")
    n_dim = space.shape[0]
    rng = np.random.default_rng(
        np.random.SeedSequence((state.rng_seed, len(state.observations))))
    if len(state.observations) < state.n_startup:
        return rng.uniform(space[:, 0], space[:, 1])

    params = np.stack([p for p, _ in state.observations])
    losses = np.asarray([l for _, l in state.observations])
    n_good = max(1, int(np.ceil(state.gamma * len(losses))))
    order = np.argsort(losses, kind="stable")
    good = params[order[:n_good]]
    bad = params[order[n_good:]]
    if bad.shape[0] == 0:
        bad = good

    good_bw = [_kde_bandwidths(good[:, d], space[d, 0], space[d, 1])
               for d in range(n_dim)]
    bad_bw = [_kde_bandwidths(bad[:, d], space[d, 0], space[d, 1])
              for d in range(n_dim)]

    best_cand, best_score = None, -np.inf
    for _ in range(state.n_candidates):
        kernel = int(rng.integers(good.shape[0]))
        cand = np.array([
            _trunc_sample(rng, good[kernel, d], good_bw[d][kernel],
                          space[d, 0], space[d, 1])
            for d in range(n_dim)
        ])
        score = 0.0
        for d in range(n_dim):
            score += _trunc_logpdf(cand[d], good[:, d], good_bw[d],
                                   space[d, 0], space[d, 1])
            score -= _trunc_logpdf(cand[d], bad[:, d], bad_bw[d],
                                   space[d, 0], space[d, 1])
        if score > best_score:
            best_cand, best_score = cand, score
    return best_cand


class LineResult:
    """Search outcome: the best line plus the full observation history."""

    def __init__(self, line: DrawnLine, best_loss: float, losses: list[float]):
        self.line = line
        self.best_loss = best_loss
        self.losses = losses


def line_space(scenario: Scenario) -> np.ndarray:
    (x0, x1), (y0, y1) = scenario.attack_area.bounds()
    return np.array([
        (x0, x1), (y0, y1), (x0, x1), (y0, y1),
        (LINE_WIDTH_MIN_M, LINE_WIDTH_MAX_M),
    ])


def canonical_params(params: np.ndarray) -> np.ndarray:
    """Order endpoints by forward distance: swapping start and end draws the
    same line, and collapsing the duplicate mode keeps the sampler's good-set
    density unimodal."""
    out = np.asarray(params, dtype=np.float64).copy()
    if out[2] < out[0]:
        out[[0, 1, 2, 3]] = out[[2, 3, 0, 1]]
    return out


def params_to_line(params: np.ndarray, color: float = 230.0) -> DrawnLine:
    sx, sy, ex, ey, width = (float(v) for v in canonical_params(params))
    if (sx, sy) == (ex, ey):
        ex += 1e-6
    return DrawnLine(start=(sx, sy), end=(ex, ey), width=width, color=color)


def optimize_line(scenario: Scenario, detector, direction: str,
                  iterations: int = 200, seed: int = 0, cam=None,
                  color: float = 230.0,
                  evaluator: ArtifactEvaluator | None = None,
                  tpe: TpeState | None = None) -> LineResult:
    """Search for the most damaging drawable line on this scenario."""
    if iterations <= 0:
        raise ValueError("no observations")
    ev = evaluator or ArtifactEvaluator(scenario, detector, cam=cam)
    state = tpe or TpeState(rng_seed=seed)
    space = line_space(scenario)
    losses: list[float] = []
    for _ in range(iterations):
        params = canonical_params(tpe_suggest(state, space))
        line = params_to_line(params, color=color)
        loss = ev.loss(line, direction)
        state.observe(params, loss)
        losses.append(loss)
    best_params, best_loss = state.best()
    return LineResult(params_to_line(best_params, color=color), best_loss, losses)
