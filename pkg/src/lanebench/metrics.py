"""Frame-level accuracy/F1 scoring and closed-loop deviation classification.

Scoring follows the line-matching convention used by lane-detection
benchmarks: a predicted point is correct when it lands within a pixel
threshold of the ground-truth point on the same row, rows where both lines
agree there is no lane also count as correct, and a prediction/ground-truth
pair is a true positive when its row accuracy clears the match threshold.

Lateral signs: positive deviation means rightward in the vehicle frame.
"""

import numpy as np
from dataclasses import dataclass, field

from .lanes import LabeledLanes

__all__ = [
    "AccuracyConfig",
    "MatchResult",
    "DeviationTrace",
    "Outcome",
    "line_accuracy",
    "match_and_score",
    "match_and_score_bruteforce",
    "lateral_deviation",
    "classify_outcome",
]

DEVIATION_THRESHOLD_M = 0.735
REACTION_HORIZON_S = 2.5


@dataclass(frozen=True)
class AccuracyConfig:
    pixel_threshold: float = 20.0
    match_threshold: float = 0.85
    h_samples: np.ndarray = field(default_factory=lambda: np.arange(0))

    def __post_init__(self):
        if self.pixel_threshold <= 0:
            raise ValueError("pixel_threshold must be positive")
        if not 0.0 < self.match_threshold <= 1.0:
            raise ValueError("match_threshold must lie in (0, 1]")
        object.__setattr__(self, "h_samples",
                           np.asarray(self.h_samples, dtype=np.float64))


@dataclass(frozen=True)
class MatchResult:
    accuracy: float
    f1: float
    precision: float
    recall: float


def _as_xs(line) -> np.ndarray:
    xs = getattr(line, "xs", line)
    return np.asarray(xs, dtype=np.float64)


def line_accuracy(pred, gt, cfg: AccuracyConfig) -> float:
    """Fraction of rows where pred and gt agree (both absent also counts)."""
    pred_xs = _as_xs(pred)
    gt_xs = _as_xs(gt)
    n = pred_xs.size
    if n == 0:
        raise ValueError("empty h_samples")
    if gt_xs.size != n:
        raise ValueError("pred and gt must be sampled on the same rows")
    p_ok = ~np.isnan(pred_xs)
    g_ok = ~np.isnan(gt_xs)
    both = p_ok & g_ok
    tp = np.zeros(n, dtype=bool)
    tp[both] = np.abs(pred_xs[both] - gt_xs[both]) <= cfg.pixel_threshold
    tp[~p_ok & ~g_ok] = True
    return float(tp.sum()) / n


def _greedy_pairs(acc: np.ndarray) -> list[tuple[int, int]]:
    """One-to-one matching, repeatedly taking the highest-accuracy pair.

    Ties break on the lower prediction index, then the lower gt index, so the
    matching is fully deterministic.
    """
    n_pred, n_gt = acc.shape
    order = sorted(
        ((i, j) for i in range(n_pred) for j in range(n_gt)),
        key=lambda ij: (-acc[ij[0], ij[1]], ij[0], ij[1]),
    )
    used_p: set[int] = set()
    used_g: set[int] = set()
    pairs = []
    for i, j in order:
        if i in used_p or j in used_g:
            continue
        pairs.append((i, j))
        used_p.add(i)
        used_g.add(j)
    return pairs


def match_and_score(preds: LabeledLanes, gts: LabeledLanes,
                    cfg: AccuracyConfig) -> MatchResult:
    """Greedy one-to-one matching of predictions to ground-truth lines.

    Reported accuracy is the mean over ground-truth lines of the matched
    pair accuracy (zero for unmatched gts). F1 is zero when there is no
    true positive.
    """
    pred_lines = list(preds.lines)
    gt_lines = list(gts.lines)
    n_pred, n_gt = len(pred_lines), len(gt_lines)
    if n_pred == 0 or n_gt == 0:
        acc = 0.0
        tp = 0
    else:
        table = np.empty((n_pred, n_gt))
        for i, p in enumerate(pred_lines):
            for j, g in enumerate(gt_lines):
                table[i, j] = line_accuracy(p, g, cfg)
        pairs = _greedy_pairs(table)
        matched = [table[i, j] for i, j in pairs]
        tp = sum(1 for a in matched if a >= cfg.match_threshold)
        acc = float(sum(matched)) / n_gt
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_gt if n_gt else 0.0
    f1 = 0.0 if tp == 0 else 2.0 / (1.0 / recall + 1.0 / precision)
    return MatchResult(accuracy=acc, f1=f1, precision=precision, recall=recall)


def match_and_score_bruteforce(preds: LabeledLanes, gts: LabeledLanes,
                               cfg: AccuracyConfig) -> MatchResult:
    """Independent oracle for :func:`match_and_score` on small instances.

    Enumerates the accuracy table explicitly and walks it by repeated global
    argmax over the remaining rows/columns instead of a sorted sweep. Kept
    separate so tests can compare the two implementations.
    """
    pred_lines = list(preds.lines)
    gt_lines = list(gts.lines)
    n_pred, n_gt = len(pred_lines), len(gt_lines)
    if n_pred == 0 or n_gt == 0:
        matched = []
    else:
        table = np.empty((n_pred, n_gt))
        for i, p in enumerate(pred_lines):
            for j, g in enumerate(gt_lines):
                table[i, j] = line_accuracy(p, g, cfg)
        work = table.copy()
        matched = []
        for _ in range(min(n_pred, n_gt)):
            best = None
            for i in range(n_pred):
                for j in range(n_gt):
                    if np.isnan(work[i, j]):
                        continue
                    if best is None or work[i, j] > work[best] + 0.0:
                        best = (i, j)
            assert best is not None
            matched.append(table[best])
            work[best[0], :] = np.nan
            work[:, best[1]] = np.nan
    tp = sum(1 for a in matched if a >= cfg.match_threshold)
    acc = float(sum(matched)) / n_gt if n_gt else 0.0
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_gt if n_gt else 0.0
    f1 = 0.0 if tp == 0 else 2.0 / (1.0 / recall + 1.0 / precision)
    return MatchResult(accuracy=acc, f1=f1, precision=precision, recall=recall)


@dataclass(frozen=True)
class DeviationTrace:
    """Per-timestamp lateral offsets of an attacked and a reference run."""

    times: np.ndarray
    attacked: np.ndarray
    reference: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        a = np.asarray(self.attacked, dtype=np.float64)
        r = np.asarray(self.reference, dtype=np.float64)
        if not (t.shape == a.shape == r.shape):
            raise ValueError("times/attacked/reference must align")
        if t.size >= 2 and not np.all(np.diff(t) > 0):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "attacked", a)
        object.__setattr__(self, "reference", r)

    @property
    def deviation(self) -> np.ndarray:
        """Signed attacked-minus-reference offset, positive to the right."""
        return self.attacked - self.reference


def _offsets(traj) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(traj, tuple):
        t, o = traj
        return np.asarray(t, dtype=np.float64), np.asarray(o, dtype=np.float64)
    return (np.asarray(traj.times, dtype=np.float64),
            np.asarray(traj.lateral_offsets, dtype=np.float64))


def lateral_deviation(attacked, reference) -> DeviationTrace:
    """Build the deviation trace of an attacked run against a reference run.

    Both arguments are trajectories (anything with ``times`` and
    ``lateral_offsets``, or (times, offsets) tuples) sampled on identical
    timestamps.
    """
    ta, oa = _offsets(attacked)
    tr, orr = _offsets(reference)
    if ta.shape != tr.shape or not np.allclose(ta, tr, atol=1e-12):
        raise ValueError("trajectories must share identical timestamps")
    return DeviationTrace(times=ta, attacked=oa, reference=orr)


@dataclass(frozen=True)
class Outcome:
    targeted: bool
    untargeted: bool
    benign_fail: bool


def classify_outcome(trace: DeviationTrace, direction: str,
                     dev_threshold: float = DEVIATION_THRESHOLD_M,
                     horizon: float = REACTION_HORIZON_S,
                     benign_trace: DeviationTrace | None = None) -> Outcome:
    """Attack-success flags within the reaction horizon.

    Targeted success requires the signed deviation to cross the threshold in
    the attack direction (right = positive); untargeted accepts either side.
    benign_fail applies the untargeted rule to ``benign_trace`` (a benign run
    against its reference), False when no benign trace is given.
    """
    if direction not in ("left", "right"):
        raise ValueError(f"unknown direction {direction!r}")
    if trace.times.size == 0 or trace.times[-1] < horizon - 1e-9:
        raise ValueError("trace does not cover the evaluation horizon")
    inside = trace.times <= horizon + 1e-9
    dev = trace.deviation[inside]
    signed = dev if direction == "right" else -dev
    targeted = bool(np.any(signed >= dev_threshold))
    untargeted = bool(np.any(np.abs(dev) >= dev_threshold))
    benign_fail = False
    if benign_trace is not None:
        b_inside = benign_trace.times <= horizon + 1e-9
        benign_fail = bool(np.any(np.abs(benign_trace.deviation[b_inside]) >= dev_threshold))
    return Outcome(targeted=targeted, untargeted=untargeted, benign_fail=benign_fail)
