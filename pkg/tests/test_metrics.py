import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lanebench.lanes import LabeledLanes, LabeledLine
from lanebench.metrics import (AccuracyConfig, DeviationTrace, classify_outcome,
                               lateral_deviation, line_accuracy, match_and_score,
                               match_and_score_bruteforce)

CFG3 = AccuracyConfig(h_samples=np.arange(3.0))


def lanes(*lines, hs=3):
    return LabeledLanes(h_samples=np.arange(float(hs)),
                        lines=[LabeledLine("other", np.asarray(x, dtype=float))
                               for x in lines])


def test_line_accuracy_exact_match():
    assert line_accuracy(np.array([5.0, 6.0, 7.0]), np.array([5.0, 6.0, 7.0]),
                         CFG3) == 1.0


def test_line_accuracy_threshold_rule():
    gt = np.array([100.0, 100.0, 100.0])
    pred = np.array([110.0, 125.0, 100.0])
    assert line_accuracy(pred, gt, CFG3) == pytest.approx(2.0 / 3.0)


def test_line_accuracy_all_absent_pred():
    pred = np.full(3, np.nan)
    gt = np.array([10.0, 10.0, 10.0])
    assert line_accuracy(pred, gt, CFG3) == 0.0


def test_line_accuracy_both_absent_counts():
    pred = np.array([10.0, np.nan, np.nan])
    gt = np.array([10.0, np.nan, 50.0])
    assert line_accuracy(pred, gt, CFG3) == pytest.approx(2.0 / 3.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.one_of(st.floats(0, 500), st.none()), min_size=4, max_size=4),
       st.lists(st.one_of(st.floats(0, 500), st.none()), min_size=4, max_size=4))
def test_line_accuracy_symmetric(a, b):
    cfg = AccuracyConfig(h_samples=np.arange(4.0))
    xa = np.array([np.nan if v is None else v for v in a])
    xb = np.array([np.nan if v is None else v for v in b])
    assert line_accuracy(xa, xb, cfg) == line_accuracy(xb, xa, cfg)


def test_match_perfect_single_pair():
    res = match_and_score(lanes([5.0, 5.0, 5.0]), lanes([5.0, 5.0, 5.0]), CFG3)
    assert res.accuracy == 1.0 and res.f1 == 1.0


def test_match_above_threshold_is_tp():
    # Pair accuracy 2/3 < 0.85 fails; widen threshold via a 0.6 cutoff.
    cfg = AccuracyConfig(match_threshold=0.6, h_samples=np.arange(3.0))
    res = match_and_score(lanes([110.0, 125.0, 100.0]),
                          lanes([100.0, 100.0, 100.0]), cfg)
    assert res.f1 == 1.0 and res.precision == 1.0 and res.recall == 1.0


def test_match_two_gts_one_perfect_pred():
    res = match_and_score(lanes([5.0, 5.0, 5.0]),
                          lanes([5.0, 5.0, 5.0], [200.0, 200.0, 200.0]), CFG3)
    assert res.precision == 1.0
    assert res.recall == 0.5
    assert res.f1 == pytest.approx(2.0 / 3.0)
    assert res.accuracy == pytest.approx(0.5)


def test_match_no_tp_gives_zero_f1():
    res = match_and_score(lanes([100.0, 100.0, 100.0]),
                          lanes([400.0, 400.0, 400.0]), CFG3)
    assert res.f1 == 0.0


def _random_instance(rng):
    hs = np.arange(5.0)
    def mk():
        out = []
        for _ in range(rng.integers(0, 5)):
            xs = rng.uniform(0, 300, size=5)
            xs[rng.random(5) < 0.2] = np.nan
            out.append(xs)
        return out
    return (LabeledLanes(h_samples=hs, lines=[LabeledLine("other", x) for x in mk()]),
            LabeledLanes(h_samples=hs, lines=[LabeledLine("other", x) for x in mk()]))


def test_match_equals_bruteforce_oracle():
    rng = np.random.default_rng(11)
    cfg = AccuracyConfig(h_samples=np.arange(5.0))
    for _ in range(200):
        preds, gts = _random_instance(rng)
        fast = match_and_score(preds, gts, cfg)
        slow = match_and_score_bruteforce(preds, gts, cfg)
        assert fast == slow


def test_f1_bounds_and_equality():
    rng = np.random.default_rng(3)
    cfg = AccuracyConfig(h_samples=np.arange(5.0))
    for _ in range(100):
        preds, gts = _random_instance(rng)
        res = match_and_score(preds, gts, cfg)
        assert 0.0 <= res.f1 <= 1.0
        if res.f1 == 1.0:
            assert res.precision == 1.0 and res.recall == 1.0
        if res.precision == 1.0 and res.recall == 1.0:
            assert res.f1 == 1.0


def _traj(offsets, dt=0.05):
    t = np.arange(len(offsets)) * dt
    return (t, np.asarray(offsets, dtype=float))


def test_lateral_deviation_identical_runs():
    base = _traj(np.linspace(0, 0.3, 51))
    trace = lateral_deviation(base, base)
    np.testing.assert_allclose(trace.deviation, 0.0)


def test_lateral_deviation_constant_shift():
    t, ref = _traj(np.zeros(51))
    trace = lateral_deviation((t, ref + 0.5), (t, ref))
    np.testing.assert_allclose(trace.deviation, 0.5)


def test_lateral_deviation_linear_drift():
    t = np.arange(51) * 0.05
    dev = t / 2.5  # reaches 1.0 m at 2.5 s
    trace = lateral_deviation((t, dev), (t, np.zeros(51)))
    assert trace.deviation.max() == pytest.approx(1.0)
    assert trace.times[np.argmax(trace.deviation)] == pytest.approx(2.5)


def test_lateral_deviation_timestamp_mismatch():
    with pytest.raises(ValueError):
        lateral_deviation(_traj(np.zeros(5)), _traj(np.zeros(6)))


def _trace(devs, dt=0.05):
    t = np.arange(len(devs)) * dt
    return DeviationTrace(times=t, attacked=np.asarray(devs, dtype=float),
                          reference=np.zeros(len(devs)))


def test_classify_targeted_right():
    devs = np.zeros(51)
    devs[40] = 0.8  # t = 2.0 s
    out = classify_outcome(_trace(devs), "right")
    assert out.targeted and out.untargeted


def test_classify_wrong_direction():
    devs = np.zeros(51)
    devs[40] = -0.8
    out = classify_outcome(_trace(devs), "right")
    assert not out.targeted and out.untargeted


def test_classify_below_threshold():
    devs = np.full(51, 0.5)
    out = classify_outcome(_trace(devs), "right")
    assert not out.targeted and not out.untargeted and not out.benign_fail


def test_classify_benign_failure_flag():
    benign = _trace(np.full(51, 0.9))
    out = classify_outcome(_trace(np.zeros(51)), "left", benign_trace=benign)
    assert out.benign_fail


def test_classify_needs_full_horizon():
    with pytest.raises(ValueError):
        classify_outcome(_trace(np.zeros(20)), "left")


def test_targeted_implies_untargeted():
    rng = np.random.default_rng(9)
    for _ in range(50):
        devs = rng.normal(0, 0.6, size=51)
        for direction in ("left", "right"):
            out = classify_outcome(_trace(devs), direction)
            if out.targeted:
                assert out.untargeted


def test_crossing_after_horizon_ignored():
    t = np.arange(61) * 0.05  # 3.0 s trace
    devs = np.zeros(61)
    devs[55] = 2.0  # at 2.75 s, outside the 2.5 s horizon
    trace = DeviationTrace(times=t, attacked=devs, reference=np.zeros(61))
    out = classify_outcome(trace, "right")
    assert not out.targeted and not out.untargeted
