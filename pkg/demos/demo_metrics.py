"""Frame metrics by hand: accuracy, matching and F1 on toy lines."""

import numpy as np

from lanebench.lanes import LabeledLanes, LabeledLine
from lanebench.metrics import AccuracyConfig, line_accuracy, match_and_score

hs = np.arange(5.0)
cfg = AccuracyConfig(h_samples=hs)

gt = np.full(5, 100.0)
pred_close = gt + np.array([3.0, -12.0, 19.0, 0.0, 5.0])   # within 20 px
pred_off = gt + np.array([30.0, 45.0, 2.0, 80.0, -1.0])    # mostly outside

print("row accuracy, close prediction:", line_accuracy(pred_close, gt, cfg))
print("row accuracy, poor prediction:", line_accuracy(pred_off, gt, cfg))

preds = LabeledLanes(h_samples=hs, lines=[LabeledLine("other", pred_close)])
gts = LabeledLanes(h_samples=hs, lines=[LabeledLine("other", gt),
                                        LabeledLine("other", gt + 200.0)])
res = match_and_score(preds, gts, cfg)
print(f"one good prediction vs two truths: accuracy={res.accuracy:.3f} "
      f"precision={res.precision:.2f} recall={res.recall:.2f} f1={res.f1:.3f}")
