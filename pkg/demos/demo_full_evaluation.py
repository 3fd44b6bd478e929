"""Small end-to-end evaluation: report JSON, trajectory CSVs and SVG plots.

Uses a reduced budget so the whole demo finishes in about a minute; swap in
the paper_defaults budget for the full 200-iteration protocol.
"""

from pathlib import Path

from lanebench.artifacts import AttackBudget
from lanebench.harness.experiments import ExperimentSpec, run_end_to_end
from lanebench.harness.plots import emit_plots
from lanebench.harness.report import save_report
from lanebench.harness.config import load_scenario

out = Path(__file__).parent / "out" / "evaluation"
spec = ExperimentSpec(
    scenarios=[load_scenario("straight_attack")],
    detectors=["oracle", "classical"],
    attacks=["bb_line"],
    directions=["right"],
    seeds=[0],
    budget=AttackBudget(iterations=5),
    line_iterations=60,
    output_dir=out,
)
report = run_end_to_end(spec)
save_report(report, out / "end_to_end_report.json")
plots = emit_plots(report, out)
for key, cell in report["aggregates"]["end_to_end"].items():
    print(f"{key}: untargeted {cell['untargeted_rate']:.0%} "
          f"(max dev {cell['max_deviation_mean']:.2f} m, n={cell['n']})")
print(f"report and {len(plots)} plots under {out}")
