import json
from pathlib import Path

import numpy as np
import pytest

from lanebench.artifacts import AttackBudget
from lanebench.harness.config import deep_merge, load_config, load_scenario
from lanebench.harness.experiments import (ExperimentSpec, run_conventional,
                                           run_end_to_end, run_transfer)
from lanebench.harness.plots import deviation_curves_svg, emit_plots, heatmap_svg
from lanebench.harness.report import (load_report, read_trajectory_csv,
                                      recompute_aggregates, save_report,
                                      write_trajectory_csv)
from lanebench.harness.cli import main
from lanebench.simulator import Scenario


def tiny_spec(tmp_path, detectors=("classical",), attacks=("bb_line",),
              seeds=(0,), directions=("right",), line_iterations=25):
    return ExperimentSpec(
        scenarios=[Scenario(name="tiny", generation_frames=4)],
        detectors=list(detectors),
        attacks=list(attacks),
        directions=list(directions),
        seeds=list(seeds),
        budget=AttackBudget(iterations=3, nes_samples=4),
        line_iterations=line_iterations,
        output_dir=tmp_path,
    )


def test_conventional_oracle_is_perfect(tmp_path):
    spec = tiny_spec(tmp_path, detectors=("oracle",), line_iterations=5)
    report = run_conventional(spec)
    for row in report["conventional"]:
        assert row["accuracy"] == pytest.approx(1.0)
        assert row["f1"] == pytest.approx(1.0)


def test_conventional_classical_benign_gate(tmp_path):
    spec = tiny_spec(tmp_path, attacks=())
    report = run_conventional(spec)
    benign = [r for r in report["conventional"] if r["attack"] == "benign"]
    assert benign and all(r["accuracy"] >= 0.95 for r in benign)


def test_conventional_line_attack_degrades_accuracy(tmp_path):
    spec = tiny_spec(tmp_path, line_iterations=60)
    report = run_conventional(spec)
    rows = report["conventional"]
    benign_acc = [r["accuracy"] for r in rows if r["attack"] == "benign"][0]
    attack_acc = [r["accuracy"] for r in rows if r["attack"] == "bb_line"][0]
    assert attack_acc < benign_acc


def test_e2e_oracle_immune(tmp_path):
    spec = tiny_spec(tmp_path, detectors=("oracle",), line_iterations=5)
    report = run_end_to_end(spec)
    for row in report["end_to_end"]:
        assert not row["targeted"] and not row["untargeted"]
        assert not row["benign_fail"]


def test_e2e_empty_attacks_yields_benign_rows_only(tmp_path):
    spec = tiny_spec(tmp_path, attacks=())
    report = run_end_to_end(spec)
    rows = report["end_to_end"]
    assert rows and all(r["attack"] == "benign" for r in rows)


def test_e2e_report_structure_and_sidecars(tmp_path):
    spec = tiny_spec(tmp_path, line_iterations=40)
    report = run_end_to_end(spec)
    attack_rows = [r for r in report["end_to_end"] if r["attack"] == "bb_line"]
    assert attack_rows
    row = attack_rows[0]
    traj = read_trajectory_csv(tmp_path / row["trajectory_attacked"])
    assert traj["t"].size == 51
    assert report["aggregates"] == recompute_aggregates(report)


def test_transfer_single_detector_diagonal(tmp_path):
    spec = tiny_spec(tmp_path, line_iterations=40)
    tr = run_transfer(spec)
    e2e = run_end_to_end(spec)
    agg = tr["aggregates"]["transfer"]
    assert agg["sources"] == ["classical"] and agg["targets"] == ["classical"]
    rate = agg["untargeted_matrix"]["classical"]["classical"]
    e2e_cell = e2e["aggregates"]["end_to_end"]["classical|bb_line|right"]
    assert rate == e2e_cell["untargeted_rate"]


def test_transfer_oracle_target_column_zero(tmp_path):
    spec = tiny_spec(tmp_path, detectors=("classical", "oracle"),
                     line_iterations=30)
    tr = run_transfer(spec)
    matrix = tr["aggregates"]["transfer"]["untargeted_matrix"]
    for src in matrix:
        assert matrix[src]["oracle"] == 0.0


def test_report_determinism(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    rep_a = run_end_to_end(tiny_spec(out_a, line_iterations=30))
    rep_b = run_end_to_end(tiny_spec(out_b, line_iterations=30))
    save_report(rep_a, out_a / "report.json")
    save_report(rep_b, out_b / "report.json")
    assert (out_a / "report.json").read_bytes() == (out_b / "report.json").read_bytes()
    for rel in [r["trajectory_attacked"] for r in rep_a["end_to_end"]
                if r.get("trajectory_attacked")]:
        assert (out_a / rel).read_bytes() == (out_b / rel).read_bytes()


def test_emit_plots_outputs(tmp_path):
    spec = tiny_spec(tmp_path, line_iterations=30)
    report = run_end_to_end(spec)
    created = emit_plots(report, tmp_path)
    assert any(p.name.startswith("deviation_") for p in created)
    # Re-emission reproduces identical bytes.
    contents = {p: p.read_bytes() for p in created}
    again = emit_plots(report, tmp_path)
    for p in again:
        assert p.read_bytes() == contents[p]


def test_emit_plots_empty_report(tmp_path):
    assert emit_plots({"meta": {}}, tmp_path) == []


def test_heatmap_contains_all_cells():
    svg = heatmap_svg(["a", "b"], ["a", "b"],
                      {"a": {"a": 1.0, "b": 0.5}, "b": {"a": 0.0, "b": None}})
    assert svg.count("<rect") == 5  # 4 cells + background
    assert "100%" in svg and "50%" in svg and "-" in svg


def test_deviation_svg_shape():
    t = np.linspace(0, 2.5, 51)
    svg = deviation_curves_svg([("run", t, np.sin(t))])
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert "polyline" in svg


def test_config_include_merging(tmp_path):
    base = tmp_path / "base.json"
    base.write_text(json.dumps({"a": 1, "nested": {"x": 1, "y": 2}}))
    child = tmp_path / "child.json"
    child.write_text(json.dumps({"include": ["base.json"], "088_ignored": 0,
                                 "nested": {"y": 3}}))
    cfg = load_config(child)
    assert cfg["a"] == 1 and cfg["nested"] == {"x": 1, "y": 3}


def test_deep_merge_overrides_scalars():
    assert deep_merge({"a": {"b": 1}, "c": 2}, {"a": {"b": 5}})["a"]["b"] == 5


def test_packaged_presets_resolve():
    sc = load_scenario("straight_attack")
    assert sc.lane_width == 3.6
    assert sc.attack_area.near_m == 7.0
    cfg = load_config("paper_defaults")
    assert cfg["pixel_threshold"] == 20
    assert cfg["dev_threshold"] == 0.735
    assert cfg["budget"]["iterations"] == 200


def test_cli_render_and_report(tmp_path):
    out = tmp_path / "frames"
    rc = main(["render", "--scenario", "straight_attack", "--frames", "2",
               "--out", str(out), "--format", "pgm"])
    assert rc == 0
    files = sorted(out.glob("*.pgm"))
    assert len(files) == 2
    assert files[0].read_bytes().startswith(b"P5")


def test_cli_eval_e2e_smoke(tmp_path):
    cfg = {
        "include": ["paper_defaults"],
        "scenarios": [{"name": "cli_tiny", "generation_frames": 3}],
        "detectors": ["oracle"],
        "attacks": ["bb_line"],
        "directions": ["right"],
        "seeds": [0],
        "budget": {"line_iterations": 4},
    }
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(cfg))
    rc = main(["eval-e2e", "--spec", str(spec_path), "--out", str(tmp_path)])
    assert rc == 0
    report = load_report(tmp_path / "end_to_end_report.json")
    assert report["meta"]["track"] == "end_to_end"
    rc2 = main(["report", "--report", str(tmp_path / "end_to_end_report.json"),
                "--out", str(tmp_path)])
    assert rc2 == 0


def test_cli_attack_artifact(tmp_path):
    cfg = {
        "include": ["paper_defaults"],
        "scenarios": [{"name": "art", "generation_frames": 2}],
        "detectors": ["classical"],
        "budget": {"line_iterations": 6},
    }
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(cfg))
    rc = main(["attack", "--spec", str(spec_path), "--attack", "bb_line",
               "--direction", "left", "--out", str(tmp_path)])
    assert rc == 0
    sidecars = list(tmp_path.glob("bb_line_*.json"))
    assert sidecars
    data = json.loads(sidecars[0].read_text())
    assert data["kind"] == "drawn_line" and "best_loss" in data


def test_jobs_parallel_matches_serial(tmp_path):
    spec1 = tiny_spec(tmp_path / "s1", detectors=("oracle", "classical"),
                      line_iterations=10)
    spec2 = tiny_spec(tmp_path / "s2", detectors=("oracle", "classical"),
                      line_iterations=10)
    spec2.jobs = 4
    rep1 = run_conventional(spec1)
    rep2 = run_conventional(spec2)
    assert rep1["conventional"] == rep2["conventional"]
