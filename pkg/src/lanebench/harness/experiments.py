"""Experiment orchestration: both evaluation tracks plus transferability.

A cell is one (scenario, detector, attack, direction, seed) combination.
Conventional cells score frame metrics on the generation window rendered
with the artifact in place; end-to-end cells run the closed loop with and
without the artifact and classify lateral-deviation outcomes; transfer cells
replay artifacts generated against one detector on every other detector.
Cells are independent and may run in a thread pool; rows are sorted before
aggregation so the report does not depend on scheduling.
"""

import shlex
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..artifacts import AttackBudget
from ..attack_common import ArtifactEvaluator, reference_states
from ..attack_line import optimize_line
from ..attack_patch import optimize_patch
from ..detectors import (ClassicalDetector, DetectorError, OracleDetector,
                         launch_command)
from ..geometry import adapt_crop
from ..lanes import LabeledLanes, LabeledLine, canonicalize, filter_ego
from ..metrics import (AccuracyConfig, DeviationTrace, classify_outcome,
                       lateral_deviation, match_and_score)
from ..simulator import Scenario, run_scenario
from . import report as report_mod

__all__ = ["ExperimentSpec", "run_conventional", "run_end_to_end", "run_transfer",
           "make_detector", "generate_artifact"]

ATTACKS = ("wb_drp", "bb_drp", "bb_line")
CONTROLLER_ID = "pure-pursuit-v1"


@dataclass
class ExperimentSpec:
    scenarios: list  # Scenario objects
    detectors: list  # "oracle" | "classical" | "cmd:<argv>"
    attacks: list = field(default_factory=lambda: ["bb_line"])
    directions: list = field(default_factory=lambda: ["left", "right"])
    seeds: list = field(default_factory=lambda: [0])
    budget: AttackBudget = field(default_factory=AttackBudget)
    line_iterations: int = 200
    output_dir: Path = Path("out")
    jobs: int = 1
    pixel_threshold: float = 20.0
    match_threshold: float = 0.85
    dev_threshold: float = 0.735
    horizon_s: float = 2.5

    def __post_init__(self):
        if not self.scenarios or not self.detectors:
            raise ValueError("spec needs at least one scenario and one detector")
        unknown = set(self.attacks) - set(ATTACKS)
        if unknown:
            raise ValueError(f"unknown attacks: {sorted(unknown)}")
        self.output_dir = Path(self.output_dir)

    def detector_label(self, name: str) -> str:
        if name in ("oracle", "classical"):
            return name
        return f"ext{self.detectors.index(name)}"

    def meta(self, track: str) -> dict:
        from .. import __version__
        return {
            "tool": "lanebench",
            "version": __version__,
            "track": track,
            "controller": CONTROLLER_ID,
            "detectors": [self.detector_label(d) for d in self.detectors],
            "attacks": list(self.attacks),
            "directions": list(self.directions),
            "seeds": list(self.seeds),
            "scenarios": [s.name for s in self.scenarios],
            "budget": {
                "iterations": self.budget.iterations,
                "learning_rate": self.budget.learning_rate,
                "lambda_reg": self.budget.lambda_reg,
                "par": self.budget.par,
                "nes_samples": self.budget.nes_samples,
                "nes_sigma": self.budget.nes_sigma,
                "line_iterations": self.line_iterations,
            },
        }


def make_detector(name: str, scenario: Scenario, cam):
    """Instantiate a detector handle for one cell (cells own their handles)."""
    if name == "oracle":
        return OracleDetector(scenario.scene(), cam)
    if name == "classical":
        size = (cam.crop_rect[2], cam.crop_rect[3])
        return ClassicalDetector(size, h_samples=scenario.h_samples(cam, size))
    if name.startswith("cmd:"):
        return launch_command(shlex.split(name[4:]))
    raise ValueError(f"unknown detector {name!r}")


def generate_artifact(attack: str, scenario: Scenario, detector, direction: str,
                      seed: int, budget: AttackBudget, line_iterations: int,
                      cam=None, evaluator: ArtifactEvaluator | None = None):
    """Run the attack's optimizer; returns (artifact, best_loss)."""
    if attack == "bb_line":
        res = optimize_line(scenario, detector, direction,
                            iterations=line_iterations, seed=seed, cam=cam,
                            evaluator=evaluator)
        return res.line, res.best_loss
    mode = "white_box" if attack == "wb_drp" else "black_box"
    res = optimize_patch(scenario, detector, direction, budget=budget,
                         mode=mode, seed=seed, cam=cam, evaluator=evaluator)
    return res.patch, res.best_loss


def _ground_truth(scenario: Scenario, cam, detector, h_samples, states):
    """Ego-filtered oracle lines in detector coordinates per frame."""
    oracle = OracleDetector(scenario.scene(), cam, input_size=detector.input_size)
    out = []
    for state in states:
        lines = [LabeledLine("other", xs)
                 for xs in oracle.sampled_lines(h_samples, state=state)]
        labeled = LabeledLanes(h_samples=h_samples, lines=lines)
        out.append(filter_ego(labeled, detector.input_size[0] / 2.0))
    return out


def _run_cells(cells, worker, jobs: int):
    if jobs <= 1:
        return [worker(cell) for cell in cells]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, cells))


def run_conventional(spec: ExperimentSpec) -> dict:
    """Frame-metric evaluation over the generation window, benign included."""
    cfg_base = dict(pixel_threshold=spec.pixel_threshold,
                    match_threshold=spec.match_threshold)
    cells = []
    for scenario in spec.scenarios:
        for det_name in spec.detectors:
            cells.append((scenario, det_name, "benign", "-", spec.seeds[0]))
            for attack in spec.attacks:
                for direction in spec.directions:
                    for seed in spec.seeds:
                        cells.append((scenario, det_name, attack, direction, seed))

    def worker(cell):
        scenario, det_name, attack, direction, seed = cell
        cam = scenario.camera.build()
        detector = make_detector(det_name, scenario, cam)
        try:
            evaluator = ArtifactEvaluator(scenario, detector, cam=cam)
            h_samples = evaluator.h_samples
            cfg = AccuracyConfig(h_samples=h_samples, **cfg_base)
            if attack == "benign":
                artifact, gen_loss = None, None
            else:
                artifact, gen_loss = generate_artifact(
                    attack, scenario, detector, direction, seed, spec.budget,
                    spec.line_iterations, cam=cam, evaluator=evaluator)
            gts = _ground_truth(scenario, cam, detector, h_samples,
                                evaluator.states)
            scores = []
            for state, frame, gt in zip(evaluator.states,
                                        evaluator.frames(artifact), gts):
                if hasattr(detector, "set_pose"):
                    detector.set_pose(state)
                rep = detector.detect(frame)
                preds = filter_ego(
                    canonicalize(rep, h_samples, scenario.detect_threshold),
                    detector.input_size[0] / 2.0)
                scores.append(match_and_score(preds, gt, cfg))
            row = {
                "scenario": scenario.name,
                "detector": spec.detector_label(det_name),
                "attack": attack,
                "direction": direction,
                "seed": seed,
                "accuracy": float(np.mean([s.accuracy for s in scores])),
                "f1": float(np.mean([s.f1 for s in scores])),
                "precision": float(np.mean([s.precision for s in scores])),
                "recall": float(np.mean([s.recall for s in scores])),
            }
            if gen_loss is not None:
                row["generation_loss"] = gen_loss
            return row
        finally:
            detector.close()

    rows = _run_cells(cells, worker, spec.jobs)
    rows.sort(key=_row_key)
    return report_mod.build_report(spec.meta("conventional"), conventional=rows)


def _row_key(row: dict):
    return tuple(str(row.get(k)) for k in
                 ("scenario", "detector", "source", "target", "attack",
                  "direction", "seed"))


def _e2e_cell(spec: ExperimentSpec, scenario: Scenario, gen_detector_name: str,
              eval_detector_name: str, attack: str, direction: str, seed: int,
              sidecar_prefix: str | None):
    """Generate with one detector, evaluate closed-loop with another."""
    cam = scenario.camera.build()
    gen_detector = make_detector(gen_detector_name, scenario, cam)
    try:
        artifact, gen_loss = generate_artifact(
            attack, scenario, gen_detector, direction, seed, spec.budget,
            spec.line_iterations, cam=cam)
    finally:
        gen_detector.close()
    eval_detector = make_detector(eval_detector_name, scenario, cam)
    try:
        benign = run_scenario(scenario.without_attack(), eval_detector, cam,
                              seed=seed)
        attacked = run_scenario(scenario.with_attack(artifact), eval_detector,
                                cam, seed=seed)
    finally:
        eval_detector.close()
    row = {
        "scenario": scenario.name,
        "detector": spec.detector_label(eval_detector_name),
        "attack": attack,
        "direction": direction,
        "seed": seed,
        "generation_loss": gen_loss,
        "valid": bool(benign.valid and attacked.valid),
        "degraded_frames": int(attacked.degraded_frames),
    }
    if not row["valid"]:
        row.update(targeted=False, untargeted=False, benign_fail=False,
                   max_deviation=float("nan"), time_to_threshold=None)
        return row, None
    trace = lateral_deviation(attacked, benign)
    benign_trace = DeviationTrace(times=benign.times,
                                  attacked=benign.lateral_offsets,
                                  reference=np.zeros_like(benign.lateral_offsets))
    outcome = classify_outcome(trace, direction, spec.dev_threshold,
                               spec.horizon_s, benign_trace=benign_trace)
    inside = trace.times <= spec.horizon_s + 1e-9
    dev = trace.deviation[inside]
    crossed = np.flatnonzero(np.abs(dev) >= spec.dev_threshold)
    row.update(
        targeted=outcome.targeted,
        untargeted=outcome.untargeted,
        benign_fail=outcome.benign_fail,
        max_deviation=float(np.max(np.abs(dev))),
        time_to_threshold=(float(trace.times[inside][crossed[0]])
                           if crossed.size else None),
    )
    sidecars = None
    if sidecar_prefix is not None:
        tdir = spec.output_dir / "trajectories"
        att_path = tdir / f"{sidecar_prefix}_attacked.csv"
        ben_path = tdir / f"{sidecar_prefix}_benign.csv"
        report_mod.write_trajectory_csv(att_path, attacked)
        report_mod.write_trajectory_csv(ben_path, benign)
        row["trajectory_attacked"] = str(att_path.relative_to(spec.output_dir))
        row["trajectory_benign"] = str(ben_path.relative_to(spec.output_dir))
        sidecars = (att_path, ben_path)
    return row, sidecars


def _benign_cell(spec: ExperimentSpec, scenario: Scenario, det_name: str,
                 seed: int):
    cam = scenario.camera.build()
    detector = make_detector(det_name, scenario, cam)
    try:
        benign = run_scenario(scenario.without_attack(), detector, cam, seed=seed)
    finally:
        detector.close()
    label = spec.detector_label(det_name)
    row = {
        "scenario": scenario.name,
        "detector": label,
        "attack": "benign",
        "direction": "-",
        "seed": seed,
        "valid": bool(benign.valid),
        "degraded_frames": int(benign.degraded_frames),
        "targeted": False,
        "untargeted": False,
    }
    if benign.valid:
        benign_trace = DeviationTrace(
            times=benign.times, attacked=benign.lateral_offsets,
            reference=np.zeros_like(benign.lateral_offsets))
        inside = benign_trace.times <= spec.horizon_s + 1e-9
        dev = benign_trace.deviation[inside]
        row["benign_fail"] = bool(np.any(np.abs(dev) >= spec.dev_threshold))
        row["max_deviation"] = float(np.max(np.abs(dev)))
        row["time_to_threshold"] = None
        prefix = f"e2e_{scenario.name}_{label}_benign_s{seed}"
        path = spec.output_dir / "trajectories" / f"{prefix}.csv"
        report_mod.write_trajectory_csv(path, benign)
        row["trajectory_attacked"] = None
        row["trajectory_benign"] = str(path.relative_to(spec.output_dir))
    else:
        row.update(benign_fail=False, max_deviation=float("nan"),
                   time_to_threshold=None)
    return row


def run_end_to_end(spec: ExperimentSpec) -> dict:
    """Closed-loop evaluation: attack rows plus benign rows per detector."""
    cells = []
    for scenario in spec.scenarios:
        for det_name in spec.detectors:
            for seed in spec.seeds:
                cells.append((scenario, det_name, "benign", "-", seed))
            for attack in spec.attacks:
                for direction in spec.directions:
                    for seed in spec.seeds:
                        cells.append((scenario, det_name, attack, direction, seed))

    def worker(cell):
        scenario, det_name, attack, direction, seed = cell
        if attack == "benign":
            return _benign_cell(spec, scenario, det_name, seed)
        label = spec.detector_label(det_name)
        prefix = f"e2e_{scenario.name}_{label}_{attack}_{direction}_s{seed}"
        row, _ = _e2e_cell(spec, scenario, det_name, det_name, attack,
                           direction, seed, prefix)
        return row

    rows = _run_cells(cells, worker, spec.jobs)
    rows.sort(key=_row_key)
    return report_mod.build_report(spec.meta("end_to_end"), end_to_end=rows)


def run_transfer(spec: ExperimentSpec) -> dict:
    """Replay artifacts generated against each detector on all the others."""
    cells = []
    for scenario in spec.scenarios:
        for src in spec.detectors:
            for tgt in spec.detectors:
                for attack in spec.attacks:
                    for direction in spec.directions:
                        for seed in spec.seeds:
                            cells.append((scenario, src, tgt, attack,
                                          direction, seed))

    def worker(cell):
        scenario, src, tgt, attack, direction, seed = cell
        row, _ = _e2e_cell(spec, scenario, src, tgt, attack, direction, seed,
                           None)
        row["source"] = spec.detector_label(src)
        row["target"] = spec.detector_label(tgt)
        del row["detector"]
        return row

    rows = _run_cells(cells, worker, spec.jobs)
    rows.sort(key=_row_key)
    return report_mod.build_report(spec.meta("transfer"), transfer=rows)
