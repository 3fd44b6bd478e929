"""Command-line entry points.

Verbs: eval-conv, eval-e2e, transfer, attack (artifact generation only),
render (debug frames), report (re-emit plots from a saved report).
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..artifacts import DrawnLine, RoadPatch
from ..imageio import encode_pgm, encode_ppm
from ..scene import render_scene
from ..simulator import Scenario
from . import report as report_mod
from .config import budget_from_config, load_config, scenario_from_config
from .experiments import (ExperimentSpec, generate_artifact, make_detector,
                          run_conventional, run_end_to_end, run_transfer)
from .plots import emit_plots

__all__ = ["main", "build_spec"]


def build_spec(args) -> ExperimentSpec:
    cfg = load_config(args.spec)
    scenarios = [scenario_from_config(load_config(s) if isinstance(s, str) else s)
                 for s in cfg.get("scenarios", [])]
    budget = budget_from_config(cfg.get("budget", {}))
    detectors = list(cfg.get("detectors", ["classical"]))
    if args.detector:
        detectors = list(args.detector)
    seeds = cfg.get("seeds", [0])
    if args.seed is not None:
        seeds = [args.seed]
    return ExperimentSpec(
        scenarios=scenarios,
        detectors=detectors,
        attacks=cfg.get("attacks", ["bb_line"]),
        directions=cfg.get("directions", ["left", "right"]),
        seeds=seeds,
        budget=budget,
        line_iterations=cfg.get("budget", {}).get("line_iterations", 200),
        output_dir=Path(args.out),
        jobs=args.jobs,
        pixel_threshold=cfg.get("pixel_threshold", 20.0),
        match_threshold=cfg.get("match_threshold", 0.85),
        dev_threshold=cfg.get("dev_threshold", 0.735),
        horizon_s=cfg.get("horizon_s", 2.5),
    )


def _save(report: dict, args, name: str) -> None:
    out = Path(args.out)
    path = out / name
    report_mod.save_report(report, path)
    emit_plots(report, out)
    print(f"report written to {path}")


def _cmd_eval_conv(args) -> int:
    spec = build_spec(args)
    _save(run_conventional(spec), args, "conventional_report.json")
    return 0


def _cmd_eval_e2e(args) -> int:
    spec = build_spec(args)
    _save(run_end_to_end(spec), args, "end_to_end_report.json")
    return 0


def _cmd_transfer(args) -> int:
    spec = build_spec(args)
    _save(run_transfer(spec), args, "transfer_report.json")
    return 0


def _cmd_attack(args) -> int:
    spec = build_spec(args)
    scenario = spec.scenarios[0]
    cam = scenario.camera.build()
    detector = make_detector(spec.detectors[0], scenario, cam)
    try:
        artifact, best_loss = generate_artifact(
            args.attack, scenario, detector, args.direction, spec.seeds[0],
            spec.budget, spec.line_iterations, cam=cam)
    finally:
        detector.close()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{args.attack}_{scenario.name}_{args.direction}_s{spec.seeds[0]}"
    if isinstance(artifact, RoadPatch):
        (out / f"{stem}.pgm").write_bytes(encode_pgm(artifact.rendered_gray()))
        sidecar = {
            "kind": "road_patch",
            "ground_origin": list(artifact.ground_origin),
            "size": list(artifact.size),
            "cell_m": artifact.cell_m,
            "base_gray": artifact.base_gray,
            "par": float(artifact.par_mask.mean()),
            "lane_overdraw": [list(seg) for seg in artifact.lane_overdraw],
            "best_loss": best_loss,
        }
    else:
        assert isinstance(artifact, DrawnLine)
        sidecar = {
            "kind": "drawn_line",
            "start": list(artifact.start),
            "end": list(artifact.end),
            "width": artifact.width,
            "color": artifact.color,
            "best_loss": best_loss,
        }
    (out / f"{stem}.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True)
                                      + "\n", encoding="utf-8")
    print(f"artifact written to {out / stem}.json")
    return 0


def _cmd_render(args) -> int:
    scenario = scenario_from_config(load_config(args.scenario))
    cam = scenario.camera.build()
    scene = scenario.scene()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from ..attack_common import reference_states
    states = reference_states(scenario, args.frames)
    for k, state in enumerate(states):
        frame = render_scene(scene, cam, state)
        name = out / f"{scenario.name}_f{k:03d}.{args.format}"
        data = encode_ppm(frame) if args.format == "ppm" \
            else encode_pgm(frame.gray())
        name.write_bytes(data)
    print(f"{len(states)} frames written to {out}")
    return 0


def _cmd_report(args) -> int:
    report = report_mod.load_report(args.report)
    created = emit_plots(report, Path(args.out))
    recomputed = report_mod.recompute_aggregates(report)
    if recomputed != report.get("aggregates"):
        print("warning: stored aggregates do not match recomputation",
              file=sys.stderr)
        return 1
    print(f"{len(created)} plot files written to {args.out}")
    return 0


def _add_common(p: argparse.ArgumentParser, spec_required: bool = True) -> None:
    p.add_argument("--spec", required=spec_required, help="experiment config file")
    p.add_argument("--seed", type=int, default=None, help="override seed list")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--detector", action="append", default=None,
                   help="detector name or cmd:<argv> (repeatable)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker count")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lanebench",
        description="Lane-detection robustness evaluation: frame metrics and "
                    "closed-loop simulation under road-surface attacks.")
    sub = parser.add_subparsers(dest="verb", required=True)

    for verb, fn in (("eval-conv", _cmd_eval_conv), ("eval-e2e", _cmd_eval_e2e),
                     ("transfer", _cmd_transfer)):
        p = sub.add_parser(verb)
        _add_common(p)
        p.set_defaults(fn=fn)

    p = sub.add_parser("attack", help="generate one attack artifact")
    _add_common(p)
    p.add_argument("--attack", choices=("wb_drp", "bb_drp", "bb_line"),
                   default="bb_line")
    p.add_argument("--direction", choices=("left", "right"), default="right")
    p.set_defaults(fn=_cmd_attack)

    p = sub.add_parser("render", help="write debug frames")
    p.add_argument("--scenario", required=True)
    p.add_argument("--frames", type=int, default=5)
    p.add_argument("--format", choices=("ppm", "pgm"), default="ppm")
    p.add_argument("--out", default="out/frames")
    p.set_defaults(fn=_cmd_render)

    p = sub.add_parser("report", help="re-emit plots from a saved report")
    p.add_argument("--report", required=True)
    p.add_argument("--out", default="out")
    p.set_defaults(fn=_cmd_report)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
