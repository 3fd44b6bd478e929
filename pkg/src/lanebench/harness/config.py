"""Structured JSON configuration with includes and packaged presets.

A config file may carry an ``include`` list of other config files (relative
to the including file, or bare preset names resolved against the packaged
presets); included dictionaries merge depth-first with the including file
winning. Every benchmark constant lives in the ``paper_defaults`` preset so
experiment configs never restate magic numbers.
"""

import json
from importlib import resources
from pathlib import Path

from ..artifacts import AttackArea, AttackBudget
from ..simulator import CameraConfig, Scenario

__all__ = ["load_config", "deep_merge", "scenario_from_config", "budget_from_config",
           "preset_path", "load_scenario"]


def preset_path(name: str) -> Path:
    """Path of a packaged preset: 'paper_defaults' or 'scenarios/<name>'."""
    root = resources.files("lanebench") / "presets"
    for cand in (name, f"{name}.json", f"scenarios/{name}.json"):
        p = root / cand
        if p.is_file():
            return Path(str(p))
    raise FileNotFoundError(f"no packaged preset named {name!r}")


def deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if key in out and isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path) -> dict:
    """Load a JSON config, resolving its include chain."""
    path = Path(path)
    if not path.is_file():
        path = preset_path(str(path))
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    merged: dict = {}
    for inc in data.pop("include", []):
        inc_path = Path(inc)
        if not inc_path.is_absolute():
            local = path.parent / inc_path
            inc_path = local if local.is_file() else preset_path(inc)
        merged = deep_merge(merged, load_config(inc_path))
    return deep_merge(merged, data)


def scenario_from_config(cfg: dict) -> Scenario:
    cam = CameraConfig(**cfg.get("camera", {}))
    area_cfg = cfg.get("attack_area", {})
    area = AttackArea(
        near_m=area_cfg.get("near_m", 7.0),
        length_m=area_cfg.get("length_m", 36.0),
        width_m=area_cfg.get("width_m", 3.6),
    )
    known = {
        "name", "lane_width", "length_m", "curve_radius", "speed_mps",
        "speed_trace", "wheelbase", "duration_frames", "generation_frames",
        "detect_rate_hz", "actuate_rate_hz", "initial_offset",
        "initial_heading", "render_mode", "road_gray", "sky_gray",
        "line_gray", "line_width_m", "lookahead_time_s", "lookahead_min_m",
        "detect_threshold", "h_row_margin", "h_row_step",
        "steer_rate_limit_deg",
    }
    fields = {k: v for k, v in cfg.items() if k in known}
    if "speed_trace" in fields:
        fields["speed_trace"] = tuple(tuple(p) for p in fields["speed_trace"])
    return Scenario(camera=cam, attack_area=area, **fields)


def budget_from_config(cfg: dict) -> AttackBudget:
    known = {"iterations", "learning_rate", "lambda_reg", "par",
             "nes_samples", "nes_sigma"}
    return AttackBudget(**{k: v for k, v in cfg.items() if k in known})


def load_scenario(path_or_name) -> Scenario:
    return scenario_from_config(load_config(path_or_name))
