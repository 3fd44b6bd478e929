"""Standalone SVG emission: deviation curves and transfer heat maps.

Plots derive only from the persisted report and its trajectory sidecars, so
re-running emission on the same report reproduces identical files.
"""

from pathlib import Path

import numpy as np

from .report import read_trajectory_csv

__all__ = ["emit_plots", "deviation_curves_svg", "heatmap_svg"]

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _fmt(value: float) -> str:
    return f"{value:.3f}".rstrip("0").rstrip(".")


def _polyline(xs, ys, color: str, width: float = 1.5) -> str:
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
    return (f'<polyline fill="none" stroke="{color}" '
            f'stroke-width="{width}" points="{pts}"/>')


def deviation_curves_svg(curves: list, threshold: float = 0.735,
                         horizon: float = 2.5) -> str:
    """Curves = [(label, times, deviations)]; returns an SVG document."""
    width, height = 640, 400
    ml, mr, mt, mb = 60, 20, 30, 45
    pw, ph = width - ml - mr, height - mt - mb
    t_max = max([horizon] + [float(t[-1]) for _, t, _ in curves if len(t)])
    d_max = max([threshold * 1.4] +
                [float(np.max(np.abs(d))) * 1.1 for _, _, d in curves if len(d)])

    def sx(t):
        return ml + pw * (t / t_max)

    def sy(d):
        return mt + ph * (1.0 - (d + d_max) / (2.0 * d_max))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{ml}" y1="{_fmt(sy(0))}" x2="{ml + pw}" y2="{_fmt(sy(0))}" '
        'stroke="#999" stroke-width="1"/>',
    ]
    for sign in (1, -1):
        y = sy(sign * threshold)
        parts.append(f'<line x1="{ml}" y1="{_fmt(y)}" x2="{ml + pw}" '
                     f'y2="{_fmt(y)}" stroke="#d62728" stroke-width="0.8" '
                     'stroke-dasharray="6 4"/>')
    parts.append(f'<line x1="{_fmt(sx(horizon))}" y1="{mt}" '
                 f'x2="{_fmt(sx(horizon))}" y2="{mt + ph}" stroke="#555" '
                 'stroke-width="0.8" stroke-dasharray="3 3"/>')
    for i, (label, times, devs) in enumerate(curves):
        color = _COLORS[i % len(_COLORS)]
        parts.append(_polyline([sx(t) for t in times], [sy(d) for d in devs],
                               color))
        parts.append(f'<text x="{ml + 8}" y="{mt + 16 + 14 * i}" '
                     f'font-size="11" fill="{color}">{label}</text>')
    parts.append(f'<text x="{ml + pw / 2}" y="{height - 10}" font-size="12" '
                 'text-anchor="middle">time [s]</text>')
    parts.append(f'<text x="14" y="{mt + ph / 2}" font-size="12" '
                 f'text-anchor="middle" transform="rotate(-90 14 {mt + ph / 2})">'
                 'lateral deviation [m]</text>')
    for frac in (0.0, 0.5, 1.0):
        t = t_max * frac
        parts.append(f'<text x="{_fmt(sx(t))}" y="{mt + ph + 16}" '
                     f'font-size="10" text-anchor="middle">{_fmt(t)}</text>')
    for d in (-d_max, 0.0, d_max):
        parts.append(f'<text x="{ml - 6}" y="{_fmt(sy(d) + 3)}" font-size="10" '
                     f'text-anchor="end">{_fmt(d)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def heatmap_svg(sources: list, targets: list, matrix: dict,
                title: str = "untargeted transfer success rate") -> str:
    cell = 80
    ml, mt = 120, 70
    width = ml + cell * len(targets) + 20
    height = mt + cell * len(sources) + 20
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{ml}" y="20" font-size="13">{title}</text>',
    ]
    for j, tgt in enumerate(targets):
        parts.append(f'<text x="{ml + cell * j + cell / 2}" y="{mt - 10}" '
                     f'font-size="11" text-anchor="middle">{tgt}</text>')
    for i, src in enumerate(sources):
        parts.append(f'<text x="{ml - 8}" y="{mt + cell * i + cell / 2 + 4}" '
                     f'font-size="11" text-anchor="end">{src}</text>')
        for j, tgt in enumerate(targets):
            rate = matrix.get(src, {}).get(tgt)
            if rate is None:
                fill, label = "#eeeeee", "-"
            else:
                # White (0) to deep red (1).
                shade = int(255 - 180 * rate)
                fill = f"rgb(255,{shade},{shade})"
                label = f"{100 * rate:.0f}%"
            x, y = ml + cell * j, mt + cell * i
            parts.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                         f'fill="{fill}" stroke="#666"/>')
            parts.append(f'<text x="{x + cell / 2}" y="{y + cell / 2 + 4}" '
                         f'font-size="12" text-anchor="middle">{label}</text>')
    parts.append(f'<text x="{ml - 90}" y="{mt - 10}" font-size="11">source</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_plots(report: dict, output_dir) -> list[Path]:
    """Write SVG files for a persisted report; returns the created paths."""
    output_dir = Path(output_dir)
    created: list[Path] = []
    e2e = report.get("end_to_end", [])
    by_scenario: dict[str, list] = {}
    for row in e2e:
        if row.get("trajectory_attacked"):
            by_scenario.setdefault(row["scenario"], []).append(row)
    for scenario, rows in sorted(by_scenario.items()):
        curves = []
        for row in rows:
            att = read_trajectory_csv(output_dir / row["trajectory_attacked"])
            ben = read_trajectory_csv(output_dir / row["trajectory_benign"])
            label = (f"{row['detector']} {row['attack']} {row['direction']} "
                     f"s{row['seed']}")
            curves.append((label, att["t"],
                           att["lateral_offset"] - ben["lateral_offset"]))
        path = output_dir / f"deviation_{scenario}.svg"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(deviation_curves_svg(curves), encoding="utf-8")
        created.append(path)
    agg = report.get("aggregates", {}).get("transfer")
    if agg:
        path = output_dir / "transfer_heatmap.svg"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(heatmap_svg(agg["sources"], agg["targets"],
                                    agg["untargeted_matrix"]), encoding="utf-8")
        created.append(path)
    return created
