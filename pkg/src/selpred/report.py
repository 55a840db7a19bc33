"""Analysis artifacts: metric tables, RC/calibration/scatter plots, relative bars.

Plots are hand-rolled SVG so identical inputs re-render byte-identically, and
every plotted number is embedded as a CSV block in an SVG comment. No plotting
library involved.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .metrics import MetricReport, RcCurve

METRIC_COLUMNS = ("auroc", "auprc", "e_aurc", "tce")
HIGHER_IS_BETTER = {"auroc": True, "auprc": True, "e_aurc": False, "tce": False}

WIDTH, HEIGHT = 640, 480
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 64, 16, 20, 48
PALETTE = ("#1f6fb4", "#d95f02", "#1b9e77", "#7570b3", "#e7298a", "#66a61e", "#a6761d")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


class _Axes:
    """Linear data-to-pixel mapping with fixed tick layout."""

    def __init__(self, x_range, y_range, x_label, y_label):
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        self.x_label = x_label
        self.y_label = y_label

    def px(self, x: float) -> float:
        span = self.x1 - self.x0 or 1.0
        return MARGIN_LEFT + (x - self.x0) / span * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)

    def py(self, y: float) -> float:
        span = self.y1 - self.y0 or 1.0
        return HEIGHT - MARGIN_BOTTOM - (y - self.y0) / span * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)

    def frame(self) -> list[str]:
        parts = [
            f'<rect x="{_fmt(MARGIN_LEFT)}" y="{_fmt(MARGIN_TOP)}" '
            f'width="{_fmt(WIDTH - MARGIN_LEFT - MARGIN_RIGHT)}" '
            f'height="{_fmt(HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)}" '
            'fill="none" stroke="#333333" stroke-width="1"/>'
        ]
        for i in range(5):
            tx = self.x0 + (self.x1 - self.x0) * i / 4
            ty = self.y0 + (self.y1 - self.y0) * i / 4
            parts.append(
                f'<text x="{_fmt(self.px(tx))}" y="{_fmt(HEIGHT - MARGIN_BOTTOM + 16)}" '
                f'font-size="11" text-anchor="middle">{tx:.3g}</text>'
            )
            parts.append(
                f'<text x="{_fmt(MARGIN_LEFT - 6)}" y="{_fmt(self.py(ty) + 4)}" '
                f'font-size="11" text-anchor="end">{ty:.3g}</text>'
            )
        parts.append(
            f'<text x="{_fmt((MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2)}" '
            f'y="{_fmt(HEIGHT - 10)}" font-size="13" text-anchor="middle">{self.x_label}</text>'
        )
        parts.append(
            f'<text x="14" y="{_fmt((MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2)}" font-size="13" '
            f'text-anchor="middle" transform="rotate(-90 14 '
            f'{_fmt((MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2)})">{self.y_label}</text>'
        )
        return parts


def _legend(names: list[str]) -> list[str]:
    parts = []
    for i, name in enumerate(names):
        y = MARGIN_TOP + 14 + 16 * i
        color = PALETTE[i % len(PALETTE)]
        parts.append(
            f'<rect x="{_fmt(MARGIN_LEFT + 8)}" y="{_fmt(y - 9)}" width="10" height="10" fill="{color}"/>'
        )
        parts.append(
            f'<text x="{_fmt(MARGIN_LEFT + 22)}" y="{_fmt(y)}" font-size="11">{name}</text>'
        )
    return parts


def _svg(body: list[str], data_csv: str) -> str:
    head = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        "<!-- data\n" + data_csv + "-->",
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
    ]
    return "\n".join(head + body + ["</svg>"]) + "\n"


def _csv_block(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def plot_rc(
    curves: list[tuple[str, RcCurve]],
    path: str | Path,
    high_trust_alpha: float = 0.15,
) -> Path:
    """Risk--coverage step curves with the high-trust band shaded below alpha."""
    if not curves:
        raise ValueError("need at least one curve")
    axes = _Axes((0.0, 1.0), (0.0, 1.0), "coverage", "selective risk")
    body = []
    if high_trust_alpha > 0:
        band_h = axes.py(0.0) - axes.py(high_trust_alpha)
        body.append(
            f'<rect x="{_fmt(axes.px(0.0))}" y="{_fmt(axes.py(high_trust_alpha))}" '
            f'width="{_fmt(axes.px(1.0) - axes.px(0.0))}" height="{_fmt(band_h)}" '
            'fill="#c6e2c6" fill-opacity="0.6"/>'
        )
    rows = []
    for i, (name, curve) in enumerate(curves):
        color = PALETTE[i % len(PALETTE)]
        pts = []
        prev_cov = 0.0
        for coverage, risk in curve.points:
            pts.append(f"{_fmt(axes.px(prev_cov))},{_fmt(axes.py(risk))}")
            pts.append(f"{_fmt(axes.px(coverage))},{_fmt(axes.py(risk))}")
            prev_cov = coverage
            rows.append([name, repr(float(coverage)), repr(float(risk))])
        body.append(
            f'<polyline points="{" ".join(pts)}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
    body.extend(axes.frame())
    body.extend(_legend([name for name, _ in curves]))
    data = _csv_block(["method", "coverage", "selective_risk"], rows)
    out = Path(path)
    out.write_text(_svg(body, data), encoding="utf-8")
    return out


def plot_calibration(alpha_grid, realized_risks: dict[str, list], path: str | Path) -> Path:
    """Realized test risk vs target alpha; a perfect system lies on the diagonal."""
    grid = [float(a) for a in alpha_grid]
    if not grid or not realized_risks:
        raise ValueError("need a grid and at least one method")
    lo, hi = min(grid), max(grid)
    values = [v for series in realized_risks.values() for v in series]
    y_hi = max(max(values, default=hi), hi)
    axes = _Axes((lo, hi), (0.0, y_hi), "target alpha", "realized risk")
    body = [
        f'<line x1="{_fmt(axes.px(lo))}" y1="{_fmt(axes.py(lo))}" '
        f'x2="{_fmt(axes.px(hi))}" y2="{_fmt(axes.py(hi))}" '
        'stroke="#999999" stroke-width="1" stroke-dasharray="4 3"/>'
    ]
    rows = []
    for i, (name, series) in enumerate(realized_risks.items()):
        if len(series) != len(grid):
            raise ValueError(f"series {name!r} length differs from the alpha grid")
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(
            f"{_fmt(axes.px(a))},{_fmt(axes.py(float(v)))}" for a, v in zip(grid, series)
        )
        body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        rows.extend([name, repr(a), repr(float(v))] for a, v in zip(grid, series))
    body.extend(axes.frame())
    body.extend(_legend(list(realized_risks)))
    data = _csv_block(["method", "alpha", "realized_risk"], rows)
    out = Path(path)
    out.write_text(_svg(body, data), encoding="utf-8")
    return out


def plot_scatter(se_values, pc_logits, labels, path: str | Path) -> Path:
    """Semantic entropy vs PC probe logit, colored by correctness."""
    se = [float(v) for v in se_values]
    logits = [float(v) for v in pc_logits]
    flags = [bool(v) for v in labels]
    if not (len(se) == len(logits) == len(flags)) or not se:
        raise ValueError("need equal-length non-empty inputs")
    x_hi = max(max(se), 1e-9)
    y_lo, y_hi = min(logits), max(logits)
    if y_lo == y_hi:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    axes = _Axes((0.0, x_hi), (y_lo, y_hi), "semantic entropy", "pc probe logit")
    body = []
    rows = []
    for x, y, correct in zip(se, logits, flags):
        color = "#1b9e77" if correct else "#d95f02"
        body.append(
            f'<circle cx="{_fmt(axes.px(x))}" cy="{_fmt(axes.py(y))}" r="2.5" '
            f'fill="{color}" fill-opacity="0.65"/>'
        )
        rows.append([repr(x), repr(y), int(correct)])
    body.extend(axes.frame())
    body.extend(_legend(["correct", "hallucinated"]))
    data = _csv_block(["semantic_entropy", "pc_logit", "correct"], rows)
    out = Path(path)
    out.write_text(_svg(body, data), encoding="utf-8")
    return out


def relative_improvements(
    baseline: str, challengers: list[str], reports: list[MetricReport]
) -> dict[str, dict[str, float]]:
    """Signed improvement per metric and challenger; positive always means better."""
    by_method = {r.method: r for r in reports}
    if baseline not in by_method:
        raise ValueError(f"baseline {baseline!r} not among reports")
    missing = [m for m in challengers if m not in by_method]
    if missing:
        raise ValueError(f"challengers not among reports: {missing}")
    out: dict[str, dict[str, float]] = {}
    for metric in METRIC_COLUMNS:
        base_mean = getattr(by_method[baseline], metric)[0]
        row = {}
        for method in challengers:
            mean = getattr(by_method[method], metric)[0]
            row[method] = mean - base_mean if HIGHER_IS_BETTER[metric] else base_mean - mean
        out[metric] = row
    return out


def emit_relative_bars(
    baseline: str,
    challengers: list[str],
    reports: list[MetricReport],
    path: str | Path,
) -> Path:
    """Grouped bars of signed improvement over the baseline, one group per metric."""
    improvements = relative_improvements(baseline, challengers, reports)
    values = [improvements[m][c] for m in METRIC_COLUMNS for c in challengers]
    v_lo = min(min(values), 0.0)
    v_hi = max(max(values), 0.0)
    if v_lo == v_hi:
        v_lo, v_hi = -1e-3, 1e-3
    axes = _Axes((0.0, 1.0), (v_lo, v_hi), "metric", f"improvement over {baseline}")
    group_w = 1.0 / len(METRIC_COLUMNS)
    bar_w = group_w * 0.8 / len(challengers)
    body = [
        f'<line x1="{_fmt(axes.px(0.0))}" y1="{_fmt(axes.py(0.0))}" '
        f'x2="{_fmt(axes.px(1.0))}" y2="{_fmt(axes.py(0.0))}" stroke="#333333" stroke-width="1"/>'
    ]
    rows = []
    for gi, metric in enumerate(METRIC_COLUMNS):
        for ci, method in enumerate(challengers):
            value = improvements[metric][method]
            x = gi * group_w + group_w * 0.1 + ci * bar_w
            top = axes.py(max(value, 0.0))
            height = abs(axes.py(value) - axes.py(0.0))
            body.append(
                f'<rect x="{_fmt(axes.px(x))}" y="{_fmt(top)}" '
                f'width="{_fmt(axes.px(bar_w) - axes.px(0.0))}" height="{_fmt(height)}" '
                f'fill="{PALETTE[ci % len(PALETTE)]}"/>'
            )
            rows.append([metric, method, repr(float(value))])
        body.append(
            f'<text x="{_fmt(axes.px(gi * group_w + group_w / 2))}" '
            f'y="{_fmt(HEIGHT - MARGIN_BOTTOM + 16)}" font-size="11" '
            f'text-anchor="middle">{metric}</text>'
        )
    body.extend(axes.frame()[:1])  # frame rect only; x ticks replaced by metric names
    body.append(
        f'<text x="14" y="{_fmt((MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2)}" font-size="13" '
        f'text-anchor="middle" transform="rotate(-90 14 '
        f'{_fmt((MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2)})">improvement over {baseline}</text>'
    )
    for i in range(5):
        ty = v_lo + (v_hi - v_lo) * i / 4
        body.append(
            f'<text x="{_fmt(MARGIN_LEFT - 6)}" y="{_fmt(axes.py(ty) + 4)}" '
            f'font-size="11" text-anchor="end">{ty:.3g}</text>'
        )
    body.extend(_legend(challengers))
    data = _csv_block(["metric", "method", "improvement"], rows)
    out = Path(path)
    out.write_text(_svg(body, data), encoding="utf-8")
    return out


def _best_flags(group: list[MetricReport]) -> dict[tuple[str, str], bool]:
    flags = {}
    for metric in METRIC_COLUMNS:
        means = [getattr(r, metric)[0] for r in group]
        best = max(means) if HIGHER_IS_BETTER[metric] else min(means)
        for r in group:
            flags[(r.method, metric)] = getattr(r, metric)[0] == best
    return flags


def emit_tables(
    reports: list[MetricReport],
    out_dir: str | Path,
    formats: tuple[str, ...] = ("csv", "markdown"),
    prefix: str = "",
) -> list[Path]:
    """Mean/std table, one row per (model, dataset, method), best per column flagged."""
    if not reports:
        raise ValueError("no reports to tabulate")
    keys = [(r.model, r.dataset, r.method) for r in reports]
    if len(set(keys)) != len(keys):
        raise ValueError("duplicate (model, dataset, method) rows; refusing mixed grids")
    groups: dict[tuple[str, str], list[MetricReport]] = {}
    for r in reports:
        groups.setdefault((r.model, r.dataset), []).append(r)
    flags = {}
    for (model, dataset), group in groups.items():
        for (method, metric), best in _best_flags(group).items():
            flags[(model, dataset, method, metric)] = best

    out_dir = Path(out_dir)
    written = []
    if "csv" in formats:
        path = out_dir / f"{prefix}tables.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            header = ["model", "dataset", "method", "base_accuracy"]
            for metric in METRIC_COLUMNS:
                header += [f"{metric}_mean", f"{metric}_std", f"{metric}_best"]
            writer.writerow(header)
            for r in reports:
                row = [r.model, r.dataset, r.method, repr(float(r.base_accuracy))]
                for metric in METRIC_COLUMNS:
                    mean, std = getattr(r, metric)
                    row += [
                        repr(float(mean)),
                        repr(float(std)),
                        int(flags[(r.model, r.dataset, r.method, metric)]),
                    ]
                writer.writerow(row)
        written.append(path)
    if "markdown" in formats:
        path = out_dir / f"{prefix}tables.md"
        lines = [
            "| model | dataset | method | " + " | ".join(METRIC_COLUMNS) + " |",
            "|" + "---|" * (3 + len(METRIC_COLUMNS)),
        ]
        for r in reports:
            cells = [r.model, r.dataset, r.method]
            for metric in METRIC_COLUMNS:
                mean, std = getattr(r, metric)
                text = f"{mean:.3f} ({std:.3f})"
                if flags[(r.model, r.dataset, r.method, metric)]:
                    text = f"**{text}**"
                cells.append(text)
            lines.append("| " + " | ".join(cells) + " |")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)
    unknown = set(formats) - {"csv", "markdown"}
    if unknown:
        raise ValueError(f"unknown table formats: {sorted(unknown)}")
    return written
