"""CSV aggregation of run records and SVG figures of single predictions."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

CSV_FIELDS = ("task", "method", "n_target", "mean_rmse", "std_rmse", "n_seeds")


class EmptyRunSet(ValueError):
    pass


def aggregate(records) -> list[dict]:
    """Mean and population std of test rMSE per (task, method, n_target)."""
    if not records:
        raise EmptyRunSet("no run records to report")
    groups = defaultdict(list)
    for r in records:
        groups[(r.task, r.method, r.n_target)].append(r.test_rmse)
    rows = []
    for (task, method, n), vals in sorted(groups.items()):
        v = np.asarray(vals)
        rows.append({"task": task, "method": method, "n_target": n,
                     "mean_rmse": float(v.mean()), "std_rmse": float(v.std()), "n_seeds": len(v)})
    return rows


def write_csv(path, records):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for row in aggregate(records):
        w.writerow({**row, "mean_rmse": repr(row["mean_rmse"]), "std_rmse": repr(row["std_rmse"])})
    Path(path).write_text(buf.getvalue())


# ---------------------------------------------------------------- SVG

PANEL = 220
PAD = 30


def color(t: float) -> str:
    """Blue-white-red ramp for t in [0, 1]."""
    t = min(max(float(t), 0.0), 1.0)
    if t < 0.5:
        s = t / 0.5
        r, g, b = 59 + s * (255 - 59), 76 + s * (255 - 76), 192 + s * (255 - 192)
    else:
        s = (t - 0.5) / 0.5
        r, g, b = 255 - s * (255 - 180), 255 - s * 255, 255 - s * (255 - 38)
    return f"#{int(round(r)):02x}{int(round(g)):02x}{int(round(b)):02x}"


def _normalise(a: np.ndarray):
    lo, hi = float(np.min(a)), float(np.max(a))
    if hi == lo:
        return np.full(a.shape, 0.5), lo, hi
    return (a - lo) / (hi - lo), lo, hi


def heatmap_cells(a: np.ndarray, x0: float, y0: float, size: float = PANEL) -> list[str]:
    """One rect per grid value; row i is drawn top to bottom."""
    a = np.asarray(a, dtype=np.float64)
    t, _, _ = _normalise(a)
    ny, nx = a.shape
    w, h = size / nx, size / ny
    cells = []
    for i in range(ny):
        for j in range(nx):
            cells.append(f'<rect x="{x0 + j * w:.3f}" y="{y0 + i * h:.3f}" width="{w:.3f}" '
                         f'height="{h:.3f}" fill="{color(t[i, j])}" data-v="{float(a[i, j])!r}"/>')
    return cells


def curve_path(y: np.ndarray, x0: float, y0: float, lo: float, hi: float,
               size: float = PANEL) -> str:
    y = np.asarray(y, dtype=np.float64)
    span = hi - lo if hi > lo else 1.0
    xs = x0 + np.linspace(0, size, len(y))
    ys = y0 + size - (y - lo) / span * size
    return " ".join(f"{'M' if i == 0 else 'L'}{a:.3f},{b:.3f}" for i, (a, b) in enumerate(zip(xs, ys)))


def prediction_panels(k: np.ndarray, gt: np.ndarray, pred: np.ndarray) -> dict:
    """The four arrays shown in a figure, with the error recomputed here."""
    return {"input": np.asarray(k), "ground truth": np.asarray(gt),
            "prediction": np.asarray(pred), "abs error": np.abs(np.asarray(pred) - np.asarray(gt))}


def render_svg(panels: dict, title: str = "") -> str:
    """Heatmaps for 2-d panels, line plots for 1-d panels, side by side."""
    n = len(panels)
    width, height = n * (PANEL + PAD) + PAD, PANEL + 3 * PAD
    body = []
    for idx, (name, a) in enumerate(panels.items()):
        x0, y0 = PAD + idx * (PANEL + PAD), 2 * PAD
        a = np.asarray(a, dtype=np.float64)
        body.append(f'<g class="panel" data-name="{escape(name)}">')
        body.append(f'<text x="{x0}" y="{y0 - 8}" font-size="12">{escape(name)}</text>')
        if a.ndim == 2:
            body += heatmap_cells(a, x0, y0)
        elif a.ndim == 1:
            lo, hi = float(a.min()), float(a.max())
            body.append(f'<rect x="{x0}" y="{y0}" width="{PANEL}" height="{PANEL}" '
                        f'fill="none" stroke="#888"/>')
            body.append(f'<path d="{curve_path(a, x0, y0, lo, hi)}" fill="none" '
                        f'stroke="#1f3b99" stroke-width="1.5"/>')
            body.append(f'<text x="{x0}" y="{y0 + PANEL + 14}" font-size="10">'
                        f'[{lo:.3g}, {hi:.3g}]</text>')
        else:
            raise ValueError(f"cannot draw a {a.ndim}-d panel")
        body.append("</g>")
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">')
    return "\n".join([head, f'<text x="{PAD}" y="{PAD - 10}" font-size="14">{escape(title)}</text>',
                      *body, "</svg>"]) + "\n"


def write_prediction_svg(path, k, gt, pred, title: str = ""):
    Path(path).write_text(render_svg(prediction_panels(k, gt, pred), title))
