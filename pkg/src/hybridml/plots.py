"""Self-contained SVG charts for the result tables; values are embedded as text labels."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path
from xml.sax.saxutils import escape

W, H = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 60
PALETTE = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860")


class PlotError(ValueError):
    pass


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def _frame(title: str, ylabel: str, ymax: float, ymin: float = 0.0) -> list[str]:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{H - BOTTOM}" x2="{W - RIGHT}" y2="{H - BOTTOM}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{H - BOTTOM}" stroke="black"/>',
        f'<text x="16" y="{(TOP + H - BOTTOM) / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(TOP + H - BOTTOM) / 2})">{escape(ylabel)}</text>',
    ]
    for i in range(5):
        v = ymin + (ymax - ymin) * i / 4
        y = _y(v, ymin, ymax)
        parts.append(f'<text x="{LEFT - 6}" y="{y + 4:.1f}" text-anchor="end">{_fmt(v)}</text>')
        parts.append(f'<line x1="{LEFT - 3}" y1="{y:.1f}" x2="{LEFT}" y2="{y:.1f}" stroke="black"/>')
    return parts


def _y(v, ymin, ymax) -> float:
    span = ymax - ymin or 1.0
    return (H - BOTTOM) - (v - ymin) / span * (H - BOTTOM - TOP)


def bar_chart(title, ylabel, labels, values, errors=None, series=None) -> str:
    """Bars grouped by label; ``values`` is a list of per-series lists when ``series`` is given."""
    if not labels:
        raise PlotError("cannot plot an empty table")
    groups = [values] if series is None else values
    errs = [errors] if (errors is not None and series is None) else errors
    top = max(v + (e[i] if e else 0.0) for g, e in zip(groups, errs or [None] * len(groups))
              for i, v in enumerate(g))
    bottom = min(0.0, min(min(g) for g in groups))
    ymax = top * 1.15 if top > 0 else 1.0
    parts = _frame(title, ylabel, ymax, bottom)
    slot = (W - LEFT - RIGHT) / len(labels)
    bw = slot * 0.7 / len(groups)
    for gi, g in enumerate(groups):
        for i, v in enumerate(g):
            x = LEFT + i * slot + slot * 0.15 + gi * bw
            y0, y1 = _y(max(v, 0), bottom, ymax), _y(min(v, 0), bottom, ymax)
            parts.append(f'<rect x="{x:.1f}" y="{y0:.1f}" width="{bw:.1f}" '
                         f'height="{y1 - y0:.1f}" fill="{PALETTE[gi % len(PALETTE)]}"/>')
            if errs and errs[gi]:
                e = errs[gi][i]
                cx = x + bw / 2
                ya, yb = _y(v - e, bottom, ymax), _y(v + e, bottom, ymax)
                parts.append(f'<line x1="{cx:.1f}" y1="{ya:.1f}" x2="{cx:.1f}" y2="{yb:.1f}" '
                             f'stroke="#b00"/>')
                for yy in (ya, yb):
                    parts.append(f'<line x1="{cx - 4:.1f}" y1="{yy:.1f}" x2="{cx + 4:.1f}" '
                                 f'y2="{yy:.1f}" stroke="#b00"/>')
            parts.append(f'<text x="{x + bw / 2:.1f}" y="{y0 - 4:.1f}" text-anchor="middle" '
                         f'font-size="9">{_fmt(v)}</text>')
    for i, lab in enumerate(labels):
        parts.append(f'<text x="{LEFT + (i + 0.5) * slot:.1f}" y="{H - BOTTOM + 16}" '
                     f'text-anchor="middle">{escape(lab)}</text>')
    if series:
        for gi, s in enumerate(series):
            parts.append(f'<rect x="{LEFT + 10 + gi * 130}" y="{H - 24}" width="10" height="10" '
                         f'fill="{PALETTE[gi % len(PALETTE)]}"/>')
            parts.append(f'<text x="{LEFT + 24 + gi * 130}" y="{H - 15}">{escape(s)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def line_chart(title, ylabel, lines: dict, whiskers: dict | None = None) -> str:
    """``lines`` maps a label to ``[(x, y), ...]``; ``whiskers`` maps a label to per-point half-widths."""
    pts = [p for seq in lines.values() for p in seq]
    if not pts:
        raise PlotError("cannot plot an empty table")
    whiskers = whiskers or {}
    ymax = max(y + (whiskers.get(k, [0] * len(s))[i]) for k, s in lines.items()
               for i, (_, y) in enumerate(s))
    ymax = ymax * 1.1 if ymax > 0 else 1.0
    xmin = min(x for x, _ in pts)
    xmax = max(x for x, _ in pts)
    xs = lambda x: LEFT + (x - xmin) / ((xmax - xmin) or 1) * (W - LEFT - RIGHT)  # noqa: E731
    parts = _frame(title, ylabel, ymax)
    for li, (label, seq) in enumerate(lines.items()):
        color = PALETTE[li % len(PALETTE)]
        path = " ".join(f"{xs(x):.1f},{_y(y, 0, ymax):.1f}" for x, y in seq)
        parts.append(f'<polyline points="{path}" fill="none" stroke="{color}"/>')
        for i, (x, y) in enumerate(seq):
            parts.append(f'<circle cx="{xs(x):.1f}" cy="{_y(y, 0, ymax):.1f}" r="2" fill="{color}">'
                         f'<title>{escape(label)} {_fmt(x)} {_fmt(y)}</title></circle>')
            if label in whiskers:
                e = whiskers[label][i]
                parts.append(f'<line x1="{xs(x):.1f}" y1="{_y(max(y - e, 0), 0, ymax):.1f}" '
                             f'x2="{xs(x):.1f}" y2="{_y(y + e, 0, ymax):.1f}" stroke="{color}"/>')
        parts.append(f'<text x="{W - RIGHT - 4}" y="{TOP + 12 + 14 * li}" text-anchor="end" '
                     f'fill="{color}">{escape(label)}</text>')
    for v in (xmin, xmax):
        parts.append(f'<text x="{xs(v):.1f}" y="{H - BOTTOM + 16}" text-anchor="middle">{_fmt(v)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _rows(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plot_fig1(rows) -> str:
    return bar_chart("Generalization error", "test error", [r["model"] for r in rows],
                     [float(r["mean_error"]) for r in rows],
                     errors=[float(r["std_error"]) for r in rows])


def plot_fig2(rows) -> str:
    return bar_chart("Meta-loss", "test MSE", [r["model"] for r in rows],
                     [float(r["mse"]) for r in rows])


def plot_fig3(rows) -> str:
    return bar_chart("Mutual information", "nats", [r["model"] for r in rows],
                     [[float(r["original_mi"]) for r in rows],
                      [float(r["extracted_mi"]) for r in rows]],
                     series=["original", "extracted"])


def plot_fig4(rows) -> str:
    """One line per seed plus the across-seed mean with one-std whiskers."""
    per_seed = defaultdict(list)
    for r in rows:
        if r["max_ei"] != "":
            per_seed[r["seed"]].append((int(r["iteration"]), float(r["max_ei"])))
    if not per_seed:
        raise PlotError("cannot plot an empty table")
    lines = {f"seed {s}": seq for s, seq in sorted(per_seed.items(), key=lambda kv: int(kv[0]))}
    by_iter = defaultdict(list)
    for seq in per_seed.values():
        for it, v in seq:
            by_iter[it].append(v)
    its = sorted(by_iter)
    mean = [sum(by_iter[i]) / len(by_iter[i]) for i in its]
    sd = []
    for i, m in zip(its, mean):
        vals = by_iter[i]
        sd.append((sum((v - m) ** 2 for v in vals) / (len(vals) - 1)) ** 0.5 if len(vals) > 1 else 0.0)
    lines["mean"] = list(zip(its, mean))
    return line_chart("Expected improvement per iteration", "max EI", lines, {"mean": sd})


PLOTS = {
    "fig1": ("fig1_generalization_error.csv", plot_fig1),
    "fig2": ("fig2_meta_loss.csv", plot_fig2),
    "fig3": ("fig3_information_gain.csv", plot_fig3),
    "fig4": ("fig4_ei_trace.csv", plot_fig4),
}


def plot(rows, kind: str) -> str:
    if kind not in PLOTS:
        raise PlotError(f"unknown plot kind {kind!r}; valid kinds: {', '.join(PLOTS)}")
    if not rows:
        raise PlotError("cannot plot an empty table")
    return PLOTS[kind][1](rows)


def render_all(root) -> dict:
    """SVG text for every figure table present under ``root``, keyed by relative path."""
    root = Path(root)
    out = {}
    for kind, (name, _) in PLOTS.items():
        p = root / name
        if p.is_file():
            out[f"plots/{kind}.svg"] = plot(_rows(p), kind)
    return out
