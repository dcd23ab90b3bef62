"""Minimal deterministic SVG line charts, no plotting dependency.

Output is a plain string of SVG markup with fixed formatting (two decimal
places everywhere), so the same data always yields the same bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#17becf", "#7f7f7f")

_LOG_FLOOR = 1e-17   # keeps exactly-zero errors plottable on a log axis


@dataclass
class Series:
    """One plotted line, optionally with a shaded band around it."""

    name: str
    xs: list
    ys: list
    band: tuple | None = None   # (low_ys, high_ys), same length as xs


def _nice_ticks(lo, hi, target=5):
    """Round tick positions covering [lo, hi]; always returns >= 2 ticks."""
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        step = mult * mag
        if raw <= step:
            break
    first = math.floor(lo / step) * step
    ticks = []
    value = first
    while value <= hi + step * 0.5:
        if value >= lo - step * 0.5:
            ticks.append(round(value, 10))
        value += step
    return ticks


def _log_ticks(lo, hi):
    """Decade ticks for a log10-scaled axis over raw values lo..hi."""
    lo_exp = math.floor(math.log10(lo))
    hi_exp = math.ceil(math.log10(hi))
    span = hi_exp - lo_exp
    stride = max(1, math.ceil(span / 8))
    return [10.0 ** e for e in range(lo_exp, hi_exp + 1, stride)]


def _fmt_tick(value, log_scale):
    if log_scale:
        return f"1e{int(round(math.log10(value)))}"
    if value == int(value) and abs(value) < 1e12:
        return str(int(value))
    return f"{value:g}"


def line_chart(series, xlabel="", ylabel="", title="", log_y=False,
               width=640, height=440):
    """Render the series to an SVG document string."""
    if not series:
        raise ValueError("need at least one series")
    left, right, top, bottom = 64, 150, 34, 48
    plot_w = width - left - right
    plot_h = height - top - bottom

    all_x = [x for s in series for x in s.xs]
    all_y = [y for s in series for y in s.ys]
    for s in series:
        if s.band is not None:
            all_y.extend(s.band[0])
            all_y.extend(s.band[1])
    if log_y:
        all_y = [max(y, _LOG_FLOOR) for y in all_y]
        y_lo, y_hi = min(all_y), max(all_y)
        ticks_y = _log_ticks(y_lo, y_hi)
        y_lo = min(y_lo, ticks_y[0])
        y_hi = max(y_hi, ticks_y[-1])
        to_y = lambda v: math.log10(max(v, _LOG_FLOOR))
    else:
        y_lo, y_hi = min(all_y), max(all_y)
        ticks_y = _nice_ticks(y_lo, y_hi)
        y_lo = min(y_lo, ticks_y[0])
        y_hi = max(y_hi, ticks_y[-1])
        to_y = lambda v: v
    x_lo, x_hi = min(all_x), max(all_x)
    ticks_x = _nice_ticks(x_lo, x_hi)
    ticks_x = [t for t in ticks_x if x_lo <= t <= x_hi] or [x_lo, x_hi]

    y0, y1 = to_y(y_lo), to_y(y_hi)
    if y1 <= y0:
        y1 = y0 + 1.0
    x_span = (x_hi - x_lo) or 1.0

    def px(x):
        return left + (x - x_lo) / x_span * plot_w

    def py(y):
        return top + (y1 - to_y(y)) / (y1 - y0) * plot_h

    out = []
    out.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
               f'height="{height}" viewBox="0 0 {width} {height}">')
    out.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    if title:
        out.append(f'<text x="{left + plot_w / 2:.2f}" y="20" font-size="14" '
                   f'text-anchor="middle" font-family="sans-serif">'
                   f'{escape(title)}</text>')

    for t in ticks_x:
        x = px(t)
        out.append(f'<line x1="{x:.2f}" y1="{top}" x2="{x:.2f}" '
                   f'y2="{top + plot_h}" stroke="#dddddd" stroke-width="1"/>')
        out.append(f'<text x="{x:.2f}" y="{top + plot_h + 16}" font-size="11" '
                   f'text-anchor="middle" font-family="sans-serif">'
                   f'{_fmt_tick(t, False)}</text>')
    for t in ticks_y:
        y = py(t)
        out.append(f'<line x1="{left}" y1="{y:.2f}" x2="{left + plot_w}" '
                   f'y2="{y:.2f}" stroke="#dddddd" stroke-width="1"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.2f}" font-size="11" '
                   f'text-anchor="end" font-family="sans-serif">'
                   f'{_fmt_tick(t, log_y)}</text>')

    out.append(f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" '
               f'fill="none" stroke="#333333" stroke-width="1"/>')

    for k, s in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        if s.band is not None:
            low, high = s.band
            pts = [f"{px(x):.2f},{py(v):.2f}" for x, v in zip(s.xs, high)]
            pts += [f"{px(x):.2f},{py(v):.2f}"
                    for x, v in zip(reversed(s.xs), reversed(low))]
            out.append(f'<polygon points="{" ".join(pts)}" fill="{color}" '
                       f'fill-opacity="0.18" stroke="none"/>')
        pts = " ".join(f"{px(x):.2f},{py(v):.2f}" for x, v in zip(s.xs, s.ys))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                   f'stroke-width="1.8"/>')

    legend_x = left + plot_w + 12
    for k, s in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        y = top + 10 + 18 * k
        out.append(f'<line x1="{legend_x}" y1="{y}" x2="{legend_x + 22}" '
                   f'y2="{y}" stroke="{color}" stroke-width="2.5"/>')
        out.append(f'<text x="{legend_x + 28}" y="{y + 4}" font-size="11" '
                   f'font-family="sans-serif">{escape(s.name)}</text>')

    if xlabel:
        out.append(f'<text x="{left + plot_w / 2:.2f}" y="{height - 10}" '
                   f'font-size="12" text-anchor="middle" '
                   f'font-family="sans-serif">{escape(xlabel)}</text>')
    if ylabel:
        cx, cy = 16, top + plot_h / 2
        out.append(f'<text x="{cx}" y="{cy:.2f}" font-size="12" '
                   f'text-anchor="middle" font-family="sans-serif" '
                   f'transform="rotate(-90 {cx} {cy:.2f})">'
                   f'{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def fig1_chart(curves):
    """Recovery-error-vs-iteration chart from {series name: mean errors}."""
    series = []
    for name, values in curves.items():
        xs = list(range(1, len(values) + 1))
        series.append(Series(name=name, xs=xs, ys=[float(v) for v in values]))
    return line_chart(series, xlabel="iteration",
                      ylabel="mean recovery error", log_y=True,
                      title="Recovery error vs iteration")


def fig2_chart(summary_rows, slow):
    """Time-steps-vs-cores chart from summary rows (means with +-1 std)."""
    base = [r for r in summary_rows if r["algorithm"] == "stoiht"]
    async_rows = sorted((r for r in summary_rows if r["algorithm"] == "async-sim"),
                        key=lambda r: r["cores"])
    if not base or not async_rows:
        raise ValueError("summary lacks baseline or async rows")
    xs = [r["cores"] for r in async_rows]
    mean_b = base[0]["mean_steps"]
    std_b = base[0]["std_steps"]
    series = [
        Series(name="standard (mean ± std)", xs=xs, ys=[mean_b] * len(xs),
               band=([mean_b - std_b] * len(xs), [mean_b + std_b] * len(xs))),
        Series(name="async tally (mean ± std)", xs=xs,
               ys=[r["mean_steps"] for r in async_rows],
               band=([r["mean_steps"] - r["std_steps"] for r in async_rows],
                     [r["mean_steps"] + r["std_steps"] for r in async_rows])),
    ]
    mode = "half slow cores" if slow else "all fast cores"
    return line_chart(series, xlabel="cores", ylabel="time steps to exit",
                      title=f"Time steps vs cores ({mode})")
