"""Minimal standalone SVG line charts for loss curves.

Renders mean +- one standard deviation across trials, one color per method.
The loss axis is log-scaled when every plotted value is positive and linear
otherwise (the U-statistic Coulomb loss can go negative). Only the CSVs carry
bit-stability promises; this is presentation output.
"""

from __future__ import annotations

import math

import numpy as np

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_W, _H = 860, 520
_ML, _MR, _MT, _MB = 70, 160, 42, 48


def _fmt(x):
    return f"{x:.2f}".rstrip("0").rstrip(".")


def _tick_label(v):
    if v != 0 and (abs(v) >= 1e4 or abs(v) < 1e-3):
        return f"{v:.1e}"
    return f"{v:.4g}"


def _nice_linear_ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    return list(np.linspace(lo, hi, count))


def _decade_ticks(lo, hi):
    lo_e = int(math.floor(math.log10(lo)))
    hi_e = int(math.ceil(math.log10(hi)))
    step = max(1, (hi_e - lo_e) // 8)
    return [10.0**e for e in range(lo_e, hi_e + 1, step)]


def render_loss_curves(series: dict, path, title: str = "loss curves",
                       xlabel: str = "iteration", ylabel: str = "loss") -> None:
    """Write an SVG chart. `series` maps method name to a list of per-trial
    1D loss arrays (trials may be truncated to their common length)."""
    prepared = {}
    for name, trials in series.items():
        arrays = [np.asarray(t, dtype=np.float64) for t in trials if len(t) > 0]
        if not arrays:
            continue
        length = min(len(a) for a in arrays)
        stack = np.stack([a[:length] for a in arrays])
        mean = stack.mean(axis=0)
        std = stack.std(axis=0)
        prepared[name] = (mean, std)
    if not prepared:
        raise ValueError("no data to plot")

    lows = np.concatenate([m - s for m, s in prepared.values()])
    highs = np.concatenate([m + s for m, s in prepared.values()])
    log_scale = bool(np.all(lows > 0))

    if log_scale:
        y_lo, y_hi = float(np.min(lows)), float(np.max(highs))
        if y_hi / y_lo < 10.0:
            y_lo, y_hi = y_lo / 1.5, y_hi * 1.5
        ticks = _decade_ticks(y_lo, y_hi)

        def ymap(v):
            t = (math.log10(v) - math.log10(y_lo)) / (math.log10(y_hi) - math.log10(y_lo))
            return _H - _MB - t * (_H - _MT - _MB)
    else:
        y_lo, y_hi = float(np.min(lows)), float(np.max(highs))
        pad = 0.05 * (y_hi - y_lo or 1.0)
        y_lo, y_hi = y_lo - pad, y_hi + pad
        ticks = _nice_linear_ticks(y_lo, y_hi)

        def ymap(v):
            t = (v - y_lo) / (y_hi - y_lo)
            return _H - _MB - t * (_H - _MT - _MB)

    x_len = max(len(m) for m, _ in prepared.values())

    def xmap(i):
        frac = i / max(x_len - 1, 1)
        return _ML + frac * (_W - _ML - _MR)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_ML}" y="24" font-family="sans-serif" font-size="15" '
        f'font-weight="bold">{title}</text>',
    ]

    # y grid and labels
    for tv in ticks:
        if not (y_lo <= tv <= y_hi):
            continue
        y = ymap(tv)
        parts.append(f'<line x1="{_ML}" y1="{_fmt(y)}" x2="{_W - _MR}" '
                     f'y2="{_fmt(y)}" stroke="#dddddd" stroke-width="1"/>')
        parts.append(f'<text x="{_ML - 8}" y="{_fmt(y + 4)}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{_tick_label(tv)}</text>')
    # x ticks: 6 round positions
    for frac in np.linspace(0, 1, 6):
        i = frac * (x_len - 1)
        x = xmap(i)
        parts.append(f'<line x1="{_fmt(x)}" y1="{_H - _MB}" x2="{_fmt(x)}" '
                     f'y2="{_H - _MB + 5}" stroke="#333333" stroke-width="1"/>')
        parts.append(f'<text x="{_fmt(x)}" y="{_H - _MB + 20}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{int(round(i))}</text>')

    # axes
    parts.append(f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" '
                 f'stroke="#333333" stroke-width="1.4"/>')
    parts.append(f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" '
                 f'stroke="#333333" stroke-width="1.4"/>')
    parts.append(f'<text x="{(_ML + _W - _MR) / 2:.0f}" y="{_H - 10}" '
                 f'text-anchor="middle" font-family="sans-serif" font-size="12">'
                 f'{xlabel}</text>')
    scale_note = "log" if log_scale else "linear"
    parts.append(f'<text x="16" y="{(_MT + _H - _MB) / 2:.0f}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12" '
                 f'transform="rotate(-90 16 {(_MT + _H - _MB) / 2:.0f})">'
                 f'{ylabel} ({scale_note})</text>')

    clip = (lambda v: min(max(v, y_lo), y_hi))
    for idx, (name, (mean, std)) in enumerate(prepared.items()):
        color = _PALETTE[idx % len(_PALETTE)]
        upper = [clip(v) for v in mean + std]
        lower = [clip(v) for v in mean - std]
        band = " ".join(
            f"{_fmt(xmap(i))},{_fmt(ymap(v))}" for i, v in enumerate(upper)
        ) + " " + " ".join(
            f"{_fmt(xmap(i))},{_fmt(ymap(v))}"
            for i, v in reversed(list(enumerate(lower)))
        )
        parts.append(f'<polygon points="{band}" fill="{color}" fill-opacity="0.15" '
                     f'stroke="none"/>')
        line = " ".join(
            f"{_fmt(xmap(i))},{_fmt(ymap(clip(v)))}" for i, v in enumerate(mean)
        )
        parts.append(f'<polyline points="{line}" fill="none" stroke="{color}" '
                     f'stroke-width="1.8"/>')
        ly = _MT + 16 + 20 * idx
        lx = _W - _MR + 12
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="3"/>')
        parts.append(f'<text x="{lx + 30}" y="{ly + 4}" font-family="sans-serif" '
                     f'font-size="12">{name}</text>')

    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
