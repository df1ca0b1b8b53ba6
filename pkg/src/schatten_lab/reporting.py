"""Deterministic output files: CSV, JSON, and SVG spectrum plots.

All writers are atomic (temp file plus rename) and contain no timestamps or
other run-dependent bytes, so the same data always produces the same file.
Every file is paired with the tool version and a hash of the resolved config
through its payload or a JSON sidecar.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os

import numpy as np

from . import __version__ as TOOL_VERSION
from .dyadic import GridError
from .spectra import SingularSpectrum, spectrum_csv_rows


def config_hash(config) -> str:
    """sha256 of the canonical compact JSON encoding of the config."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def stamp(config, **extra) -> dict:
    """Version plus config echo and hash, the common part of every payload."""
    out = {
        "version": TOOL_VERSION,
        "config": config,
        "config_sha256": config_hash(config),
    }
    out.update(extra)
    return out


def _atomic_write(path: str, data: str) -> str:
    tmp = f"{path}.tmp-{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(data)
    os.replace(tmp, path)
    return path


def render_csv(rows) -> str:
    """RFC-4180 text: minimal quoting, CRLF row endings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerows(rows)
    return buf.getvalue()


def write_csv(path: str, rows, sidecar: dict | None = None) -> str:
    _atomic_write(path, render_csv(rows))
    if sidecar is not None:
        write_json(f"{path}.meta.json", sidecar)
    return path


def render_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def write_json(path: str, payload) -> str:
    return _atomic_write(path, render_json(payload))


_PLOT = {
    "width": 640,
    "height": 480,
    "left": 70,
    "right": 20,
    "top": 40,
    "bottom": 50,
}


def _ticks(lo: float, hi: float) -> list[int]:
    return list(range(math.ceil(lo - 1e-9), math.floor(hi + 1e-9) + 1))


def render_svg_loglog(
    values: np.ndarray, reference_exponent: float, title: str = "singular values"
) -> str:
    """Log-log scatter of k vs s_k with a k^(-exponent) line through s_1.

    Zero values cannot appear on a log plot and are dropped; at least one
    positive value is required.
    """
    v = np.asarray(values, dtype=float)
    pos = v[v > 0]
    if pos.size == 0:
        raise GridError("need at least one positive singular value to plot")
    k = np.arange(1, pos.size + 1)
    xs = np.log10(k)
    ys = np.log10(pos)
    ref_end = math.log10(pos[0]) - reference_exponent * xs[-1]
    x_lo, x_hi = 0.0, max(xs[-1], 0.3)
    y_lo = min(ys.min(), ref_end)
    y_hi = max(ys.max(), math.log10(pos[0]))
    if y_hi - y_lo < 0.5:
        pad = 0.5 * (0.5 - (y_hi - y_lo))
        y_lo, y_hi = y_lo - pad, y_hi + pad
    p = _PLOT
    plot_w = p["width"] - p["left"] - p["right"]
    plot_h = p["height"] - p["top"] - p["bottom"]

    def px(x):
        return p["left"] + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y):
        return p["top"] + (y_hi - y) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{p["width"]}" '
        f'height="{p["height"]}" viewBox="0 0 {p["width"]} {p["height"]}">',
        f"<desc>schatten-lab {TOOL_VERSION} reference exponent "
        f"{reference_exponent:g}</desc>",
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{p["width"] / 2:.1f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15" fill="#222">{title}</text>',
    ]
    axis = (
        f'<path d="M {p["left"]} {p["top"]} V {p["top"] + plot_h} '
        f'H {p["left"] + plot_w}" fill="none" stroke="#333" stroke-width="1"/>'
    )
    parts.append(axis)
    for d in _ticks(x_lo, x_hi):
        x = px(d)
        parts.append(
            f'<line x1="{x:.2f}" y1="{p["top"] + plot_h}" x2="{x:.2f}" '
            f'y2="{p["top"] + plot_h + 5}" stroke="#333"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{p["top"] + plot_h + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11" fill="#333">1e{d}</text>'
        )
    for d in _ticks(y_lo, y_hi):
        y = py(d)
        parts.append(
            f'<line x1="{p["left"] - 5}" y1="{y:.2f}" x2="{p["left"]}" '
            f'y2="{y:.2f}" stroke="#333"/>'
        )
        parts.append(
            f'<text x="{p["left"] - 9}" y="{y + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11" fill="#333">1e{d}</text>'
        )
    parts.append(
        f'<text x="{p["left"] + plot_w / 2:.1f}" y="{p["height"] - 8}" '
        f'text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'fill="#333">k</text>'
    )
    parts.append(
        f'<text x="16" y="{p["top"] + plot_h / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" fill="#333" '
        f'transform="rotate(-90 16 {p["top"] + plot_h / 2:.1f})">s_k</text>'
    )
    parts.append(
        f'<line x1="{px(0.0):.2f}" y1="{py(math.log10(pos[0])):.2f}" '
        f'x2="{px(xs[-1]):.2f}" y2="{py(ref_end):.2f}" stroke="#c0392b" '
        f'stroke-width="1.5" stroke-dasharray="6 4"/>'
    )
    for x, y in zip(xs, ys):
        parts.append(
            f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="#1f6fb4" '
            f'fill-opacity="0.8"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_plot(
    spectrum: SingularSpectrum,
    reference_exponent: float,
    path: str,
    title: str = "singular values",
    sidecar: dict | None = None,
) -> tuple[str, str]:
    """Write the SVG plot and its CSV twin; returns both paths."""
    if len(spectrum) == 0:
        raise GridError("cannot plot an empty spectrum")
    svg = render_svg_loglog(spectrum.values, reference_exponent, title)
    _atomic_write(path, svg)
    stem, _ = os.path.splitext(path)
    csv_path = write_csv(f"{stem}.csv", spectrum_csv_rows(spectrum), sidecar)
    if sidecar is not None:
        write_json(f"{path}.meta.json", sidecar)
    return path, csv_path
