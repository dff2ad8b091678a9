"""Deterministic SVG rendering of scene layouts.

Top-down view: floor polygon in light gray, object footprints colored by
label with a heading tick from the center toward the object's facing
direction. All coordinates are written with fixed four-decimal formatting
so identical scenes render to identical bytes.
"""

from __future__ import annotations

from pathlib import Path

from .scenes import LabelVocab, SceneLayout

PX_PER_M = 60.0
MARGIN_M = 0.5

_FLOOR_FILL = "#eeeeee"
_FLOOR_STROKE = "#333333"


def label_color(index: int, n_real_labels: int) -> str:
    """Evenly spaced hues over the real (non-empty) labels."""
    hue = 360.0 * index / max(n_real_labels, 1)
    return f"hsl({hue:.1f},70%,60%)"


def _fmt(v: float) -> str:
    s = f"{v:.4f}"
    return "0.0000" if s == "-0.0000" else s


def _points(vertices, to_px) -> str:
    return " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in (to_px(v) for v in vertices))


def render_scene(scene: SceneLayout, vocab: LabelVocab) -> str:
    """Scene as a standalone SVG document string."""
    v = scene.floor.vertices
    x0, y0 = v.min(axis=0) - MARGIN_M
    x1, y1 = v.max(axis=0) + MARGIN_M
    width = (x1 - x0) * PX_PER_M
    height = (y1 - y0) * PX_PER_M

    def to_px(p):
        return (p[0] - x0) * PX_PER_M, (y1 - p[1]) * PX_PER_M

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        f'<rect width="{_fmt(width)}" height="{_fmt(height)}" fill="#ffffff"/>',
        f'<polygon points="{_points(v, to_px)}" fill="{_FLOOR_FILL}" '
        f'stroke="{_FLOOR_STROKE}" stroke-width="2"/>',
    ]
    n_real = vocab.n_labels - 1
    for obj in scene.objects:
        if obj.label == vocab.empty_index:
            continue
        color = label_color(obj.label, n_real)
        parts.append(
            f'<polygon points="{_points(obj.footprint(), to_px)}" fill="{color}" '
            f'fill-opacity="0.8" stroke="#222222" stroke-width="1"/>')
        cx, cy = to_px(obj.pos[:2])
        tip = (obj.pos[0] + obj.size[0] * obj.angle[0],
               obj.pos[1] + obj.size[0] * obj.angle[1])
        tx, ty = to_px(tip)
        parts.append(
            f'<line x1="{_fmt(cx)}" y1="{_fmt(cy)}" x2="{_fmt(tx)}" y2="{_fmt(ty)}" '
            f'stroke="#111111" stroke-width="2"/>')
        parts.append(
            f'<text x="{_fmt(cx)}" y="{_fmt(cy - 4.0)}" font-family="sans-serif" '
            f'font-size="11" text-anchor="middle" fill="#111111">'
            f"{vocab.name(obj.label)}</text>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def save_svg(scene: SceneLayout, vocab: LabelVocab, path: str | Path) -> None:
    Path(path).write_text(render_scene(scene, vocab))
