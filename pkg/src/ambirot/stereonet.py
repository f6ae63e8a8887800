"""Stereonet plots of C2 frames.

Each observation contributes its vector ``u0`` as a triangle and both
ends of its axis ``+-u1`` as circles: filled for the lower end
(negative third coordinate) and open for the upper end. Points are
mapped into the unit disc by ``p(x) = (x1, x2) / (1 + |x3|)``, the
stereographic projection of the upper hemisphere with lower-hemisphere
points reflected through the equatorial plane first.
"""

from dataclasses import dataclass

import numpy as np

from ._config import MEAN_MARKER_SCALE
from .rotations import AmbiguousRotation, as_sample

__all__ = ["Marker", "project", "stereonet_markers", "render_stereonet"]

_SIZE = 400
_RADIUS = 180.0
_MARK = 4.0


@dataclass(frozen=True)
class Marker:
    """One plotted symbol.

    Attributes
    ----------
    point : tuple of float
        Position in the unit disc.
    kind : {'vector-triangle', 'axis-filled', 'axis-open'}
    size : float
        Radius in plot units.
    mean : bool
    """

    point: tuple
    kind: str
    size: float
    mean: bool = False


def project(x):
    """Project unit vectors of shape (..., 3) into the unit disc."""
    x = np.asarray(x, dtype=float)
    return x[..., :2] / (1.0 + np.abs(x[..., 2:3]))


def _frame_markers(rep, size, mean):
    u0, u1 = rep[:, 2], rep[:, 0]
    out = [Marker(tuple(project(u0).tolist()), "vector-triangle", size, mean)]
    ends = (u1, -u1)
    # the end with negative third coordinate is the lower end; ties go to +u1
    lower = 0 if u1[2] <= 0 else 1
    for j, e in enumerate(ends):
        kind = "axis-filled" if j == lower else "axis-open"
        out.append(Marker(tuple(project(e).tolist()), kind, size, mean))
    return out


def stereonet_markers(sample, mean=None):
    """Markers for a C2 sample and, optionally, its mean (drawn larger)."""
    s = as_sample(sample)
    if not (s.group.kind == "C" and s.group.order == 2):
        raise ValueError(f"stereonets are implemented for C2 frames only, not {s.group.name}")
    marks = []
    for rep in s.reps:
        marks.extend(_frame_markers(rep, _MARK, False))
    if mean is not None:
        if not isinstance(mean, AmbiguousRotation) or mean.group != s.group:
            raise ValueError("mean must be a C2 AmbiguousRotation")
        marks.extend(_frame_markers(mean.rep, _MARK * MEAN_MARKER_SCALE, True))
    return marks


def _xy(p):
    c = _SIZE / 2.0
    return c + _RADIUS * p[0], c - _RADIUS * p[1]


def _svg_marker(m):
    x, y = _xy(m.point)
    r = m.size
    if m.kind == "vector-triangle":
        pts = [(x, y - r), (x - 0.866 * r, y + 0.5 * r), (x + 0.866 * r, y + 0.5 * r)]
        coords = " ".join(f"{a:.3f},{b:.3f}" for a, b in pts)
        return f'<polygon points="{coords}" fill="red" stroke="red"/>'
    fill = "black" if m.kind == "axis-filled" else "white"
    return f'<circle cx="{x:.3f}" cy="{y:.3f}" r="{r:.3f}" fill="{fill}" stroke="black"/>'


def render_stereonet(sample, mean=None, title=None):
    """SVG text of a C2 stereonet.

    Parameters
    ----------
    sample : AmbiguousSample with group C2
    mean : AmbiguousRotation, optional
        Drawn with symbols enlarged by ``MEAN_MARKER_SCALE``.
    title : str, optional

    Returns
    -------
    str
        Deterministic SVG document.
    """
    marks = stereonet_markers(sample, mean)
    c = _SIZE / 2.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE}" height="{_SIZE}" viewBox="0 0 {_SIZE} {_SIZE}">',
        f'<circle cx="{c:.3f}" cy="{c:.3f}" r="{_RADIUS:.3f}" fill="none" stroke="black"/>',
    ]
    if title:
        safe = title.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        parts.append(f'<text x="{c:.3f}" y="14" text-anchor="middle" font-size="12">{safe}</text>')
    parts.extend(_svg_marker(m) for m in marks)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
