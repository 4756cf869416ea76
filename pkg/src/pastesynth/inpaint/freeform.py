"""Random free-form hole masks (brush strokes) for exercising inpainting backends."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import CoverageUnsatisfiableError

MAX_REDRAWS = 10


@dataclass(frozen=True)
class FreeformParams:
    num_strokes: tuple[int, int] = (1, 4)
    vertices_per_stroke: tuple[int, int] = (4, 10)
    max_turn_angle: float = 45.0
    brush_width: tuple[float, float] = (8.0, 20.0)
    segment_length: tuple[float, float] = (10.0, 35.0)
    coverage: tuple[float, float] = (0.02, 0.25)

    def __post_init__(self):
        for name in ("num_strokes", "vertices_per_stroke", "brush_width", "segment_length", "coverage"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: empty range {lo}..{hi}")
        lo, hi = self.coverage
        if lo < 0 or hi >= 1:
            raise ValueError("coverage bounds must lie in [0, 1)")


def _stamp_segment(mask, p0, p1, radius):
    """Set every pixel whose centre is within ``radius`` of segment p0-p1."""
    h, w = mask.shape
    x0 = max(int(math.floor(min(p0[0], p1[0]) - radius)), 0)
    x1 = min(int(math.ceil(max(p0[0], p1[0]) + radius)) + 1, w)
    y0 = max(int(math.floor(min(p0[1], p1[1]) - radius)), 0)
    y1 = min(int(math.ceil(max(p0[1], p1[1]) + radius)) + 1, h)
    if x0 >= x1 or y0 >= y1:
        return
    yy, xx = np.mgrid[y0:y1, x0:x1]
    px, py = xx + 0.5, yy + 0.5
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    seg2 = dx * dx + dy * dy
    if seg2 == 0:
        t = np.zeros_like(px)
    else:
        t = np.clip(((px - p0[0]) * dx + (py - p0[1]) * dy) / seg2, 0.0, 1.0)
    qx, qy = p0[0] + t * dx, p0[1] + t * dy
    mask[y0:y1, x0:x1] |= (px - qx) ** 2 + (py - qy) ** 2 <= radius * radius


def _draw(w, h, p: FreeformParams, rng: np.random.Generator) -> np.ndarray:
    mask = np.zeros((h, w), dtype=bool)
    for _ in range(int(rng.integers(p.num_strokes[0], p.num_strokes[1] + 1))):
        n_vert = int(rng.integers(p.vertices_per_stroke[0], p.vertices_per_stroke[1] + 1))
        radius = rng.uniform(*p.brush_width) / 2.0
        pt = (rng.uniform(0, w), rng.uniform(0, h))
        heading = rng.uniform(0, 2 * math.pi)
        turn = math.radians(p.max_turn_angle)
        _stamp_segment(mask, pt, pt, radius)
        for _ in range(n_vert - 1):
            heading += rng.uniform(-turn, turn)
            length = rng.uniform(*p.segment_length)
            nxt = (
                min(max(pt[0] + length * math.cos(heading), 0.0), float(w)),
                min(max(pt[1] + length * math.sin(heading), 0.0), float(h)),
            )
            _stamp_segment(mask, pt, nxt, radius)
            pt = nxt
    return mask


def generate_freeform_mask(
    w: int, h: int, p: FreeformParams | None = None, rng: np.random.Generator | int | None = None
) -> np.ndarray:
    """Union of random disc-brushed polylines with coverage inside ``p.coverage``.

    Redraws up to ``MAX_REDRAWS`` times before giving up.
    """
    p = p or FreeformParams()
    rng = np.random.default_rng(rng)
    lo, hi = p.coverage
    for _ in range(MAX_REDRAWS):
        mask = _draw(w, h, p, rng)
        cov = mask.mean()
        if lo <= cov <= hi:
            return mask
    raise CoverageUnsatisfiableError(
        f"no mask with coverage in [{lo}, {hi}] after {MAX_REDRAWS} draws on {w}x{h}"
    )
