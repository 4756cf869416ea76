"""Binary dilation/erosion and the blending-gap band around a pasted mask."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .imaging import as_mask


class Shape(str, enum.Enum):
    SQUARE = "square"
    DISC = "disc"


class GapMode(str, enum.Enum):
    INSTANCE = "instance"
    FOREGROUND = "foreground"


@dataclass(frozen=True)
class StructElem:
    """Square (Chebyshev ball) or disc (Euclidean ball) of integer radius."""

    shape: Shape = Shape.SQUARE
    radius: int = 3

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(self.shape))
        if int(self.radius) != self.radius or self.radius < 1:
            raise ValueError(f"radius must be an integer >= 1, got {self.radius}")

    def half_widths(self) -> dict[int, int]:
        """Horizontal half-width of the element for each row offset dy."""
        r = self.radius
        if self.shape is Shape.SQUARE:
            return {dy: r for dy in range(-r, r + 1)}
        return {dy: math.isqrt(r * r - dy * dy) for dy in range(-r, r + 1)}

    def offsets(self) -> list[tuple[int, int]]:
        return [(dy, dx) for dy, hw in self.half_widths().items() for dx in range(-hw, hw + 1)]


def _window_counts(m: np.ndarray, hw: int) -> np.ndarray:
    """Number of foreground pixels in the row window [x-hw, x+hw] (outside = 0)."""
    h, w = m.shape
    c = np.zeros((h, w + 1), dtype=np.int32)
    np.cumsum(m, axis=1, out=c[:, 1:])
    x = np.arange(w)
    hi = np.minimum(x + hw + 1, w)
    lo = np.maximum(x - hw, 0)
    return c[:, hi] - c[:, lo]


def _shift_rows(m: np.ndarray, dy: int, fill: bool) -> np.ndarray:
    """out[y] = m[y + dy], with ``fill`` where y + dy is outside the image."""
    out = np.full_like(m, fill)
    h = m.shape[0]
    if dy >= 0:
        if dy < h:
            out[: h - dy] = m[dy:]
    elif -dy < h:
        out[-dy:] = m[: h + dy]
    return out


def dilate(mask: np.ndarray, se: StructElem) -> np.ndarray:
    m = as_mask(mask)
    out = np.zeros_like(m)
    rows = {}
    for dy, hw in se.half_widths().items():
        if hw not in rows:
            rows[hw] = _window_counts(m, hw) > 0
        out |= _shift_rows(rows[hw], dy, False)
    return out


def erode(mask: np.ndarray, se: StructElem) -> np.ndarray:
    m = as_mask(mask)
    out = np.ones_like(m)
    rows = {}
    for dy, hw in se.half_widths().items():
        if hw not in rows:
            rows[hw] = _window_counts(m, hw) == 2 * hw + 1
        out &= _shift_rows(rows[hw], dy, False)
    return out


def gap_mask(
    mask: np.ndarray,
    mode: GapMode,
    se_out: StructElem | None = None,
    se_in: StructElem | None = None,
) -> np.ndarray:
    """Band to inpaint around ``mask``.

    Instance mode takes ``dilate(M) & ~erode(M)`` so the band straddles the
    object border; foreground mode takes ``dilate(M) & ~M`` and never touches
    the object itself.
    """
    m = as_mask(mask)
    se_out = se_out or StructElem()
    se_in = se_in or StructElem()
    outer = dilate(m, se_out)
    if GapMode(mode) is GapMode.INSTANCE:
        return outer & ~erode(m, se_in)
    return outer & ~m
