"""Cutout augmentation, placement sampling and pasting.

Pasting itself is a float alpha blend on 0..255 samples rounded half-up; the
hard paste uses the binary mask as alpha and the Gaussian baseline uses the
mask blurred by a truncated, normalized Gaussian.  Poisson cloning lives in
:mod:`pastesynth.poisson`; gap inpainting is deferred to
:mod:`pastesynth.inpaint`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence, Union

import numpy as np
from scipy import ndimage

from .errors import (
    DegenerateResultError,
    DimensionMismatchError,
    EmptyMaskError,
    EmptySceneError,
    NoValidPlacementError,
)
from .imaging import RleMask, as_image, as_mask, empty_rle, mask_bbox, mask_to_rle, quantize
from .morphology import GapMode, StructElem, gap_mask


@dataclass(frozen=True)
class ObjectCutout:
    image: np.ndarray
    mask: np.ndarray
    category: str
    origin: tuple[int, int] | None = None

    def __post_init__(self):
        img = as_image(self.image)
        m = as_mask(self.mask)
        if img.shape[:2] != m.shape:
            raise DimensionMismatchError(f"cutout mask {m.shape} != image {img.shape[:2]}")
        if not m.any():
            raise EmptyMaskError(f"cutout {self.category!r} has an empty mask")
        if not self.category:
            raise ValueError("cutout category must be nonempty")
        object.__setattr__(self, "image", img)
        object.__setattr__(self, "mask", m)

    @property
    def width(self) -> int:
        return self.image.shape[1]

    @property
    def height(self) -> int:
        return self.image.shape[0]


@dataclass(frozen=True)
class AugmentSpec:
    scale: float = 1.0
    rotation_deg: float = 0.0
    flip_h: bool = False
    gain: float = 1.0

    def __post_init__(self):
        if self.scale <= 0 or self.gain <= 0:
            raise ValueError("scale and gain must be positive")


@dataclass(frozen=True)
class Placement:
    x: int
    y: int


# Blend methods -------------------------------------------------------------


@dataclass(frozen=True)
class NoBlend:
    tag = "noblend"


@dataclass(frozen=True)
class Gaussian:
    sigma: float = 2.0
    tag = "gaussian"

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")


@dataclass(frozen=True)
class Poisson:
    guidance: str = "source"
    tol: float = 1e-6
    max_iter: int | None = None
    tag = "poisson"

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.guidance not in ("source", "mixed"):
            raise ValueError(f"unknown guidance {self.guidance!r}")


@dataclass(frozen=True)
class Inpaint:
    backend: Any = None
    tag = "inpaint"


BlendMethod = Union[NoBlend, Gaussian, Poisson, Inpaint]


@dataclass(frozen=True)
class GapConfig:
    mode: GapMode = GapMode.INSTANCE
    se_out: StructElem = field(default_factory=StructElem)
    se_in: StructElem = field(default_factory=StructElem)


@dataclass(frozen=True)
class AnnotationRecord:
    category: str
    bbox: tuple[int, int, int, int]
    segmentation: RleMask
    ignore: RleMask
    image_id: str = ""
    blend_method: str = ""

    def to_json(self) -> dict:
        return {
            "image_id": self.image_id,
            "category": self.category,
            "bbox": list(self.bbox),
            "segmentation": self.segmentation.to_json(),
            "ignore": self.ignore.to_json(),
            "blend_method": self.blend_method,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AnnotationRecord":
        return cls(
            category=obj["category"],
            bbox=tuple(int(v) for v in obj["bbox"]),
            segmentation=RleMask.from_json(obj["segmentation"]),
            ignore=RleMask.from_json(obj["ignore"]),
            image_id=obj.get("image_id", ""),
            blend_method=obj.get("blend_method", ""),
        )


@dataclass(frozen=True)
class CompositeResult:
    image: np.ndarray
    gap: np.ndarray
    annotations: list[AnnotationRecord]


# Geometry ------------------------------------------------------------------


def _bilinear(src: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample ``src`` (H, W[, C]) at float pixel coords; outside samples are 0."""
    h, w = src.shape[:2]
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = xs - x0
    fy = ys - y0
    out = np.zeros(xs.shape + src.shape[2:], dtype=np.float64)
    for dy, wy in ((0, 1 - fy), (1, fy)):
        for dx, wx in ((0, 1 - fx), (1, fx)):
            xi = x0 + dx
            yi = y0 + dy
            ok = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            wgt = np.where(ok, wx * wy, 0.0)
            vals = src[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)].astype(np.float64)
            if src.ndim == 3:
                wgt = wgt[..., None]
            out += wgt * vals
    return out


def transform_cutout(c: ObjectCutout, a: AugmentSpec) -> ObjectCutout:
    """Flip, then scale and rotate clockwise about the center, then apply gain.

    The canvas grows to hold the whole rotated rectangle.  Quarter turns at unit
    scale are exact lattice permutations.
    """
    img, mask = c.image, c.mask
    if a.flip_h:
        img, mask = img[:, ::-1], mask[:, ::-1]
    h, w = mask.shape
    quarter = a.rotation_deg / 90.0
    if a.scale == 1.0 and quarter == round(quarter):
        k = -int(round(quarter)) % 4
        img, mask = np.rot90(img, k), np.rot90(mask, k)
    else:
        theta = math.radians(a.rotation_deg)
        cos, sin = math.cos(theta), math.sin(theta)
        eps = 1e-9
        out_w = max(1, math.ceil(a.scale * (w * abs(cos) + h * abs(sin)) - eps))
        out_h = max(1, math.ceil(a.scale * (w * abs(sin) + h * abs(cos)) - eps))
        u, v = np.meshgrid(np.arange(out_w) + 0.5 - out_w / 2, np.arange(out_h) + 0.5 - out_h / 2)
        # inverse of the clockwise rotation (y axis points down)
        xin = (cos * u + sin * v) / a.scale + w / 2 - 0.5
        yin = (-sin * u + cos * v) / a.scale + h / 2 - 0.5
        img = quantize(_bilinear(img, xin, yin))
        mask = _bilinear(mask.astype(np.float64), xin, yin) >= 0.5
    if a.gain != 1.0:
        img = quantize(img.astype(np.float64) * a.gain)
    img = np.ascontiguousarray(img)
    mask = np.ascontiguousarray(mask)
    if not mask.any():
        raise DegenerateResultError(f"augmentation {a} left {c.category!r} with an empty mask")
    origin = c.origin
    if origin is not None and mask.shape != (h, w):
        origin = (
            int(math.floor(origin[0] + (w - mask.shape[1]) / 2 + 0.5)),
            int(math.floor(origin[1] + (h - mask.shape[0]) / 2 + 0.5)),
        )
    return ObjectCutout(img, mask, c.category, origin)


def placement_visibility(
    bg_w: int, bg_h: int, cut_w: int, cut_h: int, mask: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Visible fraction for every top-left offset that overlaps the background.

    Returns ``(xs, ys, frac)`` with ``frac[j, i]`` for offset ``(xs[i], ys[j])``.
    Without a mask the whole cutout rectangle counts.
    """
    if mask is None:
        mask = np.ones((cut_h, cut_w), dtype=bool)
    total = int(mask.sum())
    sat = np.zeros((cut_h + 1, cut_w + 1), dtype=np.int64)
    sat[1:, 1:] = mask.astype(np.int64).cumsum(0).cumsum(1)
    xs = np.arange(-(cut_w - 1), bg_w)
    ys = np.arange(-(cut_h - 1), bg_h)
    c0 = np.clip(-xs, 0, cut_w)
    c1 = np.clip(bg_w - xs, 0, cut_w)
    r0 = np.clip(-ys, 0, cut_h)[:, None]
    r1 = np.clip(bg_h - ys, 0, cut_h)[:, None]
    visible = sat[r1, c1] - sat[r0, c1] - sat[r1, c0] + sat[r0, c0]
    return xs, ys, visible / total


def sample_placement(
    rng: np.random.Generator,
    bg_w: int,
    bg_h: int,
    cut_w: int,
    cut_h: int,
    max_truncation: float = 0.25,
    mask: np.ndarray | None = None,
) -> Placement:
    """Draw a top-left offset uniformly among those keeping enough of the cutout visible."""
    xs, ys, frac = placement_visibility(bg_w, bg_h, cut_w, cut_h, mask)
    valid = np.flatnonzero(frac.ravel() >= 1.0 - max_truncation - 1e-12)
    if valid.size == 0:
        raise NoValidPlacementError(
            f"{cut_w}x{cut_h} cutout cannot be placed on {bg_w}x{bg_h} "
            f"with max_truncation={max_truncation}"
        )
    k = int(valid[rng.integers(valid.size)])
    j, i = divmod(k, xs.size)
    return Placement(int(xs[i]), int(ys[j]))


def _paste_window(bg_shape, cut_shape, p: Placement):
    """Slices (bg_rows, bg_cols, cut_rows, cut_cols) of the in-image overlap, or None."""
    bh, bw = bg_shape[:2]
    ch, cw = cut_shape[:2]
    y0, y1 = max(p.y, 0), min(p.y + ch, bh)
    x0, x1 = max(p.x, 0), min(p.x + cw, bw)
    if y0 >= y1 or x0 >= x1:
        return None
    return (
        slice(y0, y1),
        slice(x0, x1),
        slice(y0 - p.y, y1 - p.y),
        slice(x0 - p.x, x1 - p.x),
    )


def place_mask(mask: np.ndarray, p: Placement, shape: tuple[int, int]) -> np.ndarray:
    """Cutout-sized mask moved onto an (H, W) canvas; off-canvas parts are dropped."""
    out = np.zeros(shape[:2], dtype=bool)
    win = _paste_window(shape, mask.shape, p)
    if win is not None:
        by, bx, cy, cx = win
        out[by, bx] = mask[cy, cx]
    return out


def alpha_paste(bg: np.ndarray, c: ObjectCutout, p: Placement, alpha: np.ndarray) -> np.ndarray:
    bg = as_image(bg)
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != c.mask.shape:
        raise DimensionMismatchError(f"alpha {alpha.shape} != cutout {c.mask.shape}")
    out = bg.copy()
    win = _paste_window(bg.shape, c.mask.shape, p)
    if win is None:
        return out
    by, bx, cy, cx = win
    a = alpha[cy, cx][..., None]
    mixed = a * c.image[cy, cx].astype(np.float64) + (1.0 - a) * bg[by, bx].astype(np.float64)
    out[by, bx] = quantize(mixed)
    return out


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian keeping only taps within 3 sigma of the center."""
    radius = int(math.floor(3.0 * sigma + 1e-9))
    d = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(d * d) / (2.0 * sigma * sigma))
    return k / k.sum()


def feathered_alpha(mask: np.ndarray, sigma: float) -> np.ndarray:
    k = gaussian_kernel(sigma)
    a = ndimage.convolve1d(mask.astype(np.float64), k, axis=0, mode="constant", cval=0.0)
    return ndimage.convolve1d(a, k, axis=1, mode="constant", cval=0.0)


def blend_gaussian(bg: np.ndarray, c: ObjectCutout, p: Placement, sigma: float = 2.0) -> np.ndarray:
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    return alpha_paste(bg, c, p, feathered_alpha(c.mask, sigma))


def paste(bg: np.ndarray, c: ObjectCutout, p: Placement, method: BlendMethod) -> np.ndarray:
    """Apply one per-object blend; inpainting pastes hard and is filled later."""
    if isinstance(method, Gaussian):
        return blend_gaussian(bg, c, p, method.sigma)
    if isinstance(method, Poisson):
        from .poisson import blend_poisson

        return blend_poisson(bg, c, p, method)
    return alpha_paste(bg, c, p, c.mask)


def compose_scene(
    bg: np.ndarray,
    placed: Sequence[tuple[ObjectCutout, Placement, BlendMethod]],
    gap_cfg: GapConfig | None = None,
) -> CompositeResult:
    """Paste objects in order (later ones occlude earlier ones) and build the gap.

    The returned image is the pre-fill composite; annotation boxes come from the
    visible part of each mask, never from the gap.
    """
    bg = as_image(bg)
    gap_cfg = gap_cfg or GapConfig()
    mode = GapMode(gap_cfg.mode)
    if not placed and mode is GapMode.INSTANCE:
        raise EmptySceneError("instance-mode scene has no objects")
    shape = bg.shape[:2]
    image = bg
    gap = np.zeros(shape, dtype=bool)
    canvas_masks = []
    for cutout, placement, method in placed:
        image = paste(image, cutout, placement, method)
        m = place_mask(cutout.mask, placement, shape)
        gap &= ~m
        gap |= gap_mask(m, mode, gap_cfg.se_out, gap_cfg.se_in)
        canvas_masks.append(m)

    visible = []
    covered = np.zeros(shape, dtype=bool)
    for m in reversed(canvas_masks):
        visible.append(m & ~covered)
        covered |= m
    visible.reverse()
    if mode is GapMode.FOREGROUND:
        gap &= ~covered

    h, w = shape
    ignore = mask_to_rle(gap) if mode is GapMode.FOREGROUND else empty_rle(w, h)
    annotations = []
    for (cutout, _, method), vis in zip(placed, visible):
        box = mask_bbox(vis)
        if box is None:
            continue
        annotations.append(
            AnnotationRecord(
                category=cutout.category,
                bbox=box,
                segmentation=mask_to_rle(vis),
                ignore=ignore,
                blend_method=method.tag,
            )
        )
    return CompositeResult(image=image, gap=gap, annotations=annotations)
