"""Raster model, PNG/JPEG IO and the run-length mask codec.

Images are ``numpy.uint8`` arrays of shape ``(H, W, 3)`` in R,G,B order with a
top-left origin.  Masks are ``bool`` arrays of shape ``(H, W)``.  Nothing here
mutates its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from .errors import DecodeError, DimensionMismatchError, ImageIOError, InvalidRleError

_READABLE_FORMATS = {"PNG", "JPEG"}


def as_image(arr) -> np.ndarray:
    """Validate and return ``arr`` as an (H, W, 3) uint8 image."""
    img = np.asarray(arr)
    if img.ndim != 3 or img.shape[2] != 3:
        raise DimensionMismatchError(f"expected (H, W, 3) image, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise DimensionMismatchError("image must be at least 1x1")
    if img.dtype != np.uint8:
        raise TypeError(f"expected uint8 image, got {img.dtype}")
    return img


def as_mask(arr) -> np.ndarray:
    m = np.asarray(arr)
    if m.ndim != 2:
        raise DimensionMismatchError(f"expected (H, W) mask, got shape {m.shape}")
    return m.astype(bool, copy=False)


def check_same_size(img: np.ndarray, mask: np.ndarray) -> None:
    if img.shape[:2] != mask.shape[:2]:
        raise DimensionMismatchError(
            f"mask {mask.shape[:2]} does not match image {img.shape[:2]}"
        )


def to_float(img: np.ndarray) -> np.ndarray:
    return img.astype(np.float64) / 255.0


def quantize(values: np.ndarray) -> np.ndarray:
    """Round 0..255 float samples half-up and clamp to uint8."""
    return np.clip(np.floor(np.asarray(values, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)


def to_uint8(fimg: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_float` (round half-up)."""
    return quantize(np.asarray(fimg, dtype=np.float64) * 255.0)


def _open(path: Path) -> PILImage.Image:
    path = Path(path)
    if not path.is_file():
        raise ImageIOError(f"no such file: {path}")
    try:
        pil = PILImage.open(path)
        pil.load()
    except UnidentifiedImageError as exc:
        raise DecodeError(f"cannot decode {path}: {exc}") from exc
    except PermissionError as exc:
        raise ImageIOError(f"cannot read {path}: {exc}") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"cannot decode {path}: {exc}") from exc
    if pil.format not in _READABLE_FORMATS:
        raise DecodeError(f"{path}: unsupported format {pil.format}")
    return pil


def load_image(path) -> np.ndarray:
    """Decode a PNG or JPEG to 8-bit RGB; alpha is dropped, gray is replicated."""
    pil = _open(path)
    if pil.mode != "RGB":
        pil = pil.convert("RGB")
    return np.array(pil, dtype=np.uint8)


def save_image(img: np.ndarray, path) -> None:
    img = as_image(img)
    path = Path(path)
    if not path.parent.is_dir():
        raise ImageIOError(f"directory does not exist: {path.parent}")
    try:
        PILImage.fromarray(img, mode="RGB").save(path, format="PNG")
    except OSError as exc:
        raise ImageIOError(f"cannot write {path}: {exc}") from exc


def load_mask(path) -> np.ndarray:
    """Read a mask PNG; any nonzero sample is foreground."""
    pil = _open(path)
    arr = np.array(pil)
    if arr.ndim == 3:
        arr = arr[..., :3].any(axis=2) if arr.shape[2] >= 3 else arr[..., 0]
    return arr != 0


def save_mask(mask: np.ndarray, path) -> None:
    """Write a mask as 8-bit single-channel PNG, 255 = foreground."""
    m = as_mask(mask)
    path = Path(path)
    if not path.parent.is_dir():
        raise ImageIOError(f"directory does not exist: {path.parent}")
    try:
        PILImage.fromarray(m.astype(np.uint8) * 255, mode="L").save(path, format="PNG")
    except OSError as exc:
        raise ImageIOError(f"cannot write {path}: {exc}") from exc


@dataclass(frozen=True)
class RleMask:
    """Row-major run lengths, alternating background/foreground, background first."""

    width: int
    height: int
    counts: tuple[int, ...]

    def to_json(self) -> dict:
        return {"size": [self.height, self.width], "counts": list(self.counts)}

    @classmethod
    def from_json(cls, obj: dict) -> "RleMask":
        h, w = obj["size"]
        return cls(width=int(w), height=int(h), counts=tuple(int(c) for c in obj["counts"]))

    @property
    def area(self) -> int:
        return int(sum(self.counts[1::2]))


def mask_to_rle(mask: np.ndarray) -> RleMask:
    m = as_mask(mask)
    h, w = m.shape
    flat = m.ravel()
    if flat.size == 0:
        return RleMask(w, h, (0,))
    # indices where the value changes
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return RleMask(w, h, tuple(int(r) for r in runs))


def rle_to_mask(rle: RleMask) -> np.ndarray:
    counts = np.asarray(rle.counts, dtype=np.int64)
    total = rle.width * rle.height
    if counts.size == 0 or (counts < 0).any() or int(counts.sum()) != total:
        raise InvalidRleError(
            f"RLE counts sum to {int(counts.sum()) if counts.size else 0}, expected {total}"
        )
    values = np.zeros(counts.size, dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, counts)
    return flat.reshape(rle.height, rle.width)


def empty_rle(width: int, height: int) -> RleMask:
    return RleMask(width, height, (width * height,))


def mask_bbox(mask: np.ndarray) -> tuple[int, int, int, int] | None:
    """Tight (x, y, w, h) box of the foreground, or None when empty."""
    ys = np.flatnonzero(mask.any(axis=1))
    if ys.size == 0:
        return None
    xs = np.flatnonzero(mask.any(axis=0))
    return int(xs[0]), int(ys[0]), int(xs[-1] - xs[0] + 1), int(ys[-1] - ys[0] + 1)
