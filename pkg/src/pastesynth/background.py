"""Static-camera background estimation."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatchError, EmptyInputError
from .imaging import as_image, load_image

DEFAULT_WINDOW = 50
FRAME_SUFFIXES = (".png", ".jpg", ".jpeg")


def median_background(frames: Sequence[np.ndarray]) -> np.ndarray:
    """Per-pixel, per-channel median across frames.

    Even counts take the lower median so every output sample was actually
    observed at that pixel.
    """
    if len(frames) == 0:
        raise EmptyInputError("median_background needs at least one frame")
    first = as_image(frames[0])
    for i, f in enumerate(frames):
        if as_image(f).shape != first.shape:
            raise DimensionMismatchError(f"frame {i} is {f.shape}, expected {first.shape}")
    stack = np.stack(frames, axis=0)
    k = (stack.shape[0] - 1) // 2
    return np.partition(stack, k, axis=0)[k]


def list_frames(directory) -> list[Path]:
    directory = Path(directory)
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in FRAME_SUFFIXES and p.is_file())


def background_from_dir(directory, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """Median of the first ``window`` frames of a directory, sorted by name."""
    paths = list_frames(directory)[:window]
    if not paths:
        raise EmptyInputError(f"no frames found in {directory}")
    return median_background([load_image(p) for p in paths])
