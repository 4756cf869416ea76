"""Gap filling backends and :func:`fill_gap`."""

from __future__ import annotations

import numpy as np

from .freeform import FreeformParams, generate_freeform_mask
from .patchmatch import NNField, PatchMatchParams, compute_nnf, inpaint_patchmatch
from .service import ServiceEndpoint, inpaint_via_service

__all__ = [
    "FreeformParams",
    "NNField",
    "PatchMatchParams",
    "ServiceEndpoint",
    "compute_nnf",
    "fill_gap",
    "generate_freeform_mask",
    "inpaint_image",
    "inpaint_patchmatch",
    "inpaint_via_service",
]


def inpaint_image(img: np.ndarray, hole: np.ndarray, backend=None) -> np.ndarray:
    """Dispatch to a backend: PatchMatchParams, ServiceEndpoint or a callable."""
    if not np.asarray(hole).any():
        return np.array(img, copy=True)
    if backend is None or isinstance(backend, PatchMatchParams):
        return inpaint_patchmatch(img, hole, backend)
    if isinstance(backend, ServiceEndpoint):
        return inpaint_via_service(backend, img, hole)
    if callable(backend):
        return backend(img, hole)
    raise TypeError(f"unsupported inpainting backend {backend!r}")


def fill_gap(result, backend=None) -> np.ndarray:
    """Inpaint ``result.gap`` in ``result.image``; a no-op for an empty gap."""
    return inpaint_image(result.image, result.gap, backend)
