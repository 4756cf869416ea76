"""HTTP client for external inpainting services.

Wire protocol: ``POST {url}/inpaint`` as multipart/form-data with an ``image``
part (RGB PNG) and a ``mask`` part (8-bit gray PNG, 255 = hole).  A 200
response carries an ``image/png`` of the same size.  The prediction is only
trusted inside the hole.
"""

from __future__ import annotations

import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import requests
from PIL import Image as PILImage

from ..errors import BadResponseError, RemoteFailureError, ServiceTimeoutError
from ..imaging import as_image, as_mask, check_same_size

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ServiceEndpoint:
    url: str
    timeout_ms: int = 30000
    retries: int = 2
    backoff_ms: int = 500
    max_in_flight: int = 4

    def __post_init__(self):
        if self.retries < 0:
            raise ValueError("retries must be >= 0")
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be > 0")


def encode_png(arr: np.ndarray, mode: str) -> bytes:
    buf = io.BytesIO()
    PILImage.fromarray(arr, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    try:
        pil = PILImage.open(io.BytesIO(data))
        pil.load()
    except Exception as exc:  # PIL raises a zoo of types for bad bytes
        raise BadResponseError(f"response is not a decodable image: {exc}") from exc
    return np.array(pil.convert("RGB"), dtype=np.uint8)


def composite_prediction(img: np.ndarray, hole: np.ndarray, pred: np.ndarray) -> np.ndarray:
    out = img.copy()
    out[hole] = pred[hole]
    return out


def inpaint_via_service(
    ep: ServiceEndpoint, img: np.ndarray, hole: np.ndarray, session: requests.Session | None = None
) -> np.ndarray:
    """Send one request, retrying non-200 answers with exponential backoff.

    Timeouts are not retried so the caller sees them within ``timeout_ms``.
    """
    img = as_image(img)
    hole = as_mask(hole)
    check_same_size(img, hole)
    files = {
        "image": ("image.png", encode_png(img, "RGB"), "image/png"),
        "mask": ("mask.png", encode_png(hole.astype(np.uint8) * 255, "L"), "image/png"),
    }
    target = ep.url.rstrip("/") + "/inpaint"
    http = session or requests
    last = None
    for attempt in range(ep.retries + 1):
        if attempt:
            time.sleep(ep.backoff_ms * 2 ** (attempt - 1) / 1000.0)
        try:
            resp = http.post(target, files=files, timeout=ep.timeout_ms / 1000.0)
        except requests.Timeout as exc:
            raise ServiceTimeoutError(f"{target} did not answer within {ep.timeout_ms} ms") from exc
        except requests.RequestException as exc:
            last = f"{type(exc).__name__}: {exc}"
            logger.warning("inpaint request %d/%d failed: %s", attempt + 1, ep.retries + 1, last)
            continue
        if resp.status_code == 200:
            pred = decode_png(resp.content)
            if pred.shape != img.shape:
                raise BadResponseError(
                    f"service returned {pred.shape[1]}x{pred.shape[0]}, expected "
                    f"{img.shape[1]}x{img.shape[0]}"
                )
            return composite_prediction(img, hole, pred)
        last = f"HTTP {resp.status_code}"
        logger.warning("inpaint request %d/%d failed: %s", attempt + 1, ep.retries + 1, last)
    raise RemoteFailureError(f"{target} failed after {ep.retries + 1} attempts ({last})")


def inpaint_many(
    ep: ServiceEndpoint, jobs: Sequence[tuple[np.ndarray, np.ndarray]]
) -> list[np.ndarray]:
    """Run several requests with at most ``ep.max_in_flight`` outstanding.

    Results come back in job order whatever order the server answers in.
    """
    with requests.Session() as session, ThreadPoolExecutor(max_workers=max(1, ep.max_in_flight)) as pool:
        futures = [pool.submit(inpaint_via_service, ep, img, hole, session) for img, hole in jobs]
        return [f.result() for f in futures]
