"""Minimal inpainting service speaking the client's wire protocol.

Meant for tests and local smoke runs.  Fill modes: ``gray`` (constant 128),
``echo`` (return the input untouched) and ``blur`` (3x3 box blur of the input).
Fault knobs let tests force 500s, delays and wrong-sized replies.
"""

from __future__ import annotations

import email.parser
import email.policy
import io
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

FILL_MODES = ("gray", "echo", "blur")


@dataclass
class StubBehaviour:
    fill: str = "gray"
    fail_first: int = 0  # answer 500 to the first N requests
    delay_s: float = 0.0
    reply_size: tuple[int, int] | None = None  # (w, h) override


def parse_multipart(content_type: str, body: bytes) -> dict[str, bytes]:
    msg = email.parser.BytesParser(policy=email.policy.HTTP).parsebytes(
        b"Content-Type: " + content_type.encode("latin-1") + b"\r\n\r\n" + body
    )
    parts = {}
    for part in msg.iter_parts():
        name = part.get_param("name", header="content-disposition")
        if name:
            parts[name] = part.get_payload(decode=True)
    return parts


def fill_prediction(img: np.ndarray, fill: str) -> np.ndarray:
    if fill == "gray":
        return np.full_like(img, 128)
    if fill == "echo":
        return img
    if fill == "blur":
        return ndimage.uniform_filter(img.astype(np.float64), size=(3, 3, 1), mode="nearest").round().astype(np.uint8)
    raise ValueError(f"unknown fill {fill!r}")


class _Handler(BaseHTTPRequestHandler):
    server: "_Server"

    def log_message(self, fmt, *args):  # keep test output quiet
        pass

    def do_POST(self):
        srv = self.server
        with srv.lock:
            srv.request_count += 1
            count = srv.request_count
        beh = srv.behaviour
        if beh.delay_s:
            time.sleep(beh.delay_s)
        if self.path.rstrip("/") != "/inpaint":
            self.send_error(404)
            return
        if count <= beh.fail_first:
            self.send_error(500, "injected failure")
            return
        length = int(self.headers.get("Content-Length", 0))
        body = self.rfile.read(length)
        try:
            parts = parse_multipart(self.headers.get("Content-Type", ""), body)
            img = np.array(PILImage.open(io.BytesIO(parts["image"])).convert("RGB"))
            PILImage.open(io.BytesIO(parts["mask"])).load()
        except Exception:
            self.send_error(400, "expected multipart image and mask PNGs")
            return
        pred = fill_prediction(img, beh.fill)
        if beh.reply_size is not None:
            pred = np.full((beh.reply_size[1], beh.reply_size[0], 3), 128, dtype=np.uint8)
        buf = io.BytesIO()
        PILImage.fromarray(pred, mode="RGB").save(buf, format="PNG")
        data = buf.getvalue()
        self.send_response(200)
        self.send_header("Content-Type", "image/png")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


class _Server(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, addr, behaviour):
        super().__init__(addr, _Handler)
        self.behaviour = behaviour
        self.request_count = 0
        self.lock = threading.Lock()


class StubServer:
    """Run the stub in a background thread; usable as a context manager."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0, behaviour: StubBehaviour | None = None, **kw):
        self.behaviour = behaviour or StubBehaviour(**kw)
        if self.behaviour.fill not in FILL_MODES:
            raise ValueError(f"fill must be one of {FILL_MODES}")
        self._server = _Server((host, port), self.behaviour)
        self._thread = None

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def request_count(self) -> int:
        return self._server.request_count

    def start(self) -> "StubServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
