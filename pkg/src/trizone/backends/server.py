"""Reference HTTP server exposing any :class:`Backend` over the wire protocol.

Wrapping a real model is a matter of subclassing ``Backend`` and passing it
to :func:`make_server`. Malformed payloads get 400, backend errors 500.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..errors import ProtocolError, TrizoneError
from . import wire
from .base import Backend

log = logging.getLogger(__name__)


def _handle(backend: Backend, path: str, body: dict, key: str | None) -> dict:
    if path == wire.PATHS["tryon"]:
        return wire.image_response(backend.tryon(wire.read_tryon_request(body), key))
    if path == wire.PATHS["inpaint"]:
        image, region = wire.read_inpaint_request(body)
        return wire.image_response(backend.inpaint(image, region, key))
    if path == wire.PATHS["parse"]:
        return wire.labels_response(backend.parse_human(wire.read_image_request(body), key))
    if path == wire.PATHS["densepose"]:
        return wire.labels_response(backend.densepose(wire.read_image_request(body), key))
    if path == wire.PATHS["trizone"]:
        model, garment = wire.read_trizone_request(body)
        return wire.trizone_response(backend.predict_trizone(model, garment, key))
    if path == wire.PATHS["judge"]:
        image, prompt = wire.read_judge_request(body)
        return wire.judge_response(backend.judge(image, prompt, key).raw_reply)
    raise LookupError(path)


def make_server(backend: Backend, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):
            log.debug("%s " + fmt, self.address_string(), *args)

        def _reply(self, status: int, payload: dict) -> None:
            data = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            try:
                body = json.loads(self.rfile.read(length) or b"null")
                out = _handle(backend, self.path, body, self.headers.get("Idempotency-Key"))
            except LookupError:
                self._reply(404, {"error": f"unknown path {self.path}"})
            except (json.JSONDecodeError, ProtocolError, ValueError) as exc:
                self._reply(400, {"error": str(exc)})
            except (TrizoneError, NotImplementedError) as exc:
                self._reply(500, {"error": f"{exc.__class__.__name__}: {exc}"})
            else:
                self._reply(200, out)

    return ThreadingHTTPServer((host, port), Handler)


def serve_in_thread(backend: Backend, host: str = "127.0.0.1", port: int = 0):
    """Start a server on a daemon thread; returns ``(server, base_url)``."""
    server = make_server(backend, host, port)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, f"http://{server.server_address[0]}:{server.server_address[1]}"
