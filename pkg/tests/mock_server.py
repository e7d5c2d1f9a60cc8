"""Minimal local HTTP servers mimicking embeddings/completions endpoints."""

from __future__ import annotations

import hashlib
import json
import threading
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np


def _deterministic_embedding(text: str, dim: int) -> list[float]:
    seed = int.from_bytes(hashlib.md5(text.encode("utf-8")).digest()[:4], "little")
    return np.random.RandomState(seed).standard_normal(dim).tolist()


class _Handler(BaseHTTPRequestHandler):
    dim = 8
    fail_first = 0
    failures_left = 0
    completion_text = "Answer: mock"
    lock = threading.Lock()

    def log_message(self, *args):  # silence request logging
        pass

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        return json.loads(self.rfile.read(length))

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        cls = type(self)
        with cls.lock:
            if cls.failures_left > 0:
                cls.failures_left -= 1
                self._send(500, {"error": "induced failure"})
                return
        body = self._read_body()
        if "input" in body:
            data = [
                {"embedding": _deterministic_embedding(text, cls.dim)}
                for text in body["input"]
            ]
            self._send(200, {"data": data})
        else:
            self._send(200, {"choices": [{"text": cls.completion_text}]})


@contextmanager
def _serve(handler_cls):
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler_cls)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_port}/"
    finally:
        server.shutdown()
        server.server_close()


@contextmanager
def serve_embeddings(dim: int = 8, fail_first: int = 0):
    handler = type("H", (_Handler,), {"dim": dim, "failures_left": fail_first,
                                      "lock": threading.Lock()})
    with _serve(handler) as url:
        yield url


@contextmanager
def serve_completions(text: str = "Answer: mock", fail_first: int = 0):
    handler = type("H", (_Handler,), {"completion_text": text, "failures_left": fail_first,
                                      "lock": threading.Lock()})
    with _serve(handler) as url:
        yield url
