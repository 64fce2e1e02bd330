"""Serve a transport (normally the mock suite) over the HTTP wire protocol."""
from __future__ import annotations

import contextlib
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .protocol import ENDPOINTS, BackendError, BackendRequest

_KIND_BY_PATH = {"/" + path: kind for kind, path in ENDPOINTS.items()}


def make_handler(transport, token: str | None = None):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):  # keep test output quiet
            pass

        def _reply(self, status: int, body: str) -> None:
            data = body.encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_POST(self):
            kind = _KIND_BY_PATH.get(self.path)
            if kind is None:
                self._reply(404, '{"error":"unknown endpoint"}')
                return
            if token and self.headers.get("Authorization") != f"Bearer {token}":
                self._reply(401, '{"error":"unauthorized"}')
                return
            raw = self.rfile.read(int(self.headers.get("Content-Length", 0)))
            try:
                req = BackendRequest.from_json(raw)
            except BackendError as exc:
                self._reply(400, json.dumps({"error": str(exc)}))
                return
            if req.kind != kind:
                self._reply(400, '{"error":"kind does not match endpoint"}')
                return
            self._reply(200, transport.call(req).to_json())

    return Handler


@contextlib.contextmanager
def serve(transport, host: str = "127.0.0.1", port: int = 0, token: str | None = None):
    """Run the server in a background thread; yields the base URL."""
    httpd = ThreadingHTTPServer((host, port), make_handler(transport, token))
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://{host}:{httpd.server_address[1]}"
    finally:
        httpd.shutdown()
        httpd.server_close()
        thread.join()
