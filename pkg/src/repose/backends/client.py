"""HTTP/JSON transport for a remote inference server."""
from __future__ import annotations

import logging
import os
import threading
import time
from typing import Callable, Iterable

import requests

from .protocol import (
    KINDS,
    BackendError,
    BackendHTTPError,
    BackendNetworkError,
    BackendProtocolError,
    BackendRequest,
    BackendResponse,
    BackendTimeout,
)

log = logging.getLogger(__name__)


class HttpBackend:
    """POSTs each request to ``{base_url}/{endpoint}``.

    Network failures, timeouts and 5xx answers are retried ``retries`` times
    with exponential backoff starting at ``backoff_s``; 4xx answers and
    malformed bodies fail immediately. At most ``max_inflight`` requests are
    outstanding at once.
    """

    def __init__(
        self,
        base_url: str | None = None,
        token: str | None = None,
        timeout_s: float = 120.0,
        retries: int = 2,
        backoff_s: float = 1.0,
        max_inflight: int = 1,
        capabilities: Iterable[str] | None = None,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        base_url = base_url or os.environ.get("REPOSE_BACKEND_URL")
        if not base_url:
            raise BackendError("no backend URL configured (set REPOSE_BACKEND_URL or backend.url)")
        self.base_url = base_url.rstrip("/")
        self.token = token if token is not None else os.environ.get("REPOSE_BACKEND_TOKEN")
        self.timeout_s = timeout_s
        self.retries = retries
        self.backoff_s = backoff_s
        self.capabilities = frozenset(KINDS if capabilities is None else capabilities)
        self.session = session or requests.Session()
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max(1, max_inflight))
        self.attempts = 0

    def url_for(self, req: BackendRequest) -> str:
        return f"{self.base_url}/{req.endpoint}"

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        return headers

    def call(self, req: BackendRequest) -> BackendResponse:
        body = req.to_json().encode("utf-8")
        delay = self.backoff_s
        last: BackendError | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                log.warning("retrying %s (%s) in %.1fs: %s", req.kind, req.request_id, delay, last)
                self._sleep(delay)
                delay *= 2
            try:
                return self._attempt(req, body)
            except (BackendNetworkError, BackendTimeout) as exc:
                last = exc
            except BackendHTTPError as exc:
                if exc.status < 500:
                    raise
                last = exc
        assert last is not None
        raise last

    def _attempt(self, req: BackendRequest, body: bytes) -> BackendResponse:
        with self._slots:
            self.attempts += 1
            try:
                r = self.session.post(self.url_for(req), data=body, headers=self._headers(), timeout=self.timeout_s)
            except requests.Timeout as exc:
                raise BackendTimeout(f"{req.kind}: timed out after {self.timeout_s}s") from exc
            except requests.RequestException as exc:
                raise BackendNetworkError(f"{req.kind}: {exc}") from exc
        if not 200 <= r.status_code < 300:
            raise BackendHTTPError(r.status_code, r.text[:200])
        try:
            payload = r.json()
        except ValueError as exc:
            raise BackendProtocolError(f"{req.kind}: response is not JSON") from exc
        return BackendResponse.from_dict(payload)
