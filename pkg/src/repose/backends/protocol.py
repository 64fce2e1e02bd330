"""Wire protocol shared by the HTTP client, the mock suite and the mock server.

Request body::

    {"kind", "request_id", "images": [b64 png], "masks": [b64 png],
     "text": {str: str}, "params": {str: number}}

Response body::

    {"request_id", "images": [b64 png], "latents": [b64 latent],
     "scalars": [number], "text": {str: str}, "error"?: str}

A latent is base64 of three little-endian uint32 ``channels, height, width``
followed by ``channels * height * width`` little-endian float32 values.
Latents travelling *to* a backend go in ``text["latent"]``.
"""
from __future__ import annotations

import base64
import json
import struct
from dataclasses import dataclass, field
from typing import Any

import numpy as np

KINDS = (
    "txt2img",
    "inpaint",
    "unsample",
    "sample",
    "caption",
    "detect",
    "segment",
    "upscale",
    "llm",
    "perceptual",
    "encode_latent",
    "decode_latent",
    "classify",
)

ENDPOINTS = {kind: f"v1/{kind}" for kind in KINDS}


class BackendError(RuntimeError):
    code = "backend"


class BackendNetworkError(BackendError):
    code = "network"


class BackendTimeout(BackendError):
    code = "timeout"


class BackendHTTPError(BackendError):
    code = "http_status"

    def __init__(self, status: int, message: str = ""):
        super().__init__(f"HTTP {status}: {message}".strip())
        self.status = status


class BackendProtocolError(BackendError):
    code = "malformed_json"


class BackendContractError(BackendError):
    code = "contract"


class BackendRemoteError(BackendError):
    code = "remote"


class CapabilityError(BackendError):
    code = "capability"


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False)


@dataclass
class BackendRequest:
    kind: str
    request_id: str
    images: list[str] = field(default_factory=list)
    masks: list[str] = field(default_factory=list)
    text: dict[str, str] = field(default_factory=dict)
    params: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown capability kind {self.kind!r}")

    @property
    def endpoint(self) -> str:
        return ENDPOINTS[self.kind]

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "request_id": self.request_id,
            "images": list(self.images),
            "masks": list(self.masks),
            "text": dict(self.text),
            "params": dict(self.params),
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "BackendRequest":
        try:
            return cls(
                kind=data["kind"],
                request_id=data["request_id"],
                images=list(data.get("images", [])),
                masks=list(data.get("masks", [])),
                text=dict(data.get("text", {})),
                params=dict(data.get("params", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendProtocolError(f"bad request body: {exc}") from exc

    @classmethod
    def from_json(cls, raw: str | bytes) -> "BackendRequest":
        try:
            data = json.loads(raw)
        except ValueError as exc:
            raise BackendProtocolError(f"request is not JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise BackendProtocolError("request body must be a JSON object")
        return cls.from_dict(data)


@dataclass
class BackendResponse:
    request_id: str
    images: list[str] = field(default_factory=list)
    latents: list[str] = field(default_factory=list)
    scalars: list[float] = field(default_factory=list)
    text: dict[str, str] = field(default_factory=dict)
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "request_id": self.request_id,
            "images": list(self.images),
            "latents": list(self.latents),
            "scalars": list(self.scalars),
            "text": dict(self.text),
        }
        if self.error is not None:
            out["error"] = self.error
        return out

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, data: Any) -> "BackendResponse":
        if not isinstance(data, dict) or "request_id" not in data:
            raise BackendProtocolError("response must be an object with a request_id")
        try:
            return cls(
                request_id=str(data["request_id"]),
                images=[str(v) for v in data.get("images", [])],
                latents=[str(v) for v in data.get("latents", [])],
                scalars=[float(v) for v in data.get("scalars", [])],
                text={str(k): str(v) for k, v in data.get("text", {}).items()},
                error=data.get("error"),
            )
        except (TypeError, ValueError, AttributeError) as exc:
            raise BackendProtocolError(f"bad response body: {exc}") from exc

    @classmethod
    def from_json(cls, raw: str | bytes) -> "BackendResponse":
        try:
            data = json.loads(raw)
        except ValueError as exc:
            raise BackendProtocolError(f"response is not JSON: {exc}") from exc
        return cls.from_dict(data)


_HEADER = struct.Struct("<3I")


def encode_latent(latent: np.ndarray) -> str:
    arr = np.asarray(latent)
    if arr.ndim != 3:
        raise ValueError(f"latent must be (channels, height, width), got {arr.shape}")
    data = np.ascontiguousarray(arr, dtype="<f4")
    if not np.isfinite(data).all():
        raise ValueError("latent contains non-finite values")
    return base64.b64encode(_HEADER.pack(*arr.shape) + data.tobytes()).decode("ascii")


def decode_latent(payload: str) -> np.ndarray:
    try:
        raw = base64.b64decode(payload, validate=True)
    except ValueError as exc:
        raise BackendProtocolError(f"latent is not base64: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise BackendProtocolError("latent payload shorter than its header")
    c, h, w = _HEADER.unpack_from(raw)
    body = raw[_HEADER.size:]
    if len(body) != 4 * c * h * w:
        raise BackendProtocolError(f"latent body has {len(body)} bytes, header says {c}x{h}x{w}")
    return np.frombuffer(body, dtype="<f4").reshape(c, h, w).astype(np.float32)


def b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def unb64(payload: str) -> bytes:
    try:
        return base64.b64decode(payload, validate=True)
    except ValueError as exc:
        raise BackendProtocolError(f"payload is not base64: {exc}") from exc
