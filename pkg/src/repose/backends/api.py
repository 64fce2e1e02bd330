"""Typed facade over a backend transport.

Pipeline code calls methods such as :meth:`Backends.caption` with numpy
rasters; this class builds the :class:`BackendRequest`, hands it to the
transport (HTTP client or mock suite) and decodes and checks the response.
"""
from __future__ import annotations

import itertools
import json
import threading
import uuid
from typing import Callable, Iterable, Protocol

import numpy as np

from .. import raster
from ..raster import BBox
from .protocol import (
    BackendContractError,
    BackendProtocolError,
    BackendRemoteError,
    BackendRequest,
    BackendResponse,
    CapabilityError,
    b64,
    decode_latent,
    encode_latent,
    unb64,
)


class Transport(Protocol):
    capabilities: frozenset[str]

    def call(self, req: BackendRequest) -> BackendResponse: ...


def seeded_ids(namespace: str) -> Callable[[], str]:
    """Deterministic request ids ``uuid5(namespace, n)`` for n = 0, 1, ..."""
    ns = uuid.uuid5(uuid.NAMESPACE_URL, f"repose:{namespace}")
    counter = itertools.count()
    lock = threading.Lock()

    def next_id() -> str:
        with lock:
            n = next(counter)
        return str(uuid.uuid5(ns, str(n)))

    return next_id


def _random_id() -> str:
    return str(uuid.uuid4())


def _img(arr: np.ndarray) -> str:
    return b64(raster.encode_png(arr))


class Backends:
    def __init__(
        self,
        transport: Transport,
        models: dict[str, str] | None = None,
        id_factory: Callable[[], str] | None = None,
    ):
        self.transport = transport
        self.models = dict(models or {})
        self._next_id = id_factory or _random_id
        self.transcript: list[dict] = []
        self._lock = threading.Lock()

    @property
    def capabilities(self) -> frozenset[str]:
        return frozenset(self.transport.capabilities)

    def has(self, kind: str) -> bool:
        return kind in self.capabilities

    def require(self, kinds: Iterable[str]) -> None:
        missing = sorted(set(kinds) - self.capabilities)
        if missing:
            raise CapabilityError(f"backend lacks required capabilities: {missing}")

    def fork(self, id_factory: Callable[[], str]) -> "Backends":
        """Same transport, fresh transcript and id sequence (one per image run)."""
        return Backends(self.transport, self.models, id_factory)

    # -- plumbing -------------------------------------------------------------

    def _call(self, kind, images=(), masks=(), text=None, params=None) -> BackendResponse:
        if kind not in self.capabilities:
            raise CapabilityError(f"capability {kind!r} is not available")
        text = dict(text or {})
        if kind in self.models:
            text.setdefault("model", self.models[kind])
        req = BackendRequest(
            kind=kind,
            request_id=self._next_id(),
            images=list(images),
            masks=list(masks),
            text=text,
            params=dict(params or {}),
        )
        resp = self.transport.call(req)
        if resp.request_id != req.request_id:
            raise BackendProtocolError(
                f"{kind}: response id {resp.request_id!r} does not match {req.request_id!r}"
            )
        if resp.error:
            raise BackendRemoteError(f"{kind}: {resp.error}")
        with self._lock:
            self.transcript.append({"kind": kind, "request_id": req.request_id, "text": req.text, "params": req.params})
        return resp

    @staticmethod
    def _one_image(resp: BackendResponse, kind: str, mask: bool = False) -> np.ndarray:
        if len(resp.images) != 1:
            raise BackendContractError(f"{kind}: expected 1 image, got {len(resp.images)}")
        try:
            return raster.decode_png(unb64(resp.images[0]), mask=mask)
        except BackendProtocolError:
            raise
        except Exception as exc:
            raise BackendProtocolError(f"{kind}: undecodable image: {exc}") from exc

    @staticmethod
    def _one_latent(resp: BackendResponse, kind: str) -> np.ndarray:
        if len(resp.latents) != 1:
            raise BackendContractError(f"{kind}: expected 1 latent, got {len(resp.latents)}")
        return decode_latent(resp.latents[0])

    @staticmethod
    def _text(resp: BackendResponse, kind: str, key: str) -> str:
        if key not in resp.text:
            raise BackendContractError(f"{kind}: response lacks text[{key!r}]")
        return resp.text[key]

    @staticmethod
    def _check_dims(kind: str, arr: np.ndarray, width: int, height: int) -> None:
        if arr.shape[1] != width or arr.shape[0] != height:
            raise BackendContractError(
                f"{kind}: expected {width}x{height} output, got {arr.shape[1]}x{arr.shape[0]}"
            )

    # -- capabilities ---------------------------------------------------------

    def classify(self, img: np.ndarray) -> str:
        resp = self._call("classify", images=[_img(img)])
        return self._text(resp, "classify", "label")

    def caption(self, img: np.ndarray) -> str:
        resp = self._call("caption", images=[_img(img)])
        return self._text(resp, "caption", "caption")

    def llm(self, context: str, prompt: str) -> str:
        resp = self._call("llm", text={"context": context, "prompt": prompt})
        return self._text(resp, "llm", "reply")

    def detect(self, img: np.ndarray, prompt: str) -> list[tuple[str, BBox]]:
        resp = self._call("detect", images=[_img(img)], text={"prompt": prompt})
        try:
            items = json.loads(self._text(resp, "detect", "detections"))
            out = []
            for item in items:
                x0, y0, x1, y1 = (int(round(v)) for v in item["box"])
                out.append((str(item["label"]), BBox(x0, y0, x1, y1)))
        except (ValueError, KeyError, TypeError) as exc:
            raise BackendProtocolError(f"detect: bad detections payload: {exc}") from exc
        return out

    def segment(self, img: np.ndarray, box: BBox) -> np.ndarray:
        resp = self._call(
            "segment",
            images=[_img(img)],
            params={"x0": box.x0, "y0": box.y0, "x1": box.x1, "y1": box.y1},
        )
        mask = self._one_image(resp, "segment", mask=True)
        self._check_dims("segment", mask, img.shape[1], img.shape[0])
        return mask

    def inpaint(self, img: np.ndarray, mask: np.ndarray, positive: str, negative: str, params=None) -> np.ndarray:
        resp = self._call(
            "inpaint",
            images=[_img(img)],
            masks=[_img(mask)],
            text={"positive": positive, "negative": negative},
            params=params,
        )
        out = self._one_image(resp, "inpaint")
        self._check_dims("inpaint", out, img.shape[1], img.shape[0])
        return out

    def txt2img(self, images: dict[str, np.ndarray], positive: str, negative: str, params: dict) -> np.ndarray:
        resp = self._call(
            "txt2img",
            images=[_img(v) for v in images.values()],
            text={"positive": positive, "negative": negative, "image_roles": ",".join(images)},
            params=params,
        )
        out = self._one_image(resp, "txt2img")
        self._check_dims("txt2img", out, int(params["width"]), int(params["height"]))
        return out

    def _latent_pass(self, kind, latent, images, positive, negative, params, text) -> np.ndarray:
        body = {"latent": encode_latent(latent), "positive": positive, "negative": negative,
                "image_roles": ",".join(images)}
        body.update(text)
        resp = self._call(kind, images=[_img(v) for v in images.values()], text=body, params=params)
        out = self._one_latent(resp, kind)
        if out.shape != latent.shape:
            raise BackendContractError(f"{kind}: latent shape drifted {latent.shape} -> {out.shape}")
        return out

    def unsample(self, latent, images, positive, negative, params, text) -> np.ndarray:
        return self._latent_pass("unsample", latent, images, positive, negative, params, text)

    def sample(self, latent, images, positive, negative, params, text) -> np.ndarray:
        return self._latent_pass("sample", latent, images, positive, negative, params, text)

    def encode_latent(self, img: np.ndarray) -> np.ndarray:
        resp = self._call("encode_latent", images=[_img(img)])
        return self._one_latent(resp, "encode_latent")

    def decode_latent(self, latent: np.ndarray, width: int | None = None, height: int | None = None) -> np.ndarray:
        resp = self._call("decode_latent", text={"latent": encode_latent(latent)})
        out = self._one_image(resp, "decode_latent")
        if width is not None and height is not None:
            self._check_dims("decode_latent", out, width, height)
        return out

    def upscale(self, img: np.ndarray, factor: int = 4) -> np.ndarray:
        resp = self._call("upscale", images=[_img(img)], params={"scale": factor})
        out = self._one_image(resp, "upscale")
        self._check_dims("upscale", out, img.shape[1] * factor, img.shape[0] * factor)
        return out

    def perceptual(self, a: np.ndarray, b: np.ndarray) -> float:
        resp = self._call("perceptual", images=[_img(a), _img(b)])
        if len(resp.scalars) != 1:
            raise BackendContractError(f"perceptual: expected 1 scalar, got {len(resp.scalars)}")
        return float(resp.scalars[0])
