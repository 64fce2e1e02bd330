"""Deterministic in-process stand-ins for every backend capability.

Each mock is chosen so that a pipeline property can be asserted exactly:

* ``txt2img`` returns the reference image (or the pose map), optionally with
  the garment pixels shifted by ``coarse_shift``;
* ``inpaint`` fills the mask with the per-channel mean of a 2 px ring around it;
* ``unsample`` adds seeded Gaussian noise and ``sample`` subtracts the same noise
  (plus an optional constant ``sample_bias`` on garment cells);
* ``encode_latent`` / ``decode_latent`` are block average-pooling and
  nearest-neighbour unpooling (exact inverses on block-constant images);
* ``upscale`` is bicubic resampling;
* ``perceptual`` is ``0.5 * mean|a - b| / 255``.

Requests go through the same wire encoding as the HTTP client, so a run
against the mock exercises serialization as well.
"""
from __future__ import annotations

import json
import threading

import numpy as np
from PIL import Image

from .. import raster
from .protocol import (
    KINDS,
    BackendRequest,
    BackendResponse,
    b64,
    decode_latent,
    encode_latent,
    unb64,
)

DEFAULT_CAPTION = (
    "The image shows a long-sleeve crew-neck sweater in a solid color, laid flat on a plain "
    "white background, with ribbed cuffs and hem and sleeves resting alongside the torso."
)


# latent value of pixel intensity 240 under the mock codec
GARMENT_LATENT_MAX = 240 / 127.5 - 1.0


def _image(payload: str) -> np.ndarray:
    return raster.decode_png(unb64(payload))


def _mask(payload: str) -> np.ndarray:
    return raster.decode_png(unb64(payload), mask=True)


def _png(arr: np.ndarray) -> str:
    return b64(raster.encode_png(arr))


def garment_pixels(img: np.ndarray, threshold: int = 240) -> np.ndarray:
    return (img < threshold).any(axis=2)


def ring_mean_fill(img: np.ndarray, mask: np.ndarray, ring: int = 2) -> np.ndarray:
    """Replace masked pixels by the mean colour of the ``ring``-px band around the mask."""
    out = img.copy()
    if not mask.any():
        return out
    band = raster.dilate(mask, ring) & ~mask
    if band.any():
        fill = raster.round_half_up(img[band].astype(np.float64).mean(axis=0))
    else:
        fill = np.full(3, 255, dtype=np.uint8)
    out[mask] = fill
    return out


class MockBackend:
    def __init__(
        self,
        seed: int = 0,
        detections: list[dict] | None = None,
        caption: str | None = None,
        classify_label: str = "long_sleeve",
        llm_reply: str = "True",
        txt2img_source: str = "reference",
        coarse_shift: int = 0,
        latent_factor: int = 8,
        noise_scale: float = 1.0,
        sample_bias: float = 0.0,
        capabilities=None,
    ):
        self.seed = seed
        self.detections = list(detections or [])
        self.caption_text = caption or DEFAULT_CAPTION
        self.classify_label = classify_label
        self.llm_reply = llm_reply
        self.txt2img_source = txt2img_source
        self.coarse_shift = coarse_shift
        self.latent_factor = latent_factor
        self.noise_scale = noise_scale
        self.sample_bias = sample_bias
        self.capabilities = frozenset(KINDS if capabilities is None else capabilities)
        self.transcript: list[dict] = []
        self._lock = threading.Lock()

    def calls(self, kind: str | None = None) -> int:
        with self._lock:
            return sum(1 for e in self.transcript if kind is None or e["kind"] == kind)

    def call(self, req: BackendRequest) -> BackendResponse:
        # round-trip through JSON like a remote server would
        req = BackendRequest.from_json(req.to_json())
        if req.kind not in self.capabilities:
            resp = BackendResponse(request_id=req.request_id, error=f"capability {req.kind} disabled")
        else:
            try:
                resp = getattr(self, f"_do_{req.kind}")(req)
            except (KeyError, IndexError, ValueError) as exc:
                resp = BackendResponse(request_id=req.request_id, error=f"{req.kind}: bad request ({exc!r})")
            resp.request_id = req.request_id
        with self._lock:
            self.transcript.append({"kind": req.kind, "request_id": req.request_id})
        return BackendResponse.from_json(resp.to_json())

    # -- handlers -------------------------------------------------------------

    def _do_classify(self, req):
        return BackendResponse(req.request_id, text={"label": self.classify_label})

    def _do_caption(self, req):
        return BackendResponse(req.request_id, text={"caption": self.caption_text})

    def _do_llm(self, req):
        return BackendResponse(req.request_id, text={"reply": self.llm_reply})

    def _do_detect(self, req):
        found = [{"label": d["label"], "box": list(d["box"])} for d in self.detections]
        return BackendResponse(req.request_id, text={"detections": json.dumps(found)})

    def _do_segment(self, req):
        img = _image(req.images[0])
        p = req.params
        mask = np.zeros(img.shape[:2], dtype=bool)
        mask[int(p["y0"]):int(p["y1"]), int(p["x0"]):int(p["x1"])] = True
        return BackendResponse(req.request_id, images=[_png(mask)])

    def _do_inpaint(self, req):
        img = _image(req.images[0])
        mask = _mask(req.masks[0])
        return BackendResponse(req.request_id, images=[_png(ring_mean_fill(img, mask))])

    def _do_txt2img(self, req):
        roles = req.text.get("image_roles", "").split(",")
        images = dict(zip(roles, req.images))
        source = self.txt2img_source if self.txt2img_source in images else "reference"
        out = _image(images[source])
        w, h = int(req.params["width"]), int(req.params["height"])
        if out.shape[:2] != (h, w):
            out = raster.resize(out, w, h)
        if self.coarse_shift:
            garment = garment_pixels(out)
            shifted = np.clip(out.astype(np.int16) + self.coarse_shift, 0, 255).astype(np.uint8)
            out = np.where(garment[..., None], shifted, out)
        return BackendResponse(req.request_id, images=[_png(out)])

    def _noise(self, shape, seed) -> np.ndarray:
        rng = np.random.default_rng([self.seed, int(seed)])
        return self.noise_scale * rng.standard_normal(shape)

    def _do_unsample(self, req):
        latent = decode_latent(req.text["latent"])
        noise = self._noise(latent.shape, req.params.get("seed", 0))
        out = (latent.astype(np.float64) + noise).astype(np.float32)
        return BackendResponse(req.request_id, latents=[encode_latent(out)])

    def _do_sample(self, req):
        latent = decode_latent(req.text["latent"])
        noise = self._noise(latent.shape, req.params.get("seed", 0))
        out = latent.astype(np.float64) - noise
        if self.sample_bias:
            # tone drift on garment cells only, like a sampler that slightly recolours the cloth
            garment = (out < GARMENT_LATENT_MAX).any(axis=0)
            out += self.sample_bias * garment[None]
        return BackendResponse(req.request_id, latents=[encode_latent(out.astype(np.float32))])

    def _do_encode_latent(self, req):
        img = _image(req.images[0]).astype(np.float64)
        f = self.latent_factor
        h, w = img.shape[0] // f, img.shape[1] // f
        pooled = img[: h * f, : w * f].reshape(h, f, w, f, 3).mean(axis=(1, 3))
        latent = (pooled / 127.5 - 1.0).transpose(2, 0, 1).astype(np.float32)
        return BackendResponse(req.request_id, latents=[encode_latent(latent)])

    def _do_decode_latent(self, req):
        latent = decode_latent(req.text["latent"]).astype(np.float64)
        f = self.latent_factor
        px = raster.round_half_up((latent + 1.0) * 127.5).transpose(1, 2, 0)
        out = np.repeat(np.repeat(px, f, axis=0), f, axis=1)
        return BackendResponse(req.request_id, images=[_png(out)])

    def _do_upscale(self, req):
        img = _image(req.images[0])
        factor = int(req.params.get("scale", 4))
        up = Image.fromarray(img).resize(
            (img.shape[1] * factor, img.shape[0] * factor), Image.Resampling.BICUBIC
        )
        return BackendResponse(req.request_id, images=[_png(np.asarray(up))])

    def _do_perceptual(self, req):
        a = _image(req.images[0]).astype(np.float64)
        b = _image(req.images[1]).astype(np.float64)
        return BackendResponse(req.request_id, scalars=[0.5 * float(np.abs(a - b).mean()) / 255.0])


def mock_suite(seed: int = 0, **options) -> MockBackend:
    return MockBackend(seed=seed, **options)
