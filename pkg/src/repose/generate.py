"""Coarse generation and conditioned unsampling orchestration.

Latents are ``float32`` arrays of shape ``(channels, height, width)``; the
engine blends them but never looks at what the channels mean.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image, ImageDraw
from scipy import ndimage

from . import raster
from .backends import Backends, BackendContractError

WORKING_SIZE = 512
COARSE_REQUIRED = ("txt2img",)
UNSAMPLE_REQUIRED = ("encode_latent", "decode_latent", "unsample", "sample")


class GenerateError(ValueError):
    pass


def as_latent(latent) -> np.ndarray:
    arr = np.asarray(latent, dtype=np.float32)
    if arr.ndim != 3:
        raise GenerateError(f"latent must be (channels, height, width), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise GenerateError("latent contains non-finite values")
    return arr


@dataclass
class ConditioningBundle:
    positive_text: str
    negative_text: str
    pose_map: np.ndarray
    canny_map: np.ndarray | None = None
    reference_image: np.ndarray | None = None
    adapter_weight: float = 1.0
    control_weights: dict[str, float] = field(default_factory=lambda: {"openpose": 1.0, "canny": 1.0})
    negative_pose_map: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 <= self.adapter_weight <= 1.0:
            raise GenerateError("adapter_weight must lie in [0, 1]")
        for name, weight in self.control_weights.items():
            if not 0.0 <= weight <= 2.0:
                raise GenerateError(f"control weight {name!r} must lie in [0, 2]")
        shapes = {m.shape for m in self._maps().values()}
        if len(shapes) > 1:
            raise GenerateError(f"conditioning maps differ in size: {sorted(shapes)}")

    def _maps(self) -> dict[str, np.ndarray]:
        maps = {"pose": self.pose_map, "canny": self.canny_map, "negative_pose": self.negative_pose_map}
        return {k: v for k, v in maps.items() if v is not None}

    def control_images(self) -> dict[str, np.ndarray]:
        return self._maps()

    def weight_params(self) -> dict[str, float]:
        return {f"control_{k}": float(v) for k, v in sorted(self.control_weights.items())}


@dataclass(frozen=True)
class SamplerSpec:
    steps: int = 30
    stop_fraction: float = 0.6
    sampler: str = "dpmpp_2m"
    schedule: str = "karras"
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise GenerateError("steps must be >= 1")
        if not 0.0 < self.stop_fraction <= 1.0:
            raise GenerateError("stop_fraction must lie in (0, 1]")

    def with_stop(self, stop_fraction: float) -> "SamplerSpec":
        return SamplerSpec(self.steps, stop_fraction, self.sampler, self.schedule, self.seed)


def edge_map(img: np.ndarray, threshold: float = 64.0) -> np.ndarray:
    """Binary Sobel-magnitude edges rendered as a white-on-black RGB image."""
    gray = raster.as_rgb(img).astype(np.float64).mean(axis=2)
    gx = ndimage.sobel(gray, axis=1, mode="nearest")
    gy = ndimage.sobel(gray, axis=0, mode="nearest")
    edges = np.hypot(gx, gy) > threshold
    return np.repeat((edges * 255).astype(np.uint8)[..., None], 3, axis=2)


# OpenPose-style limb colours (neck, shoulders, upper arms, forearms)
_LIMB_COLOURS = {
    "neck": (0, 0, 255),
    "r_shoulder": (255, 85, 0),
    "l_shoulder": (85, 255, 0),
    "r_upper": (255, 170, 0),
    "l_upper": (0, 255, 85),
    "r_fore": (255, 255, 0),
    "l_fore": (0, 255, 170),
}


def default_pose_map(width: int = WORKING_SIZE, height: int = WORKING_SIZE) -> np.ndarray:
    """Upper-body skeleton with both arms at 45 degrees from the torso, on black."""
    s = width / 512.0
    cx = width / 2.0
    neck = (cx, 0.18 * height)
    r_sh, l_sh = (cx - 70 * s, 0.22 * height), (cx + 70 * s, 0.22 * height)
    arm = 130 * s / np.sqrt(2.0)  # each arm segment, 45 degrees down and out
    r_el, l_el = (r_sh[0] - arm, r_sh[1] + arm), (l_sh[0] + arm, l_sh[1] + arm)
    r_wr, l_wr = (r_el[0] - arm, r_el[1] + arm), (l_el[0] + arm, l_el[1] + arm)
    head = (cx, 0.08 * height)
    limbs = {
        "neck": (head, neck),
        "r_shoulder": (neck, r_sh),
        "l_shoulder": (neck, l_sh),
        "r_upper": (r_sh, r_el),
        "l_upper": (l_sh, l_el),
        "r_fore": (r_el, r_wr),
        "l_fore": (l_el, l_wr),
    }
    canvas = Image.new("RGB", (width, height), (0, 0, 0))
    draw = ImageDraw.Draw(canvas)
    stroke = max(1, int(round(6 * s)))
    for name, (p, q) in limbs.items():
        draw.line([p, q], fill=_LIMB_COLOURS[name], width=stroke)
    r = max(1, int(round(4 * s)))
    for x, y in {pt for seg in limbs.values() for pt in seg}:
        draw.ellipse([x - r, y - r, x + r, y + r], fill=(255, 0, 0))
    return np.asarray(canvas, dtype=np.uint8).copy()


def coarse_generate(
    still_512: np.ndarray,
    target_pose: np.ndarray,
    bundle: ConditioningBundle,
    backends: Backends,
    spec: SamplerSpec | None = None,
) -> np.ndarray:
    """One text-to-image call conditioned on the still-life (adapter) and the target skeleton."""
    still_512 = raster.as_rgb(still_512)
    spec = spec or SamplerSpec()
    h, w = still_512.shape[:2]
    images = {"reference": still_512, "pose": raster.as_rgb(target_pose)}
    if bundle.canny_map is not None:
        images["canny"] = bundle.canny_map
    params = {
        "width": w,
        "height": h,
        "adapter_weight": float(bundle.adapter_weight),
        "seed": spec.seed,
        "steps": spec.steps,
    }
    params.update(bundle.weight_params())
    out = backends.txt2img(images, bundle.positive_text, bundle.negative_text, params)
    if out.shape != still_512.shape:
        raise BackendContractError(f"txt2img returned {out.shape}, expected {still_512.shape}")
    return out


def build_gradient_mask(u_x: int, v_x: int, ramp: int, w: int, h: int) -> np.ndarray:
    """Column-wise mask: 0 on the torso strip, 1 outside, linear ramps of width ``2*ramp``.

    The ramps are centred on ``u_x`` and ``v_x`` (value exactly 0.5 there).
    Column ``x`` is evaluated at the integer coordinate ``x``.
    """
    if ramp < 1:
        raise GenerateError("ramp must be >= 1")
    if not 0 <= u_x < v_x <= w:
        raise GenerateError(f"need 0 <= u_x < v_x <= w, got u_x={u_x} v_x={v_x} w={w}")
    if v_x - u_x < 4 * ramp:
        raise GenerateError(f"ramps overlap: torso strip {v_x - u_x} px < 4 * ramp ({4 * ramp})")
    x = np.arange(w, dtype=np.float64)
    left = np.clip((u_x + ramp - x) / (2 * ramp), 0.0, 1.0)
    right = np.clip((x - (v_x - ramp)) / (2 * ramp), 0.0, 1.0)
    row = np.maximum(left, right)
    return np.broadcast_to(row, (h, w)).copy()


def downsample_mask(mask: np.ndarray, w: int, h: int) -> np.ndarray:
    """Nearest (pixel-centre) downsampling of a gray mask to latent resolution."""
    mask = raster.as_gray(mask)
    ys = np.minimum(((np.arange(h) + 0.5) * mask.shape[0] / h).astype(int), mask.shape[0] - 1)
    xs = np.minimum(((np.arange(w) + 0.5) * mask.shape[1] / w).astype(int), mask.shape[1] - 1)
    return mask[np.ix_(ys, xs)]


def blend_latents(a: np.ndarray, b: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """``mask * b + (1 - mask) * a`` for every channel."""
    a = as_latent(a)
    b = as_latent(b)
    m = raster.as_gray(mask)
    if a.shape != b.shape:
        raise GenerateError(f"latent shapes differ: {a.shape} vs {b.shape}")
    if m.shape != a.shape[1:]:
        raise GenerateError(f"mask {m.shape} does not match latent grid {a.shape[1:]}")
    m = m[None].astype(np.float64)
    out = m * b.astype(np.float64) + (1.0 - m) * a.astype(np.float64)
    return out.astype(np.float32)


def unsample_resample(
    latent: np.ndarray,
    bundle: ConditioningBundle,
    spec: SamplerSpec,
    backends: Backends,
) -> np.ndarray:
    """Add conditioned noise up to ``spec.stop_fraction`` of the schedule, then denoise."""
    latent = as_latent(latent)
    images = bundle.control_images()
    params = {"steps": spec.steps, "stop_fraction": float(spec.stop_fraction), "seed": spec.seed}
    params.update(bundle.weight_params())
    text = {"sampler": spec.sampler, "scheduler": spec.schedule}
    noised = backends.unsample(
        latent, images, bundle.positive_text, bundle.negative_text, params, {**text, "direction": "unsample"}
    )
    out = backends.sample(
        noised, images, bundle.positive_text, bundle.negative_text, params, {**text, "direction": "sample"}
    )
    return as_latent(out)


def seam_fix(
    img: np.ndarray,
    bundle: ConditioningBundle,
    backends: Backends,
    spec: SamplerSpec | None = None,
    stop_fraction: float = 0.25,
) -> np.ndarray:
    """Light unsampling pass over a composited image to even out hard seams."""
    img = raster.as_rgb(img)
    spec = (spec or SamplerSpec()).with_stop(stop_fraction)
    latent = backends.encode_latent(img)
    latent = unsample_resample(latent, bundle, spec, backends)
    return backends.decode_latent(latent, img.shape[1], img.shape[0])
