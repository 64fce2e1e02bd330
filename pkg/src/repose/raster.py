"""Raster primitives shared by every pipeline stage.

Images are ``uint8`` arrays of shape ``(H, W, 3)``, binary masks are ``bool``
arrays of shape ``(H, W)`` and gray masks are ``float64`` arrays in ``[0, 1]``.
The origin is top-left with ``y`` growing downward. Operations never modify
their inputs.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

FILTERS = {
    "nearest": Image.Resampling.NEAREST,
    "bilinear": Image.Resampling.BILINEAR,
    "bicubic": Image.Resampling.BICUBIC,
    "lanczos3": Image.Resampling.LANCZOS,
}


class RasterError(ValueError):
    pass


@dataclass(frozen=True)
class Point:
    x: int
    y: int


@dataclass(frozen=True)
class BBox:
    """Half-open pixel box ``[x0, x1) x [y0, y1)``."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise RasterError(f"degenerate box {self}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    def slices(self) -> tuple[slice, slice]:
        return slice(self.y0, self.y1), slice(self.x0, self.x1)

    def within(self, width: int, height: int) -> bool:
        return self.x0 >= 0 and self.y0 >= 0 and self.x1 <= width and self.y1 <= height

    def scaled(self, factor: float) -> "BBox":
        return BBox(
            int(np.floor(self.x0 * factor)),
            int(np.floor(self.y0 * factor)),
            int(np.ceil(self.x1 * factor)),
            int(np.ceil(self.y1 * factor)),
        )

    def as_list(self) -> list[int]:
        return [self.x0, self.y0, self.x1, self.y1]


def as_rgb(img) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise RasterError(f"expected uint8 (H, W, 3) image, got {arr.dtype} {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise RasterError("image must be at least 1x1")
    return arr


def as_mask(mask) -> np.ndarray:
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise RasterError(f"expected (H, W) mask, got shape {arr.shape}")
    if arr.dtype != np.bool_:
        if not np.isin(arr, (0, 1)).all():
            raise RasterError("binary mask values must be 0 or 1")
        arr = arr.astype(bool)
    return arr


def as_gray(mask) -> np.ndarray:
    arr = np.asarray(mask, dtype=np.float64)
    if arr.ndim != 2:
        raise RasterError(f"expected (H, W) gray mask, got shape {arr.shape}")
    if not np.isfinite(arr).all() or arr.min(initial=0.0) < 0.0 or arr.max(initial=0.0) > 1.0:
        raise RasterError("gray mask values must lie in [0, 1]")
    return arr


def white(width: int, height: int) -> np.ndarray:
    return np.full((height, width, 3), 255, dtype=np.uint8)


def resize(img: np.ndarray, w: int, h: int, filter: str = "lanczos3") -> np.ndarray:
    img = as_rgb(img)
    if w < 1 or h < 1:
        raise RasterError(f"target size must be positive, got {w}x{h}")
    if filter not in FILTERS:
        raise RasterError(f"unknown filter {filter!r}")
    if img.shape[1] == w and img.shape[0] == h:
        return img.copy()
    out = Image.fromarray(img, mode="RGB").resize((w, h), FILTERS[filter])
    return np.asarray(out, dtype=np.uint8).copy()


def resize_mask(mask: np.ndarray, w: int, h: int) -> np.ndarray:
    """Nearest-neighbour resize, so the result stays binary."""
    mask = as_mask(mask)
    if w < 1 or h < 1:
        raise RasterError(f"target size must be positive, got {w}x{h}")
    if mask.shape == (h, w):
        return mask.copy()
    # pixel-centre sampling: dst x samples src floor((x + 0.5) * sx)
    ys = np.minimum(((np.arange(h) + 0.5) * mask.shape[0] / h).astype(int), mask.shape[0] - 1)
    xs = np.minimum(((np.arange(w) + 0.5) * mask.shape[1] / w).astype(int), mask.shape[1] - 1)
    return mask[np.ix_(ys, xs)]


def dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """Square (Chebyshev) dilation; pixels beyond the border count as background."""
    mask = as_mask(mask)
    if radius < 0:
        raise RasterError("radius must be >= 0")
    if radius == 0 or not mask.any():
        return mask.copy()
    size = 2 * radius + 1
    return ndimage.maximum_filter(mask, size=size, mode="constant", cval=False)


def bbox_of(mask: np.ndarray) -> BBox | None:
    mask = as_mask(mask)
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    return BBox(int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1)


def silhouette(img: np.ndarray, threshold: int = 240) -> np.ndarray:
    """Garment mask on a white background: any channel below ``threshold``, holes filled."""
    img = as_rgb(img)
    return ndimage.binary_fill_holes((img < threshold).any(axis=2))


def round_half_up(values: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def composite(base: np.ndarray, overlay: np.ndarray, mask) -> np.ndarray:
    """``mask * overlay + (1 - mask) * base`` per channel, rounded half up."""
    base = as_rgb(base)
    overlay = as_rgb(overlay)
    alpha = as_gray(mask)
    if base.shape != overlay.shape or base.shape[:2] != alpha.shape:
        raise RasterError(
            f"dimension mismatch: base {base.shape}, overlay {overlay.shape}, mask {alpha.shape}"
        )
    a = alpha[..., None]
    out = a * overlay.astype(np.float64) + (1.0 - a) * base.astype(np.float64)
    return round_half_up(out)


# --- PNG I/O -----------------------------------------------------------------

def read_image(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode in ("RGBA", "LA", "PA") or "transparency" in im.info:
            raise RasterError(f"{path}: alpha-channel inputs are not supported")
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def write_image(path: str | Path, img: np.ndarray) -> None:
    Image.fromarray(as_rgb(img), mode="RGB").save(path, format="PNG")


def read_mask(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L")) >= 128


def write_mask(path: str | Path, mask: np.ndarray) -> None:
    Image.fromarray(as_mask(mask).astype(np.uint8) * 255, mode="L").save(path, format="PNG")


def encode_png(arr: np.ndarray) -> bytes:
    """PNG bytes for an RGB image or a binary mask (written as 0/255 gray)."""
    buf = io.BytesIO()
    if arr.ndim == 2:
        Image.fromarray(as_mask(arr).astype(np.uint8) * 255, mode="L").save(buf, format="PNG")
    else:
        Image.fromarray(as_rgb(arr), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes, mask: bool = False) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        if mask:
            return np.asarray(im.convert("L")) >= 128
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()
