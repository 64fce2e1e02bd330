"""Scale/offset alignment of two garment silhouettes from a torso band."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import raster


class ShapeMatchError(ValueError):
    pass


@dataclass(frozen=True)
class ShapeTransform:
    """``p' = c + scale * (p - c) + offset`` with ``c`` the canvas centre.

    Coordinates are continuous: pixel ``(i, j)`` covers ``[j, j+1) x [i, i+1)``.
    """

    scale: float = 1.0
    offset_x: float = 0.0
    offset_y: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ShapeMatchError(f"scale must be finite and positive, got {self.scale}")
        if not (math.isfinite(self.offset_x) and math.isfinite(self.offset_y)):
            raise ShapeMatchError("offsets must be finite")

    @classmethod
    def identity(cls) -> "ShapeTransform":
        return cls()

    @property
    def is_identity(self) -> bool:
        return self.scale == 1.0 and self.offset_x == 0.0 and self.offset_y == 0.0

    def inverse(self) -> "ShapeTransform":
        return ShapeTransform(1.0 / self.scale, -self.offset_x / self.scale, -self.offset_y / self.scale)

    def rescaled(self, factor: float) -> "ShapeTransform":
        """The same map expressed on a canvas ``factor`` times larger."""
        return ShapeTransform(self.scale, self.offset_x * factor, self.offset_y * factor)

    def map_point(self, x: float, y: float, width: int, height: int) -> tuple[float, float]:
        cx, cy = width / 2.0, height / 2.0
        return cx + self.scale * (x - cx) + self.offset_x, cy + self.scale * (y - cy) + self.offset_y

    def to_dict(self) -> dict:
        return {"scale": self.scale, "offset_x": self.offset_x, "offset_y": self.offset_y}


@dataclass(frozen=True)
class Band:
    top: int
    bottom: int
    centroid_x: float  # continuous, of the whole foreground
    x0: int
    x1: int

    @property
    def height(self) -> int:
        return self.bottom - self.top


def torso_band(mask: np.ndarray, band_width: int = 30) -> Band:
    mask = raster.as_mask(mask)
    if band_width < 1:
        raise ShapeMatchError("band_width must be >= 1")
    xs = np.nonzero(mask)[1]
    if xs.size == 0:
        raise ShapeMatchError("empty mask")
    mean_col = float(xs.mean())
    w = mask.shape[1]
    b = min(band_width, w)
    x0 = int(round(mean_col - (b - 1) / 2.0))
    x0 = min(max(x0, 0), w - b)
    box = raster.bbox_of(mask[:, x0:x0 + b])
    if box is None:
        raise ShapeMatchError("torso band contains no foreground")
    return Band(box.y0, box.y1, mean_col + 0.5, x0, x0 + b)


def band_height(mask: np.ndarray, band_width: int = 30) -> int:
    return torso_band(mask, band_width).height


def compute_transform(source_mask: np.ndarray, target_mask: np.ndarray, band_width: int = 30) -> ShapeTransform:
    """Transform that carries ``target_mask`` onto ``source_mask``.

    Scale is the ratio of torso-band heights; the band tops (shoulder line)
    are aligned vertically and the foreground centroids horizontally.
    """
    src = torso_band(source_mask, band_width)
    tgt = torso_band(target_mask, band_width)
    if src.height == 0 or tgt.height == 0:
        raise ShapeMatchError("zero band height")
    s = src.height / tgt.height
    h, w = np.asarray(target_mask).shape
    cx, cy = w / 2.0, h / 2.0
    offset_y = src.top - (cy + s * (tgt.top - cy))
    offset_x = src.centroid_x - (cx + s * (tgt.centroid_x - cx))
    return ShapeTransform(s, offset_x, offset_y)


def _source_coords(t: ShapeTransform, n_out: int, n_in: int, offset: float) -> np.ndarray:
    """Source index coordinate for each output index along one axis."""
    c_out, c_in = n_out / 2.0, n_in / 2.0
    centres = np.arange(n_out, dtype=np.float64) + 0.5
    return c_in + (centres - c_out - offset) / t.scale - 0.5


def apply_transform(arr: np.ndarray, t: ShapeTransform, canvas: tuple[int, int] | None = None) -> np.ndarray:
    """Resample an image (bilinear, white fill) or a mask (nearest, 0 fill) through ``t``.

    ``canvas`` is ``(width, height)``; defaults to the input size.
    """
    arr = np.asarray(arr)
    is_mask = arr.ndim == 2
    arr = raster.as_mask(arr) if is_mask else raster.as_rgb(arr)
    h_in, w_in = arr.shape[:2]
    w_out, h_out = canvas or (w_in, h_in)
    if t.is_identity and (w_out, h_out) == (w_in, h_in):
        return arr.copy()

    sx = _source_coords(t, w_out, w_in, t.offset_x)
    sy = _source_coords(t, h_out, h_in, t.offset_y)

    if is_mask:
        ix = np.floor(sx + 0.5).astype(np.int64)
        iy = np.floor(sy + 0.5).astype(np.int64)
        vx = (ix >= 0) & (ix < w_in)
        vy = (iy >= 0) & (iy < h_in)
        out = arr[np.ix_(np.clip(iy, 0, h_in - 1), np.clip(ix, 0, w_in - 1))]
        return out & vy[:, None] & vx[None, :]

    # one white pixel of padding so samples near and beyond the edge fade to white
    padded = np.pad(arr.astype(np.float64), ((1, 1), (1, 1), (0, 0)), constant_values=255.0)
    px, py = sx + 1.0, sy + 1.0
    fx0 = np.floor(px)
    fy0 = np.floor(py)
    fx = (px - fx0)[None, :, None]
    fy = (py - fy0)[:, None, None]
    # clipping lands out-of-frame taps on the white padding
    x0 = np.clip(fx0.astype(np.int64), 0, w_in + 1)
    y0 = np.clip(fy0.astype(np.int64), 0, h_in + 1)
    x1 = np.clip(fx0.astype(np.int64) + 1, 0, w_in + 1)
    y1 = np.clip(fy0.astype(np.int64) + 1, 0, h_in + 1)
    top = padded[y0][:, x0] * (1 - fx) + padded[y0][:, x1] * fx
    bottom = padded[y1][:, x0] * (1 - fx) + padded[y1][:, x1] * fx
    out = top * (1 - fy) + bottom * fy
    return raster.round_half_up(out)
