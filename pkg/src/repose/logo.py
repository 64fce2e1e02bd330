"""Logo detection, suppression before diffusion, and re-injection afterwards."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import raster
from .backends import Backends
from .prompts import LOGO_DETECTION_PROMPT, LOGO_SUPPRESSION_NEGATIVE, LOGO_SUPPRESSION_POSITIVE
from .raster import BBox
from .shape_match import ShapeTransform, apply_transform

log = logging.getLogger(__name__)

LOGO_LABELS = ("brand logo", "brand icon")
REQUIRED = ("detect", "segment", "inpaint")


@dataclass
class LogoRecord:
    bbox: BBox
    mask: np.ndarray  # full frame, foreground inside bbox
    patch: np.ndarray  # image cropped to bbox
    label: str

    def __post_init__(self):
        self.mask = raster.as_mask(self.mask)
        if self.patch.shape[:2] != (self.bbox.height, self.bbox.width):
            raise ValueError(f"patch {self.patch.shape[:2]} does not match bbox {self.bbox}")
        outside = self.mask.copy()
        outside[self.bbox.slices()] = False
        if outside.any():
            raise ValueError("logo mask extends beyond its bbox")


def _clip_box(box: BBox, width: int, height: int) -> BBox | None:
    x0, y0 = max(box.x0, 0), max(box.y0, 0)
    x1, y1 = min(box.x1, width), min(box.y1, height)
    if x0 >= x1 or y0 >= y1:
        return None
    return BBox(x0, y0, x1, y1)


def detect_logos(img: np.ndarray, backends: Backends, labels=LOGO_LABELS) -> list[LogoRecord]:
    img = raster.as_rgb(img)
    h, w = img.shape[:2]
    wanted = {label.lower() for label in labels}
    records = []
    for label, box in backends.detect(img, LOGO_DETECTION_PROMPT):
        if label.strip().lower() not in wanted:
            continue
        box = _clip_box(box, w, h)
        if box is None:
            log.warning("logo box for %r lies outside the image; skipped", label)
            continue
        mask = backends.segment(img, box)
        outside = mask.copy()
        outside[box.slices()] = False
        if outside.any():
            log.warning("segmenter mask for %r leaves its bbox %s; record rejected", label, box.as_list())
            continue
        if not mask.any():
            log.warning("segmenter returned an empty mask for %r; record rejected", label)
            continue
        records.append(LogoRecord(box, mask, img[box.slices()].copy(), label))
    return records


def suppression_mask(records: list[LogoRecord], shape: tuple[int, int], radius: int) -> np.ndarray:
    union = np.zeros(shape, dtype=bool)
    for rec in records:
        union |= rec.mask
    return raster.dilate(union, radius)


def scaled_radius(radius_at_512: int, width: int) -> int:
    return int(round(radius_at_512 * width / 512))


def suppress_logos(
    img: np.ndarray,
    records: list[LogoRecord],
    backends: Backends,
    dilate_radius: int = 5,
    seed: int = 0,
) -> np.ndarray:
    """Inpaint the dilated union of logo masks in one backend call.

    ``dilate_radius`` is given at 512 px and scaled to the image width.
    Pixels outside the dilated mask are returned untouched.
    """
    img = raster.as_rgb(img)
    if not records:
        return img.copy()
    mask = suppression_mask(records, img.shape[:2], scaled_radius(dilate_radius, img.shape[1]))
    filled = backends.inpaint(
        img, mask, LOGO_SUPPRESSION_POSITIVE, LOGO_SUPPRESSION_NEGATIVE, params={"seed": seed}
    )
    return np.where(mask[..., None], filled, img)


def rescale_records(records: list[LogoRecord], image: np.ndarray) -> list[LogoRecord]:
    """Re-express records detected on a smaller copy in the frame of ``image``.

    Patches are re-cropped from ``image`` so that the injected logo keeps the
    full resolution.
    """
    image = raster.as_rgb(image)
    h, w = image.shape[:2]
    out = []
    for rec in records:
        if rec.mask.shape == (h, w):
            out.append(rec)
            continue
        factor = w / rec.mask.shape[1]
        box = _clip_box(rec.bbox.scaled(factor), w, h)
        if box is None:
            continue
        mask = raster.resize_mask(rec.mask, w, h)
        inside = np.zeros_like(mask)
        inside[box.slices()] = mask[box.slices()]
        out.append(LogoRecord(box, inside, image[box.slices()].copy(), rec.label))
    return out


def _logo_layer(rec: LogoRecord, shape: tuple[int, int]) -> np.ndarray:
    """Full-frame layer holding the patch, edge-extended outside the bbox."""
    h, w = shape
    ys = np.clip(np.arange(h), rec.bbox.y0, rec.bbox.y1 - 1) - rec.bbox.y0
    xs = np.clip(np.arange(w), rec.bbox.x0, rec.bbox.x1 - 1) - rec.bbox.x0
    return rec.patch[np.ix_(ys, xs)]


def inject_logos(img: np.ndarray, records: list[LogoRecord], transform: ShapeTransform | None = None) -> np.ndarray:
    """Composite each logo back, mapped through ``transform``; detector order."""
    img = raster.as_rgb(img)
    transform = transform or ShapeTransform.identity()
    out = img.copy()
    for rec in records:
        if rec.mask.shape != img.shape[:2]:
            raise ValueError(
                f"logo record frame {rec.mask.shape} differs from image {img.shape[:2]}; rescale it first"
            )
        mask = apply_transform(rec.mask, transform)
        if not mask.any():
            log.warning("logo %r maps entirely outside the frame; skipped", rec.label)
            continue
        layer = apply_transform(_logo_layer(rec, img.shape[:2]), transform)
        out = raster.composite(out, layer, mask.astype(np.float64))
    return out
