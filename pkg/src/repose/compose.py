"""Torso/sleeve boundary search, composition mask, parts merge and colour realignment."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import raster
from .raster import Point

ROW_FRACS = (0.55, 0.65)
DEFAULT_FRACS = (0.30, 0.70)
PADDING = 12
TRANSITIONS_PER_ROW = 6


@dataclass(frozen=True)
class BoundaryPoints:
    a: Point  # A', left torso edge on the upper scan row
    b: Point  # B', right torso edge on the upper scan row
    c: Point  # C', left torso edge on the lower scan row
    d: Point  # D', right torso edge on the lower scan row
    u_x: int
    v_x: int


def row_transitions(row: np.ndarray) -> np.ndarray:
    """x positions where a mask row changes value, background assumed beyond both ends.

    A transition is reported at the first pixel carrying the new value, so a
    run of foreground ``[x0, x1)`` contributes ``x0`` and ``x1``.
    """
    padded = np.concatenate(([False], np.asarray(row, dtype=bool), [False]))
    return np.flatnonzero(padded[1:] != padded[:-1])


def scan_rows(height: int, row_fracs=ROW_FRACS) -> tuple[int, int]:
    return tuple(min(int(math.floor(f * height)), height - 1) for f in row_fracs)


def find_boundaries(mask: np.ndarray, padding: int = PADDING, row_fracs=ROW_FRACS) -> BoundaryPoints | None:
    """Locate the vertical torso boundaries ``u`` and ``v`` on a garment mask.

    Two horizontal lines are scanned; each must cross the mask boundary
    exactly six times (sleeve, torso, sleeve), twelve in total. The middle
    crossings of each line are the torso edges. ``u`` and ``v`` are then
    moved ``padding`` pixels towards the centre. Returns ``None`` when the
    crossing count is wrong or the padded torso strip is empty; callers fall
    back to the default composition mask.
    """
    mask = raster.as_mask(mask)
    h = mask.shape[0]
    y1, y2 = scan_rows(h, row_fracs)
    t1 = row_transitions(mask[y1])
    t2 = row_transitions(mask[y2])
    if len(t1) != TRANSITIONS_PER_ROW or len(t2) != TRANSITIONS_PER_ROW:
        return None
    a, b = Point(int(t1[2]), y1), Point(int(t1[3]), y1)
    c, d = Point(int(t2[2]), y2), Point(int(t2[3]), y2)
    u_x = max(a.x, c.x) + padding
    v_x = min(b.x, d.x) - padding
    if u_x >= v_x:
        return None
    return BoundaryPoints(a, b, c, d, u_x, v_x)


def boundary_columns(points: BoundaryPoints | None, width: int, default_fracs=DEFAULT_FRACS) -> tuple[int, int]:
    if points is None:
        return int(math.floor(default_fracs[0] * width)), int(math.floor(default_fracs[1] * width))
    return points.u_x, points.v_x


def composition_mask(points: BoundaryPoints | None, w: int, h: int, default_fracs=DEFAULT_FRACS) -> np.ndarray:
    """1 where the generated sleeves are taken, 0 on the still-life torso strip ``[u, v)``."""
    u_x, v_x = boundary_columns(points, w, default_fracs)
    cols = np.arange(w)
    row = (cols < u_x) | (cols >= v_x)
    return np.broadcast_to(row, (h, w)).copy()


def parts_composite(still: np.ndarray, generated: np.ndarray, comp: np.ndarray) -> np.ndarray:
    comp = raster.as_mask(comp)
    return raster.composite(still, generated, comp.astype(np.float64))


def color_realign(
    img: np.ndarray,
    reference: np.ndarray,
    region: np.ndarray,
    foreground: np.ndarray | None = None,
    min_std: float = 1e-3,
) -> np.ndarray:
    """Match per-channel mean and std of ``img`` to ``reference`` inside ``region``.

    The affine map estimated on ``region`` is applied to ``foreground``
    (the whole frame when omitted); everything else is left as is.
    """
    img = raster.as_rgb(img)
    reference = raster.as_rgb(reference)
    region = raster.as_mask(region)
    if img.shape != reference.shape or img.shape[:2] != region.shape:
        raise raster.RasterError("color_realign: dimension mismatch")
    if not region.any():
        raise raster.RasterError("color_realign: empty statistics region")
    fg = np.ones(region.shape, dtype=bool) if foreground is None else raster.as_mask(foreground)

    src = img[region].astype(np.float64)
    ref = reference[region].astype(np.float64)
    mu_img, mu_ref = src.mean(axis=0), ref.mean(axis=0)
    sd_img, sd_ref = src.std(axis=0), ref.std(axis=0)
    gain = np.where(sd_img < min_std, 1.0, sd_ref / np.maximum(sd_img, min_std))

    mapped = (img.astype(np.float64) - mu_img) * gain + mu_ref
    out = img.copy()
    out[fg] = raster.round_half_up(mapped[fg])
    return out
