"""Synthetic still-life garments for tests and offline demos.

Every part is block-constant on a 16 px grid at 1024 px (8 px at the 512 px
working size), the grid of the mock latent codec. The optional logo is a
fine checkerboard in the middle of the torso.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import raster

SIZE = 1024
GRID = 16
# logo box in the 512 frame; the mock detector is configured with this one box
LOGO_BOX_512 = (232, 176, 280, 224)


@dataclass(frozen=True)
class GarmentSpec:
    torso_half: int  # half torso width, grid cells
    sleeve_cells: int  # sleeve width, grid cells
    gap_cells: int  # gap between sleeve and torso, grid cells
    top: int  # torso top, grid cells
    bottom: int
    sleeve_bottom: int
    body: tuple[int, int, int]
    sleeve: tuple[int, int, int]
    stripe: tuple[int, int, int]
    logo_colours: tuple[tuple[int, int, int], tuple[int, int, int]] = ((250, 20, 20), (20, 20, 120))
    logo: bool = True


def random_spec(rng: np.random.Generator, logo: bool = True) -> GarmentSpec:
    def colour(lo=30, hi=200):
        return tuple(int(v) for v in rng.integers(lo, hi, size=3))

    def offset(base, magnitude):
        # move each channel by +-magnitude, towards the middle of the range
        return tuple(int(v - magnitude if v > 127 else v + magnitude) for v in base)

    body = colour(60, 170)
    # stripes carry most of the torso contrast; the logo is centred on the body colour
    stripe = offset(body, int(rng.integers(50, 70)))
    lo = tuple(max(0, v - 30) for v in body)
    hi = tuple(min(235, v + 30) for v in body)
    return GarmentSpec(
        torso_half=int(rng.integers(8, 12)),
        sleeve_cells=int(rng.integers(4, 7)),
        gap_cells=int(rng.integers(1, 3)),
        top=int(rng.integers(10, 14)),
        bottom=int(rng.integers(52, 58)),
        sleeve_bottom=int(rng.integers(46, 51)),
        body=body,
        sleeve=colour(),
        stripe=stripe,
        logo_colours=(hi, lo),
        logo=logo,
    )


def render(spec: GarmentSpec) -> np.ndarray:
    img = raster.white(SIZE, SIZE)
    c = SIZE // (2 * GRID)  # centre column in cells
    g = GRID
    t0, t1 = (c - spec.torso_half) * g, (c + spec.torso_half) * g
    img[spec.top * g : spec.bottom * g, t0:t1] = spec.body
    # horizontal stripes every fourth row of cells
    for row in range(spec.top + 2, spec.bottom - 1, 4):
        img[row * g : (row + 1) * g, t0:t1] = spec.stripe
    s_top = spec.top + 2
    for side in (-1, 1):
        inner = t0 - spec.gap_cells * g if side < 0 else t1 + spec.gap_cells * g
        outer = inner - spec.sleeve_cells * g if side < 0 else inner + spec.sleeve_cells * g
        x0, x1 = sorted((inner, outer))
        img[s_top * g : spec.sleeve_bottom * g, x0:x1] = spec.sleeve
        # cuff
        img[(spec.sleeve_bottom - 1) * g : spec.sleeve_bottom * g, x0:x1] = spec.stripe
    if spec.logo:
        x0, y0, x1, y1 = (2 * v for v in LOGO_BOX_512)
        yy, xx = np.mgrid[y0:y1, x0:x1]
        checker = ((yy - y0) // 4 + (xx - x0) // 4) % 2 == 0
        a, b = (np.array(c) for c in spec.logo_colours)
        patch = np.where(checker[..., None], a, b)
        img[y0:y1, x0:x1] = patch.astype(np.uint8)
    return img


def fixture_set(n: int = 5, seed: int = 0) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    return {f"garment_{i:02d}": render(random_spec(rng)) for i in range(n)}


def mock_detections() -> list[dict]:
    return [{"label": "brand logo", "box": list(LOGO_BOX_512)}]
