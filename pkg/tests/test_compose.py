import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from repose import compose, raster
from repose.raster import Point, RasterError
from conftest import three_strip_mask


def transitions_oracle(row):
    """Walk the row pixel by pixel, background assumed on both sides."""
    xs, prev = [], False
    for x, v in enumerate(list(row) + [False]):
        if bool(v) != prev:
            xs.append(x)
            prev = bool(v)
    return xs


def boundaries_oracle(mask, padding=12):
    h = mask.shape[0]
    y1, y2 = math.floor(0.55 * h), math.floor(0.65 * h)
    r1, r2 = transitions_oracle(mask[y1]), transitions_oracle(mask[y2])
    if len(r1) + len(r2) != 12 or len(r1) != 6:
        return None
    u, v = max(r1[2], r2[2]) + padding, min(r1[3], r2[3]) - padding
    if u >= v:
        return None
    return (Point(r1[2], y1), Point(r1[3], y1), Point(r2[2], y2), Point(r2[3], y2), u, v)


def test_worked_example():
    points = compose.find_boundaries(three_strip_mask())
    assert (points.a, points.b, points.c, points.d) == (Point(200, 281), Point(312, 281),
                                                        Point(200, 332), Point(312, 332))
    assert (points.u_x, points.v_x) == (212, 300)


def test_single_blob_is_default():
    m = np.zeros((512, 512), dtype=bool)
    m[100:450, 100:400] = True
    assert compose.find_boundaries(m) is None


def test_narrow_torso_is_default():
    m = three_strip_mask(torso=(246, 266))
    assert compose.find_boundaries(m) is None


def test_row_transitions_include_borders():
    row = np.array([1, 1, 0, 0, 1, 0, 1], dtype=bool)
    assert compose.row_transitions(row).tolist() == [0, 2, 4, 5, 6, 7]


@settings(max_examples=100, deadline=None)
@given(row=arrays(bool, st.integers(1, 64)))
def test_row_transitions_match_oracle_and_are_even(row):
    got = compose.row_transitions(row).tolist()
    assert got == transitions_oracle(row)
    assert len(got) % 2 == 0


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**16), k=st.integers(-40, 40))
def test_find_boundaries_translation_equivariant(seed, k):
    g = np.random.default_rng(seed)
    m = three_strip_mask(left=(60, 60 + int(g.integers(40, 90))), torso=(200, 200 + int(g.integers(60, 120))),
                         right=(340, 340 + int(g.integers(40, 90))))
    shifted = np.roll(m, k, axis=1)
    p, q = compose.find_boundaries(m), compose.find_boundaries(shifted)
    assert (q.u_x, q.v_x, q.a.x, q.d.x) == (p.u_x + k, p.v_x + k, p.a.x + k, p.d.x + k)


def test_composition_mask_columns():
    points = compose.find_boundaries(three_strip_mask())
    comp = compose.composition_mask(points, 512, 512)
    cols = comp[0]
    assert not cols[212:300].any() and cols[:212].all() and cols[300:].all()
    assert (comp == comp[0]).all()


def test_composition_mask_default_and_full_torso():
    comp = compose.composition_mask(None, 512, 4)
    assert np.flatnonzero(~comp[0])[[0, -1]].tolist() == [153, 357]
    full = compose.BoundaryPoints(Point(0, 0), Point(0, 0), Point(0, 0), Point(0, 0), 0, 512)
    assert not compose.composition_mask(full, 512, 4).any()


def test_parts_composite_identities(rng):
    still = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
    gen = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
    np.testing.assert_array_equal(compose.parts_composite(still, gen, np.zeros((8, 8), bool)), still)
    np.testing.assert_array_equal(compose.parts_composite(still, gen, np.ones((8, 8), bool)), gen)


def test_parts_composite_column_exact():
    still = np.zeros((16, 512, 3), dtype=np.uint8)
    still[..., 0] = 200
    gen = np.zeros((16, 512, 3), dtype=np.uint8)
    gen[..., 2] = 90
    points = compose.find_boundaries(three_strip_mask())
    out = compose.parts_composite(still, gen, compose.composition_mask(points, 512, 16))
    for x in range(512):
        expected = still[:, x] if 212 <= x < 300 else gen[:, x]
        np.testing.assert_array_equal(out[:, x], expected)


def test_parts_composite_shape_mismatch():
    with pytest.raises(RasterError):
        compose.parts_composite(raster.white(8, 8), raster.white(9, 8), np.zeros((8, 8), bool))


def _garment(rng, shift=0):
    img = raster.white(64, 64)
    img[8:56, 8:56] = rng.integers(40, 200, (48, 48, 3))
    region = np.zeros((64, 64), dtype=bool)
    region[8:56, 20:44] = True
    shifted = img.astype(int)
    shifted[8:56, 8:56] += shift
    return img, np.clip(shifted, 0, 255).astype(np.uint8), region


def test_color_realign_identity(rng):
    ref, _, region = _garment(rng)
    np.testing.assert_array_equal(compose.color_realign(ref, ref, region), ref)


def test_color_realign_cancels_shift(rng):
    ref, img, region = _garment(rng, shift=10)
    fg = raster.silhouette(img)
    out = compose.color_realign(img, ref, region, fg)
    assert np.abs(out[region].mean(axis=0) - ref[region].mean(axis=0)).max() <= 0.5
    assert (out[~fg] == 255).all()


def test_color_realign_constant_region_is_shift_only():
    img = np.full((8, 8, 3), 100, dtype=np.uint8)
    ref = np.full((8, 8, 3), 120, dtype=np.uint8)
    out = compose.color_realign(img, ref, np.ones((8, 8), bool))
    assert (out == 120).all()


def test_color_realign_errors():
    with pytest.raises(RasterError):
        compose.color_realign(raster.white(4, 4), raster.white(4, 4), np.zeros((4, 4), bool))
    with pytest.raises(RasterError):
        compose.color_realign(raster.white(4, 4), raster.white(5, 4), np.ones((4, 4), bool))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**16), shift=st.integers(-30, 30))
def test_color_realign_idempotent(seed, shift):
    ref, img, region = _garment(np.random.default_rng(seed), shift)
    once = compose.color_realign(img, ref, region)
    twice = compose.color_realign(once, ref, region)
    assert np.abs(once.astype(int) - twice).max() <= 1
