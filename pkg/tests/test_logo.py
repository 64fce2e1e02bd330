import logging

import numpy as np
import pytest

from repose import logo, raster
from repose.backends import Backends, mock_suite
from repose.prompts import LOGO_DETECTION_PROMPT, LOGO_SUPPRESSION_NEGATIVE, LOGO_SUPPRESSION_POSITIVE
from repose.raster import BBox
from repose.shape_match import ShapeTransform


def _garment(size=128):
    img = raster.white(size, size)
    img[20:110, 30:98] = (40, 90, 160)
    img[50:70, 54:74] = (250, 250, 0)  # logo
    return img


def _backends(boxes, **options):
    dets = [{"label": label, "box": list(box)} for label, box in boxes]
    m = mock_suite(detections=dets, **options)
    return m, Backends(m)


def test_detect_filters_labels_and_crops_patch():
    m, be = _backends([("brand logo", (54, 50, 74, 70)), ("pockets", (30, 80, 40, 90)),
                       ("Brand Icon", (30, 20, 40, 30))])
    img = _garment()
    records = logo.detect_logos(img, be)
    assert [r.label for r in records] == ["brand logo", "Brand Icon"]
    np.testing.assert_array_equal(records[0].patch, img[50:70, 54:74])
    assert records[0].mask.sum() == 400
    assert m.calls("segment") == 2
    detect = [e for e in be.transcript if e["kind"] == "detect"][0]
    assert detect["text"]["prompt"] == LOGO_DETECTION_PROMPT


def test_detect_clips_boxes_and_drops_outside():
    _, be = _backends([("brand logo", (120, 120, 200, 200)), ("brand logo", (300, 300, 310, 310))])
    records = logo.detect_logos(_garment(), be)
    assert len(records) == 1 and records[0].bbox == BBox(120, 120, 128, 128)


def test_segmenter_mask_outside_box_rejected(caplog):
    class Leaky:
        capabilities = frozenset({"detect", "segment"})

        def __init__(self):
            self.inner = mock_suite(detections=[{"label": "brand logo", "box": [10, 10, 20, 20]}])

        def call(self, req):
            resp = self.inner.call(req)
            if req.kind == "segment":
                full = np.ones((128, 128), dtype=bool)
                import base64

                resp.images = [base64.b64encode(raster.encode_png(full)).decode()]
            return resp

    with caplog.at_level(logging.WARNING):
        assert logo.detect_logos(_garment(), Backends(Leaky())) == []
    assert "leaves its bbox" in caplog.text


def test_record_validation():
    mask = np.zeros((10, 10), dtype=bool)
    mask[0, 0] = True
    with pytest.raises(ValueError):
        logo.LogoRecord(BBox(2, 2, 4, 4), mask, np.zeros((2, 2, 3), np.uint8), "brand logo")
    with pytest.raises(ValueError):
        logo.LogoRecord(BBox(0, 0, 4, 4), mask, np.zeros((2, 2, 3), np.uint8), "brand logo")


def test_suppress_no_records_makes_no_call():
    m, be = _backends([])
    img = _garment()
    out = logo.suppress_logos(img, [], be)
    np.testing.assert_array_equal(out, img)
    assert m.calls("inpaint") == 0


def test_suppress_inpaints_dilated_union_only():
    m, be = _backends([("brand logo", (54, 50, 74, 70))])
    img = _garment()
    records = logo.detect_logos(img, be)
    out = logo.suppress_logos(img, records, be, dilate_radius=5)
    r = logo.scaled_radius(5, 128)
    region = logo.suppression_mask(records, (128, 128), r)
    assert r == 1
    np.testing.assert_array_equal(out[~region], img[~region])
    assert (out[region] == (40, 90, 160)).all()  # ring mean is the garment colour
    inpaint = [e for e in be.transcript if e["kind"] == "inpaint"][0]
    assert inpaint["text"] == {"positive": LOGO_SUPPRESSION_POSITIVE, "negative": LOGO_SUPPRESSION_NEGATIVE}


@pytest.mark.parametrize("width,expected", [(512, 5), (1024, 10), (256, 2)])
def test_scaled_radius(width, expected):
    assert logo.scaled_radius(5, width) == expected


def test_suppress_then_inject_restores_mask_exactly():
    m, be = _backends([("brand logo", (54, 50, 74, 70)), ("brand icon", (32, 22, 40, 30))])
    img = _garment()
    records = logo.detect_logos(img, be)
    suppressed = logo.suppress_logos(img, records, be)
    assert not np.array_equal(suppressed, img)
    restored = logo.inject_logos(suppressed, records, ShapeTransform.identity())
    union = records[0].mask | records[1].mask
    np.testing.assert_array_equal(restored[union], img[union])


def test_inject_follows_transform():
    _, be = _backends([("brand logo", (54, 50, 74, 70))])
    img = _garment()
    records = logo.detect_logos(img, be)
    shift = ShapeTransform(1.0, 10.0, -5.0)
    out = logo.inject_logos(raster.white(128, 128), records, shift)
    assert (out[45:65, 64:84] == (250, 250, 0)).all()
    assert (out[50:70, 54:64] == 255).all()


def test_inject_outside_frame_skipped(caplog):
    _, be = _backends([("brand logo", (54, 50, 74, 70))])
    records = logo.detect_logos(_garment(), be)
    with caplog.at_level(logging.WARNING):
        out = logo.inject_logos(raster.white(128, 128), records, ShapeTransform(1.0, 500.0, 0.0))
    assert (out == 255).all() and "outside the frame" in caplog.text


def test_inject_requires_matching_frame():
    _, be = _backends([("brand logo", (54, 50, 74, 70))])
    records = logo.detect_logos(_garment(), be)
    with pytest.raises(ValueError, match="rescale"):
        logo.inject_logos(raster.white(256, 256), records)


def test_rescale_records_recrops_from_large_frame():
    _, be = _backends([("brand logo", (54, 50, 74, 70))])
    small = _garment(128)
    big = raster.resize(small, 256, 256, "nearest")
    records = logo.rescale_records(logo.detect_logos(small, be), big)
    assert records[0].bbox == BBox(108, 100, 148, 140)
    np.testing.assert_array_equal(records[0].patch, big[100:140, 108:148])
    assert records[0].mask.sum() == 1600
