import numpy as np
import pytest

from repose import preprocess, raster
from repose.config import PreprocessConfig
from test_raster import lanczos3_oracle


def test_white_1024_passes_all_rules():
    report = preprocess.validate_input(raster.white(1024, 1024))
    assert report.ok
    assert [r.name for r in report.rules] == ["resolution", "aspect", "background"]


def test_small_image_fails_resolution_only():
    report = preprocess.validate_input(raster.white(800, 800))
    assert report.failures == ["resolution"]


def test_non_square_fails_aspect():
    report = preprocess.validate_input(raster.white(1200, 1024))
    assert report.failures == ["aspect"]


def test_gray_corners_fail_background():
    img = raster.white(1024, 1024)
    img[:32, :32] = 200
    report = preprocess.validate_input(img)
    assert report.failures == ["background"]
    assert "200.0" in report["background"].detail


def test_noisy_corner_fails_std_rule():
    img = raster.white(1024, 1024)
    noise = np.random.default_rng(0).integers(230, 256, (32, 32, 3))
    img[-32:, -32:] = noise
    assert not preprocess.validate_input(img)["background"].passed


def test_thresholds_follow_config():
    img = raster.white(1024, 1024)
    img[:32, :32] = 240
    assert not preprocess.validate_input(img)["background"].passed
    assert preprocess.validate_input(img, PreprocessConfig(white_mean_min=235))["background"].passed


def test_rules_are_independent():
    img = raster.white(800, 600)
    img[:32, :32] = 0
    assert set(preprocess.validate_input(img).failures) == {"resolution", "aspect", "background"}


def test_working_set_dims():
    ws = preprocess.make_working_set(raster.white(2048, 2048))
    assert ws["img512"].shape == (512, 512, 3)
    assert ws["img1024"].shape == (1024, 1024, 3)


def test_working_set_1024_is_identity(rng):
    img = rng.integers(0, 256, (1024, 1024, 3), dtype=np.uint8)
    np.testing.assert_array_equal(preprocess.make_working_set(img)["img1024"], img)


def test_working_set_lanczos_oracle():
    ys, xs = np.mgrid[0:1500, 0:1500]
    img = np.stack([xs * 255 // 1499, ys * 255 // 1499, (xs + ys) * 255 // 2998], axis=2).astype(np.uint8)
    out = preprocess.make_working_set(img)["img512"].astype(np.float64)
    assert np.abs(out - lanczos3_oracle(img, 512, 512)).max() <= 1.0


@pytest.mark.parametrize("size", [600, 1024, 1300])
def test_working_set_dims_constant(size):
    ws = preprocess.make_working_set(raster.white(size, size))
    assert {k: v.shape for k, v in ws.items()} == {"img512": (512, 512, 3), "img1024": (1024, 1024, 3)}
