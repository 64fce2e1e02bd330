import json
from pathlib import Path

import numpy as np
import pytest

from repose import raster, synth
from repose.backends import Backends, mock_suite, seeded_ids

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def mock():
    return mock_suite(seed=0, detections=synth.mock_detections())


@pytest.fixture
def backends(mock):
    return Backends(mock, id_factory=seeded_ids("tests"))


@pytest.fixture(scope="session")
def fixture_images():
    return {p.stem: raster.read_image(p) for p in sorted(FIXTURES.glob("garment_*.png"))}


@pytest.fixture(scope="session")
def fixture_mock_config():
    return json.loads((FIXTURES / "mock_config.json").read_text())


@pytest.fixture
def garment512():
    return raster.resize(synth.render(synth.random_spec(np.random.default_rng(3))), 512, 512)


def three_strip_mask(w=512, h=512, rows=(200, 400), left=(50, 150), torso=(200, 312), right=(362, 462)):
    mask = np.zeros((h, w), dtype=bool)
    for x0, x1 in (left, torso, right):
        mask[rows[0]:rows[1], x0:x1] = True
    return mask


# criterion number -> (passed, detail); filled by test_acceptance, printed at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
