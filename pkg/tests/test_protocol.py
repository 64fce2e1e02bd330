import json
import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repose.backends import (
    ENDPOINTS,
    KINDS,
    BackendProtocolError,
    BackendRequest,
    BackendResponse,
    decode_latent,
    encode_latent,
)
from repose.backends.protocol import canonical_json

GOLDEN = Path(__file__).parent / "golden"
PNG_STUB = "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAIAAACQd1PeAAAADElEQVR4nGP4//8/AAX+Av4N70a4AAAAAElFTkSuQmCC"
LATENT_STUB = encode_latent(np.arange(2 * 2 * 3, dtype=np.float32).reshape(2, 2, 3) / 4)


def representative_requests() -> dict[str, BackendRequest]:
    rid = "00000000-0000-5000-8000-{:012d}"
    return {
        "classify": BackendRequest("classify", rid.format(1), images=[PNG_STUB]),
        "caption": BackendRequest("caption", rid.format(2), images=[PNG_STUB]),
        "llm": BackendRequest("llm", rid.format(3), text={"context": "Answer True or False.", "prompt": "Is it?"}),
        "detect": BackendRequest("detect", rid.format(4), images=[PNG_STUB], text={"prompt": "Brand logo."}),
        "segment": BackendRequest(
            "segment", rid.format(5), images=[PNG_STUB], params={"x0": 1, "y0": 2, "x1": 30, "y1": 40}
        ),
        "inpaint": BackendRequest(
            "inpaint", rid.format(6), images=[PNG_STUB], masks=[PNG_STUB],
            text={"negative": "logo", "positive": "solid colour"}, params={"seed": 7},
        ),
        "txt2img": BackendRequest(
            "txt2img", rid.format(7), images=[PNG_STUB, PNG_STUB],
            text={"image_roles": "reference,pose", "negative": "blurry", "positive": "a sweater"},
            params={"adapter_weight": 1.0, "control_openpose": 1.0, "height": 512, "seed": 7, "steps": 30,
                    "width": 512},
        ),
        "unsample": BackendRequest(
            "unsample", rid.format(8), images=[PNG_STUB],
            text={"direction": "unsample", "latent": LATENT_STUB, "sampler": "dpmpp_2m", "scheduler": "karras"},
            params={"seed": 7, "steps": 30, "stop_fraction": 0.6},
        ),
        "upscale": BackendRequest("upscale", rid.format(9), images=[PNG_STUB], params={"scale": 4}),
        "perceptual": BackendRequest("perceptual", rid.format(10), images=[PNG_STUB, PNG_STUB]),
    }


@pytest.mark.parametrize("name", sorted(representative_requests()))
def test_request_matches_golden(name):
    req = representative_requests()[name]
    path = GOLDEN / f"request_{name}.json"
    if os.environ.get("REPOSE_REGEN_GOLDEN") == "1":
        path.write_text(req.to_json() + "\n")
    assert req.to_json() + "\n" == path.read_text()


def test_golden_set_has_ten_requests():
    assert len(list(GOLDEN.glob("request_*.json"))) == 10


def test_canonical_json_is_sorted_and_compact():
    assert canonical_json({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'
    with pytest.raises(ValueError):
        canonical_json({"x": float("nan")})


def test_request_roundtrip():
    for req in representative_requests().values():
        assert BackendRequest.from_json(req.to_json()) == req


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        BackendRequest("dance", "id")
    with pytest.raises(BackendProtocolError):
        BackendRequest.from_json('{"kind": "dance", "request_id": "x"}')


def test_endpoints_cover_all_kinds():
    assert len(KINDS) == 13
    assert all(ENDPOINTS[k] == f"v1/{k}" for k in KINDS)


def test_response_error_field_only_when_set():
    assert "error" not in json.loads(BackendResponse("r").to_json())
    assert json.loads(BackendResponse("r", error="boom").to_json())["error"] == "boom"


@pytest.mark.parametrize("raw", ["not json", "[]", '{"images": []}', '{"request_id": "x", "scalars": ["a"]}'])
def test_malformed_response(raw):
    with pytest.raises(BackendProtocolError) as info:
        BackendResponse.from_json(raw)
    assert info.value.code == "malformed_json"


@settings(max_examples=50, deadline=None)
@given(shape=st.tuples(st.integers(1, 5), st.integers(1, 9), st.integers(1, 9)), seed=st.integers(0, 2**32 - 1))
def test_latent_roundtrip_lossless(shape, seed):
    latent = np.random.default_rng(seed).standard_normal(shape).astype(np.float32) * 100
    out = decode_latent(encode_latent(latent))
    assert out.dtype == np.float32
    np.testing.assert_array_equal(out, latent)


def test_latent_header_layout():
    import base64
    import struct

    raw = base64.b64decode(encode_latent(np.zeros((4, 2, 3), dtype=np.float32)))
    assert struct.unpack("<3I", raw[:12]) == (4, 2, 3)
    assert len(raw) == 12 + 4 * 24


def test_latent_rejects_bad_payloads():
    with pytest.raises(ValueError):
        encode_latent(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        encode_latent(np.full((1, 1, 1), np.inf))
    with pytest.raises(BackendProtocolError):
        decode_latent(LATENT_STUB[:-8])
    with pytest.raises(BackendProtocolError):
        decode_latent("$$$")
