"""The single seam between pipeline code and neural inference."""
from .api import Backends, seeded_ids
from .client import HttpBackend
from .mock import MockBackend, mock_suite
from .protocol import (
    ENDPOINTS,
    KINDS,
    BackendContractError,
    BackendError,
    BackendHTTPError,
    BackendNetworkError,
    BackendProtocolError,
    BackendRemoteError,
    BackendRequest,
    BackendResponse,
    BackendTimeout,
    CapabilityError,
    decode_latent,
    encode_latent,
)

__all__ = [
    "ENDPOINTS",
    "KINDS",
    "Backends",
    "BackendContractError",
    "BackendError",
    "BackendHTTPError",
    "BackendNetworkError",
    "BackendProtocolError",
    "BackendRemoteError",
    "BackendRequest",
    "BackendResponse",
    "BackendTimeout",
    "CapabilityError",
    "HttpBackend",
    "MockBackend",
    "decode_latent",
    "encode_latent",
    "mock_suite",
    "seeded_ids",
]
