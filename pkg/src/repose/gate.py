"""Two-step long-sleeve filter: CNN classifier, then caption + LLM check."""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .backends import Backends, BackendError
from .prompts import LONG_SLEEVE_CONTEXT, long_sleeve_prompt

LONG_SLEEVE = "long_sleeve"
REQUIRED = ("classify", "caption", "llm")


class GateError(RuntimeError):
    """The gate could not reach a verdict; the image is quarantined."""


@dataclass(frozen=True)
class GateDecision:
    cnn_label: str
    caption: str
    llm_verdict: bool
    admitted: bool
    reason: str  # "admitted", "cnn_rejected" or "llm_rejected"

    def to_dict(self) -> dict:
        return {
            "cnn_label": self.cnn_label,
            "caption": self.caption,
            "llm_verdict": self.llm_verdict,
            "admitted": self.admitted,
            "reason": self.reason,
        }


_WORD = re.compile(r"[a-z]+")


def parse_verdict(reply: str) -> bool:
    """First alphabetic token of the reply must be ``true`` or ``false``."""
    match = _WORD.search(reply.strip().lower())
    if match is None or match.group(0) not in ("true", "false"):
        raise GateError(f"unparseable LLM verdict: {reply!r}")
    return match.group(0) == "true"


def gate_image(img: np.ndarray, backends: Backends) -> GateDecision:
    try:
        label = backends.classify(img)
    except BackendError as exc:
        raise GateError(f"classifier failed: {exc}") from exc
    cnn_label = LONG_SLEEVE if label == LONG_SLEEVE else "other"
    if cnn_label != LONG_SLEEVE:
        return GateDecision(cnn_label, "", False, False, "cnn_rejected")

    try:
        caption = backends.caption(img)
        reply = backends.llm(LONG_SLEEVE_CONTEXT, long_sleeve_prompt(caption))
    except BackendError as exc:
        raise GateError(f"caption/LLM step failed: {exc}") from exc
    verdict = parse_verdict(reply)
    return GateDecision(cnn_label, caption, verdict, verdict, "admitted" if verdict else "llm_rejected")
