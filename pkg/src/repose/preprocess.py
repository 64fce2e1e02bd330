"""Input validation and the 512 / 1024 working copies."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import raster
from .config import PreprocessConfig


@dataclass(frozen=True)
class RuleResult:
    name: str
    passed: bool
    detail: str


@dataclass
class ValidationReport:
    rules: list[RuleResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.rules)

    @property
    def failures(self) -> list[str]:
        return [r.name for r in self.rules if not r.passed]

    def __getitem__(self, name: str) -> RuleResult:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)

    def lines(self) -> list[str]:
        return [f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}" for r in self.rules]


def corner_patches(img: np.ndarray, size: int) -> list[np.ndarray]:
    h, w = img.shape[:2]
    s = min(size, h, w)
    return [img[:s, :s], img[:s, w - s:], img[h - s:, :s], img[h - s:, w - s:]]


def validate_input(img: np.ndarray, cfg: PreprocessConfig | None = None) -> ValidationReport:
    """Check resolution, aspect ratio and white background.

    The background rule looks at the four ``corner_patch``-sized corners: each
    patch must have every channel mean at least ``white_mean_min`` and a
    per-channel standard deviation of at most ``white_std_max``.
    """
    cfg = cfg or PreprocessConfig()
    img = raster.as_rgb(img)
    h, w = img.shape[:2]
    report = ValidationReport()

    report.rules.append(
        RuleResult("resolution", min(w, h) >= cfg.min_size, f"{w}x{h}, need >= {cfg.min_size} on both sides")
    )
    report.rules.append(RuleResult("aspect", w == h, f"{w}x{h}, need 1:1"))

    worst_mean, worst_std = 255.0, 0.0
    for patch in corner_patches(img, cfg.corner_patch):
        px = patch.reshape(-1, 3).astype(np.float64)
        worst_mean = min(worst_mean, float(px.mean(axis=0).min()))
        worst_std = max(worst_std, float(px.std(axis=0).max()))
    white_ok = worst_mean >= cfg.white_mean_min and worst_std <= cfg.white_std_max
    report.rules.append(
        RuleResult(
            "background",
            white_ok,
            f"lowest corner mean {worst_mean:.1f} (>= {cfg.white_mean_min}), "
            f"highest corner std {worst_std:.2f} (<= {cfg.white_std_max})",
        )
    )
    return report


def make_working_set(img: np.ndarray) -> dict[str, np.ndarray]:
    img = raster.as_rgb(img)
    return {
        "img512": raster.resize(img, 512, 512, "lanczos3"),
        "img1024": raster.resize(img, 1024, 1024, "lanczos3"),
    }
