"""Image quality metrics and report aggregation.

PSNR and SSIM are computed here; LPIPS is delegated to a perceptual backend.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import raster
from .backends import BackendError

log = logging.getLogger(__name__)

PSNR_CAP = 100.0
PEAK = 255.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
K1, K2 = 0.01, 0.03
C1 = (K1 * PEAK) ** 2
C2 = (K2 * PEAK) ** 2
METRICS = ("lpips", "psnr", "ssim")


class MetricError(ValueError):
    pass


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a, b = raster.as_rgb(a), raster.as_rgb(b)
    if a.shape != b.shape:
        raise MetricError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a.astype(np.float64), b.astype(np.float64)


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """PSNR in dB over all channels; identical images give ``PSNR_CAP``."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(PEAK**2 / mse))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def _filter_valid(x: np.ndarray, window: np.ndarray) -> np.ndarray:
    # correlate, then keep only positions where the window fits entirely
    k = window.shape[0]
    full = ndimage.correlate(x, window, mode="constant")
    lo = k // 2
    return full[lo : x.shape[0] - (k - 1 - lo), lo : x.shape[1] - (k - 1 - lo)]


def _ssim_channel(x: np.ndarray, y: np.ndarray, window: np.ndarray) -> float:
    mu_x = _filter_valid(x, window)
    mu_y = _filter_valid(y, window)
    sxx = _filter_valid(x * x, window) - mu_x**2
    syy = _filter_valid(y * y, window) - mu_y**2
    sxy = _filter_valid(x * y, window) - mu_x * mu_y
    num = (2 * mu_x * mu_y + C1) * (2 * sxy + C2)
    den = (mu_x**2 + mu_y**2 + C1) * (sxx + syy + C2)
    return float(np.mean(num / den))


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean local SSIM (11x11 Gaussian, sigma 1.5) per channel, channels averaged."""
    a, b = _pair(a, b)
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise MetricError(f"image {a.shape[:2]} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    if np.array_equal(a, b):
        return 1.0
    window = gaussian_window()
    return float(np.mean([_ssim_channel(a[..., c], b[..., c], window) for c in range(a.shape[2])]))


def lpips(a: np.ndarray, b: np.ndarray, backends=None) -> float | None:
    """Perceptual distance from the backend, or ``None`` when unavailable."""
    if backends is None or not backends.has("perceptual"):
        return None
    try:
        return float(backends.perceptual(raster.as_rgb(a), raster.as_rgb(b)))
    except BackendError as exc:
        log.warning("perceptual backend failed: %s", exc)
        return None


def score_pair(image_id: str, a: np.ndarray, b: np.ndarray, backends=None) -> dict:
    return {"id": image_id, "lpips": lpips(a, b, backends), "psnr": psnr(a, b), "ssim": ssim(a, b)}


@dataclass
class MetricReport:
    rows: list[dict]
    aggregate: dict[str, dict]
    stage: str = "custom"
    dataset: str | None = None

    def to_dict(self) -> dict:
        return {"dataset": self.dataset, "stage": self.stage, "rows": self.rows, "aggregate": self.aggregate}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        """Summary row (mean and std per metric) followed by one row per image."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["stage", "id"]
        for m in METRICS:
            header += [f"{m}_mean", f"{m}_std", f"{m}_n"]
        writer.writerow(header)
        summary = [self.stage, "*"]
        for m in METRICS:
            agg = self.aggregate[m]
            summary += [_fmt(agg["mean"]), _fmt(agg["std"]), agg["n"]]
        writer.writerow(summary)
        for row in self.rows:
            line = [self.stage, row["id"]]
            for m in METRICS:
                line += [_fmt(row.get(m)), "", ""]
            writer.writerow(line)
        return buf.getvalue()


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def aggregate(rows: list[dict], std: str = "sample", stage: str = "custom", dataset: str | None = None) -> MetricReport:
    """Mean and std per metric; ``None`` entries are left out and the count is kept.

    A metric with a single value has std 0 by convention. A metric with no
    values at all aggregates to ``None``.
    """
    if not rows:
        raise MetricError("cannot aggregate an empty set of rows")
    if std not in ("sample", "population"):
        raise MetricError(f"std must be 'sample' or 'population', got {std!r}")
    ddof = 1 if std == "sample" else 0
    agg = {}
    for m in METRICS:
        values = np.array([r[m] for r in rows if r.get(m) is not None], dtype=np.float64)
        if values.size == 0:
            agg[m] = {"mean": None, "std": None, "n": 0}
            continue
        sd = float(values.std(ddof=ddof)) if values.size > 1 else 0.0
        agg[m] = {"mean": float(values.mean()), "std": sd, "n": int(values.size)}
    return MetricReport(rows=list(rows), aggregate=agg, stage=stage, dataset=dataset)


@dataclass
class AblationReport:
    """One :class:`MetricReport` per preset, in preset order."""

    reports: list[MetricReport] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps([r.to_dict() for r in self.reports], indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        parts = [r.to_csv() for r in self.reports]
        head = parts[0].splitlines(keepends=True)[0] if parts else ""
        return head + "".join("".join(p.splitlines(keepends=True)[1:]) for p in parts)
