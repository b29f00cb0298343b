"""Fidelity metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


@dataclass(frozen=True)
class MetricReport:
    mse: float
    psnr_db: float
    ssim: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        # JSON has no infinity literal
        if np.isinf(self.psnr_db):
            d["psnr_db"] = "inf"
        return d


def _pair(x, ref):
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {ref.shape}")
    return x, ref


def mse(x, ref) -> float:
    x, ref = _pair(x, ref)
    d = (x - ref).reshape(-1)
    return float(d @ d) / d.size


def psnr(x, ref, peak: float = 1.0) -> float:
    """PSNR in dB; ``inf`` when the inputs are identical."""
    if not peak > 0:
        raise ValueError("peak must be positive")
    err = mse(x, ref)
    if err == 0:
        return float("inf")
    return float(10 * np.log10(peak * peak / err))


def ssim(x, ref, window: int = 7, peak: float = 1.0) -> float:
    """Mean SSIM over all valid ``window x window`` patches (uniform weights).

    Uses population statistics within each window and the usual constants
    C1 = (0.01 peak)^2, C2 = (0.03 peak)^2. Color images are averaged over
    channels.
    """
    x, ref = _pair(x, ref)
    if x.ndim == 3:
        return float(np.mean([ssim(x[..., c], ref[..., c], window, peak) for c in range(x.shape[2])]))
    if x.ndim != 2:
        raise ValueError("ssim needs a 2-D image")
    if window % 2 == 0 or window < 1:
        raise ValueError("window must be odd")
    if window > min(x.shape):
        raise ValueError(f"window {window} larger than image {x.shape}")
    c1, c2 = (0.01 * peak) ** 2, (0.03 * peak) ** 2
    wx = sliding_window_view(x, (window, window))
    wy = sliding_window_view(ref, (window, window))
    mx, my = wx.mean(axis=(-2, -1)), wy.mean(axis=(-2, -1))
    dx, dy = wx - mx[..., None, None], wy - my[..., None, None]
    vx = (dx * dx).mean(axis=(-2, -1))
    vy = (dy * dy).mean(axis=(-2, -1))
    cxy = (dx * dy).mean(axis=(-2, -1))
    s = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
    return float(s.mean())


def report(x, ref, peak: float = 1.0, image_shape=None) -> MetricReport:
    x, ref = _pair(x, ref)
    s = None
    if image_shape is not None and len(image_shape) >= 2 and min(image_shape[:2]) >= 7:
        s = ssim(x.reshape(image_shape), ref.reshape(image_shape), peak=peak)
    return MetricReport(mse(x, ref), psnr(x, ref, peak), s)
