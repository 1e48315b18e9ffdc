"""PSNR and SSIM in the linear and tone-mapped domains."""

import math
from typing import List, Optional, Union

import cv2
import numpy as np

from app.core.exceptions import ShapeMismatchError
from app.schemas.config import RadiometryConfig
from app.schemas.images import HdrImage
from app.schemas.reports import MetricReport, MetricValues, SceneMetrics
from app.services.radiometry import tonemap

ArrayOrImage = Union[np.ndarray, HdrImage]

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _arr(x: ArrayOrImage) -> np.ndarray:
    return x.pixels if isinstance(x, HdrImage) else np.asarray(x, dtype=np.float64)


def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"Metric inputs differ in shape: {a.shape} vs {b.shape}")


def psnr(a: ArrayOrImage, b: ArrayOrImage, data_range: float = 1.0) -> float:
    """``10 log10(range^2 / MSE)`` in dB; ``inf`` for identical inputs."""
    a, b = _arr(a), _arr(b)
    _same_shape(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(data_range**2 / mse)


def psnr_u(a: ArrayOrImage, b: ArrayOrImage, cfg: Optional[RadiometryConfig] = None) -> float:
    return psnr(tonemap(_arr(a), cfg), tonemap(_arr(b), cfg))


def ssim(a: ArrayOrImage, b: ArrayOrImage, data_range: float = 1.0) -> float:
    """Mean SSIM of the channel-mean grayscale images (Gaussian 11×11 window, sigma 1.5)."""
    a, b = _arr(a), _arr(b)
    _same_shape(a, b)
    if a.ndim == 3:
        a, b = a.mean(axis=2), b.mean(axis=2)

    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    kernel = cv2.getGaussianKernel(SSIM_WINDOW, SSIM_SIGMA)
    window = np.outer(kernel, kernel.transpose())

    def blur(x: np.ndarray) -> np.ndarray:
        out = cv2.filter2D(x, -1, window)
        r = SSIM_WINDOW // 2
        if min(x.shape) > 2 * r:
            out = out[r:-r, r:-r]
        return out

    mu1, mu2 = blur(a), blur(b)
    mu1_sq, mu2_sq, mu1_mu2 = mu1**2, mu2**2, mu1 * mu2
    sigma1_sq = blur(a * a) - mu1_sq
    sigma2_sq = blur(b * b) - mu2_sq
    sigma12 = blur(a * b) - mu1_mu2

    ssim_map = ((2 * mu1_mu2 + c1) * (2 * sigma12 + c2)) / (
        (mu1_sq + mu2_sq + c1) * (sigma1_sq + sigma2_sq + c2)
    )
    return float(np.clip(ssim_map.mean(), -1.0, 1.0))


def ssim_u(a: ArrayOrImage, b: ArrayOrImage, cfg: Optional[RadiometryConfig] = None) -> float:
    return ssim(tonemap(_arr(a), cfg), tonemap(_arr(b), cfg))


def evaluate(
    prediction: ArrayOrImage,
    ground_truth: ArrayOrImage,
    cfg: Optional[RadiometryConfig] = None,
    scene_id: str = "",
) -> SceneMetrics:
    """All four metrics of one prediction."""
    pred, gt = _arr(prediction), _arr(ground_truth)
    return SceneMetrics(
        scene_id=scene_id,
        psnr_l=psnr(pred, gt),
        psnr_u=psnr_u(pred, gt, cfg),
        ssim_l=ssim(pred, gt),
        ssim_u=ssim_u(pred, gt, cfg),
    )


def aggregate(name: str, scenes: List[SceneMetrics]) -> MetricReport:
    """Per-scene rows and their arithmetic means."""
    if not scenes:
        raise ValueError("Cannot aggregate an empty metric list")
    mean = MetricValues(
        **{
            field: float(np.mean([getattr(s, field) for s in scenes]))
            for field in ("psnr_l", "psnr_u", "ssim_l", "ssim_u")
        }
    )
    return MetricReport(name=name, scenes=scenes, mean=mean)


def format_table_row(name: str, report: MetricReport) -> str:
    """``name | PSNR-u / SSIM-u | PSNR-l / SSIM-l | HDR-VDP-2``."""
    m = report.mean
    vdp = f"{m.hdr_vdp2:.2f}" if m.hdr_vdp2 is not None else "-"
    return (
        f"{name} | {m.psnr_u:.2f} / {m.ssim_u:.4f} | "
        f"{m.psnr_l:.2f} / {m.ssim_l:.4f} | {vdp}"
    )
