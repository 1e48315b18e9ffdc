"""Elementwise radiometric transforms.

Exposure times are normalized to the reference frame: ``t = 2^(ev - reference_ev)``, so the
reference exposure linearizes to ``I^gamma`` and the merged HDR domain is [0, 1].
"""

from typing import Optional, Tuple, Union

import numpy as np

from app.core.exceptions import ValidationError
from app.schemas.config import RadiometryConfig
from app.schemas.images import (
    ExposureImage,
    HdrImage,
    LinearImage,
    WeightMap,
    require_same_shape,
)

_DEFAULT = RadiometryConfig()

ImageLike = Union[ExposureImage, LinearImage, HdrImage, np.ndarray]


def _cfg(cfg: Optional[RadiometryConfig]) -> RadiometryConfig:
    return cfg if cfg is not None else _DEFAULT


def _pixels(image: ImageLike) -> np.ndarray:
    if isinstance(image, np.ndarray):
        return np.asarray(image, dtype=np.float64)
    return image.pixels


def exposure_time(ev: float, reference_ev: float) -> float:
    """Exposure time ratio of ``ev`` relative to ``reference_ev``."""
    return float(2.0 ** (ev - reference_ev))


def linearize(
    img: ExposureImage, reference_ev: float, cfg: Optional[RadiometryConfig] = None
) -> LinearImage:
    """Map an LDR frame to the linear domain: ``I^gamma / t``."""
    cfg = _cfg(cfg)
    if not np.all(np.isfinite(img.pixels)):
        raise ValidationError("Cannot linearize a frame with non-finite pixels")
    t = exposure_time(img.ev, reference_ev)
    return LinearImage(
        pixels=np.power(img.pixels, cfg.gamma) / t, reference_ev=reference_ev
    )


def delinearize(
    h: LinearImage,
    target_ev: float,
    cfg: Optional[RadiometryConfig] = None,
    bit_depth: int = 8,
) -> ExposureImage:
    """Render linear radiance as the LDR frame an exposure at ``target_ev`` would record."""
    cfg = _cfg(cfg)
    t = exposure_time(target_ev, h.reference_ev)
    pixels = np.power(np.clip(h.pixels * t, 0.0, 1.0), 1.0 / cfg.gamma)
    return ExposureImage(pixels=pixels, ev=target_ev, bit_depth=bit_depth)


def tonemap(image: ImageLike, cfg: Optional[RadiometryConfig] = None) -> np.ndarray:
    """mu-law compression ``log(1 + mu x) / log(1 + mu)`` of values in [0, 1]."""
    cfg = _cfg(cfg)
    x = _pixels(image)
    if x.size and (not np.all(np.isfinite(x)) or x.min() < 0.0 or x.max() > 1.0):
        raise ValidationError("tonemap expects values within [0, 1]; clip first")
    return np.log1p(cfg.mu * x) / np.log1p(cfg.mu)


def triangle_ramps(
    z: np.ndarray, breakpoint: float = 0.5
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Raw Λ1, Λ2, Λ3 arrays for reference pixel values ``z``."""
    lam1 = np.where(z <= breakpoint, 1.0, (1.0 - z) / (1.0 - breakpoint))
    lam3 = np.where(z <= breakpoint, z / breakpoint, 1.0)
    lam2 = np.minimum(lam1, lam3)
    return lam1, lam2, lam3


def triangle_weights(
    i2: ExposureImage, cfg: Optional[RadiometryConfig] = None
) -> Tuple[WeightMap, WeightMap, WeightMap]:
    """Per-channel blending ramps over the reference frame brightness."""
    cfg = _cfg(cfg)
    ramps = triangle_ramps(i2.pixels, cfg.weight_breakpoint)
    return tuple(WeightMap(values=np.clip(r, 0.0, 1.0)) for r in ramps)


def fusion_weights(
    i2: ExposureImage, cfg: Optional[RadiometryConfig] = None
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pixel-level fusion weights ``(1 - Λ1, Λ2, 1 - Λ3)``; they sum to one."""
    lam1, lam2, lam3 = triangle_weights(i2, cfg)
    return 1.0 - lam1.values, lam2.values, 1.0 - lam3.values


def fuse_color(
    h1: LinearImage,
    h2: LinearImage,
    h3: LinearImage,
    i2: ExposureImage,
    cfg: Optional[RadiometryConfig] = None,
) -> HdrImage:
    """
    Weighted merge of aligned linear frames into the color component.

    Args:
        h1: Short exposure, already warped to the reference
        h2: Reference exposure
        h3: Long exposure, already warped to the reference
        i2: Reference LDR frame driving the weights

    Returns:
        Fused HDR image clipped to [0, 1]
    """
    require_same_shape(h1.pixels, h2.pixels, h3.pixels, i2.pixels)
    a1, a2, a3 = fusion_weights(i2, cfg)
    numerator = a1 * h1.pixels + a2 * h2.pixels + a3 * h3.pixels
    fused = numerator / (a1 + a2 + a3)
    return HdrImage(pixels=np.clip(fused, 0.0, 1.0), role="color_component")
