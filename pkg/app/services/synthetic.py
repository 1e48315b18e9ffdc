"""Synthetic bracketed scenes with exact ground truth.

The radiance field is built in log2 space (a horizontal gradient spanning about 13 stops,
smoothed noise texture and a few flat-shaded shapes) and clipped at 1, so frame 3
saturates and frame 1 goes near-black on a sizeable share of pixels.
"""

from typing import List, Optional, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from app.core.logging import setup_logger
from app.schemas.config import RadiometryConfig, SyntheticDatasetConfig, SyntheticSpec
from app.schemas.images import ExposureImage, FlowField, HdrImage
from app.schemas.scene import Scene
from app.services.alignment import warp
from app.services.hdr_io import quantize
from app.services.radiometry import exposure_time

logger = setup_logger(__name__)

_LOG2_RANGE = (-12.5, 0.5)


def _radiance_field(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    ramp = np.linspace(_LOG2_RANGE[0], _LOG2_RANGE[1], width)
    log_h = np.broadcast_to(ramp, (height, width)).copy()

    noise = gaussian_filter(rng.standard_normal((height, width)), sigma=1.5, mode="reflect")
    log_h += 0.8 * noise / max(noise.std(), 1e-12)

    ys, xs = np.mgrid[0:height, 0:width]
    for _ in range(4):
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        radius = rng.uniform(0.08, 0.2) * min(height, width)
        disc = (ys - cy) ** 2 + (xs - cx) ** 2 < radius**2
        log_h[disc] += rng.uniform(-1.5, 1.5)

    tint = rng.uniform(-0.3, 0.3, size=3)
    channel_noise = gaussian_filter(
        rng.standard_normal((height, width, 3)), sigma=(2.0, 2.0, 0), mode="reflect"
    )
    log_rgb = log_h[..., None] + tint + 0.2 * channel_noise
    return np.clip(np.exp2(log_rgb), 0.0, 1.0)


def _as_float32_grid(pixels: np.ndarray) -> np.ndarray:
    # SHDR stores float32; keep ground truth exactly representable
    return pixels.astype(np.float32).astype(np.float64)


def _rect_layer(
    rng: np.random.Generator, height: int, width: int
) -> Tuple[np.ndarray, np.ndarray]:
    """A textured rectangle: radiance layer and its H×W alpha in reference position."""
    rh = int(rng.integers(height // 4, height // 3 + 1))
    rw = int(rng.integers(width // 4, width // 3 + 1))
    top = int(rng.integers(height // 4, height - rh - height // 8))
    left = int(rng.integers(width // 4, width - rw - width // 8))

    alpha = np.zeros((height, width))
    alpha[top : top + rh, left : left + rw] = 1.0

    texture = gaussian_filter(rng.standard_normal((height, width)), sigma=1.0, mode="reflect")
    level = rng.uniform(-6.0, -2.5)
    color = rng.uniform(-0.4, 0.4, size=3)
    layer = np.exp2(level + color + 0.7 * texture[..., None])
    return np.clip(layer, 0.0, 1.0), alpha


def _render(
    radiance: np.ndarray, ev: float, reference_ev: float, bit_depth: int, gamma: float
) -> ExposureImage:
    t = exposure_time(ev, reference_ev)
    pixels = np.power(np.clip(radiance * t, 0.0, 1.0), 1.0 / gamma)
    return ExposureImage(pixels=quantize(pixels, bit_depth), ev=ev, bit_depth=bit_depth)


def synthesize_scene(
    spec: SyntheticSpec,
    cfg: Optional[RadiometryConfig] = None,
    scene_id: Optional[str] = None,
) -> Scene:
    """
    Render a bracketed triplet from a random radiance field.

    Motion models:
        none: all frames show the ground truth
        shift: frame 1 shows the scene moved by +d and frame 3 by -d
        rect: a textured rectangle moves by +d in frame 1 and -d in frame 3 over a
            static background

    Returns:
        Scene with ground truth, true flows (reference -> frame) and the motion region
    """
    cfg = cfg or RadiometryConfig()
    rng = np.random.default_rng(spec.seed)
    height, width = spec.size
    d = np.asarray(spec.displacement, dtype=np.float64)
    const_flow = np.broadcast_to(d, (height, width, 2)).copy()

    background = _radiance_field(rng, height, width)

    if spec.motion == "rect":
        layer, alpha = _rect_layer(rng, height, width)

        def composite(flow: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
            moved_alpha = warp(alpha, flow)[..., None]
            moved_layer = warp(layer, flow)
            blended = background * (1.0 - moved_alpha) + moved_layer * moved_alpha
            return blended, moved_alpha[..., 0]

        ground_truth, _ = composite(np.zeros_like(const_flow))
        ground_truth = _as_float32_grid(ground_truth)
        radiance_1, alpha_1 = composite(-const_flow)
        radiance_3, alpha_3 = composite(const_flow)
        inside = alpha[..., None] > 0.5
        flows = (np.where(inside, const_flow, 0.0), np.where(inside, -const_flow, 0.0))
        motion_region = (alpha > 0) | (alpha_1 > 0) | (alpha_3 > 0)
    else:
        ground_truth = _as_float32_grid(background)
        if spec.motion == "shift":
            radiance_1 = warp(ground_truth, -const_flow)
            radiance_3 = warp(ground_truth, const_flow)
            flows = (const_flow, -const_flow)
            motion_region = np.ones((height, width), dtype=bool)
        else:
            radiance_1 = radiance_3 = ground_truth
            flows = (np.zeros((height, width, 2)), np.zeros((height, width, 2)))
            motion_region = np.zeros((height, width), dtype=bool)

    ev1, ev2, ev3 = spec.ev_set
    frames = (
        _render(radiance_1, ev1, ev2, spec.bit_depth, cfg.gamma),
        _render(ground_truth, ev2, ev2, spec.bit_depth, cfg.gamma),
        _render(radiance_3, ev3, ev2, spec.bit_depth, cfg.gamma),
    )

    return Scene(
        scene_id=scene_id or f"synthetic_{spec.seed}",
        frames=frames,
        ground_truth=HdrImage(pixels=ground_truth, role="ground_truth"),
        true_flows=(FlowField(vectors=flows[0]), FlowField(vectors=flows[1])),
        motion_region=motion_region,
    )


def dataset_specs(cfg: SyntheticDatasetConfig) -> List[SyntheticSpec]:
    """Per-scene specs of a synthetic dataset; ``mixed`` alternates rect and shift motion."""
    rng = np.random.default_rng(cfg.seed)
    specs = []
    for index in range(cfg.scenes):
        motion = cfg.motion
        if motion == "mixed":
            motion = ("rect", "shift")[index % 2]

        magnitude = rng.uniform(min(1.0, cfg.max_displacement), cfg.max_displacement)
        sign = rng.choice([-1.0, 1.0])
        dy = rng.uniform(-0.5, 0.5) * cfg.max_displacement
        displacement = (float(sign * magnitude), float(dy))
        specs.append(
            SyntheticSpec(
                size=(cfg.size, cfg.size),
                ev_set=cfg.ev_set,
                motion=motion,
                displacement=displacement if motion != "none" else (0.0, 0.0),
                bit_depth=cfg.bit_depth,
                seed=int(rng.integers(0, 2**31 - 1)),
            )
        )
    return specs


def synthesize_dataset(
    cfg: SyntheticDatasetConfig, radiometry: Optional[RadiometryConfig] = None
) -> List[Scene]:
    scenes = [
        synthesize_scene(spec, radiometry, scene_id=f"scene_{index:03d}")
        for index, spec in enumerate(dataset_specs(cfg))
    ]
    logger.info(f"Synthesized {len(scenes)} scenes motion={cfg.motion} size={cfg.size}")
    return scenes
