"""Optical-flow pre-alignment of the non-reference exposures.

Flow fields point from the reference to the source frame: ``warp(src, flow)(p)`` samples
``src`` at ``p + flow(p)``, replicating the border for samples outside the image.
"""

from typing import Callable, Dict, List, Optional, Tuple, TypeVar, Union

import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates

from app.core.exceptions import ConfigError, ShapeMismatchError
from app.core.logging import setup_logger
from app.schemas.config import FlowEstimatorSpec, RadiometryConfig
from app.schemas.images import ExposureImage, FlowField, HdrImage, LinearImage
from app.schemas.scene import AlignedStack
from app.services.radiometry import delinearize, linearize

logger = setup_logger(__name__)

ImageT = TypeVar("ImageT", ExposureImage, LinearImage, HdrImage, np.ndarray)

# ref gray, src gray, spec, ref validity, src validity -> H×W×2 flow
FlowEstimatorFn = Callable[
    [np.ndarray, np.ndarray, FlowEstimatorSpec, Optional[np.ndarray], Optional[np.ndarray]],
    np.ndarray,
]

# Pixels outside this range carry no usable brightness information
WELL_EXPOSED_RANGE = (0.02, 0.98)

_REGULARIZATION = 1e-4
_MIN_PYRAMID_SIZE = 8


class FlowEstimatorRegistry:
    """Registry of flow backends keyed by ``FlowEstimatorSpec.algorithm``."""

    _estimators: Dict[str, FlowEstimatorFn] = {}

    @classmethod
    def register(cls, key: str) -> Callable[[FlowEstimatorFn], FlowEstimatorFn]:
        def decorator(fn: FlowEstimatorFn) -> FlowEstimatorFn:
            cls._estimators[key] = fn
            return fn

        return decorator

    @classmethod
    def get(cls, key: str) -> FlowEstimatorFn:
        estimator = cls._estimators.get(key)
        if estimator is None:
            raise ConfigError(
                f"Unknown flow estimator '{key}'. Available: {cls.available()}"
            )
        return estimator

    @classmethod
    def available(cls) -> List[str]:
        return sorted(cls._estimators)


def _sample(src: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Bilinear backward sampling of an H×W or H×W×C array."""
    h, w = src.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    coords = np.stack([ys + flow[..., 1], xs + flow[..., 0]])
    if src.ndim == 2:
        return map_coordinates(src, coords, order=1, mode="nearest")
    return np.stack(
        [
            map_coordinates(src[..., c], coords, order=1, mode="nearest")
            for c in range(src.shape[2])
        ],
        axis=2,
    )


def warp(src: ImageT, flow: Union[FlowField, np.ndarray]) -> ImageT:
    """Backward-warp ``src`` by ``flow`` with bilinear sampling."""
    vectors = flow.vectors if isinstance(flow, FlowField) else np.asarray(flow, np.float64)
    pixels = src if isinstance(src, np.ndarray) else src.pixels
    if pixels.shape[:2] != vectors.shape[:2]:
        raise ShapeMismatchError(
            f"warp: image {pixels.shape[:2]} and flow {vectors.shape[:2]} differ"
        )

    if not np.any(vectors):
        warped = pixels.copy()
    else:
        # bilinear weights are convex; clip round-off back into the source range
        warped = np.clip(
            _sample(pixels.astype(np.float64), vectors), pixels.min(), pixels.max()
        )

    if isinstance(src, np.ndarray):
        return warped
    return type(src)(**{**dict(src), "pixels": warped})


def exposure_compensate(
    src: ExposureImage, target_ev: float, cfg: Optional[RadiometryConfig] = None
) -> ExposureImage:
    """Re-render ``src`` as if it had been captured at ``target_ev``."""
    return delinearize(
        linearize(src, src.ev, cfg), target_ev, cfg, bit_depth=src.bit_depth
    )


def well_exposed(img: ExposureImage) -> np.ndarray:
    """H×W float map, 1 where every channel lies inside the well-exposed range."""
    low, high = WELL_EXPOSED_RANGE
    inside = (img.pixels > low) & (img.pixels < high)
    return np.all(inside, axis=2).astype(np.float64)


def _pyramid(image: np.ndarray, levels: int) -> List[np.ndarray]:
    pyramid = [image]
    for _ in range(levels - 1):
        if min(pyramid[-1].shape) < 2 * _MIN_PYRAMID_SIZE:
            break
        blurred = gaussian_filter(pyramid[-1], sigma=1.0, mode="nearest")
        pyramid.append(blurred[::2, ::2])
    return pyramid


def _upsample_flow(flow: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    h, w = shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    coords = np.stack([ys / 2.0, xs / 2.0])
    return 2.0 * np.stack(
        [map_coordinates(flow[..., c], coords, order=1, mode="nearest") for c in range(2)],
        axis=2,
    )


def _lk_refine(
    ref: np.ndarray,
    src: np.ndarray,
    flow: np.ndarray,
    spec: FlowEstimatorSpec,
    ref_valid: Optional[np.ndarray],
    src_valid: Optional[np.ndarray],
) -> np.ndarray:
    """Iterative Lucas-Kanade updates at one pyramid level."""
    for _ in range(spec.iterations):
        warped = _sample(src, flow)
        gy, gx = np.gradient(0.5 * (warped + ref))
        it = warped - ref

        weight = np.ones_like(ref)
        if ref_valid is not None:
            weight = weight * ref_valid
        if src_valid is not None:
            weight = weight * _sample(src_valid, flow)

        def window(x: np.ndarray) -> np.ndarray:
            return gaussian_filter(weight * x, sigma=spec.window_sigma, mode="nearest")

        ixx = window(gx * gx) + _REGULARIZATION
        iyy = window(gy * gy) + _REGULARIZATION
        ixy = window(gx * gy)
        ixt = window(gx * it)
        iyt = window(gy * it)

        det = ixx * iyy - ixy * ixy
        du = -(iyy * ixt - ixy * iyt) / det
        dv = -(ixx * iyt - ixy * ixt) / det
        flow = flow + np.clip(np.stack([du, dv], axis=2), -1.0, 1.0)

        if spec.smoothness > 0:
            flow = np.stack(
                [
                    gaussian_filter(flow[..., c], sigma=spec.smoothness, mode="nearest")
                    for c in range(2)
                ],
                axis=2,
            )
    return flow


@FlowEstimatorRegistry.register("pyramidal_lk")
def pyramidal_lucas_kanade(
    ref: np.ndarray,
    src: np.ndarray,
    spec: FlowEstimatorSpec,
    ref_valid: Optional[np.ndarray] = None,
    src_valid: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Coarse-to-fine dense Lucas-Kanade on grayscale images."""
    ref_pyr = _pyramid(ref, spec.levels)
    src_pyr = _pyramid(src, spec.levels)
    ref_valid_pyr = _pyramid(ref_valid, spec.levels) if ref_valid is not None else None
    src_valid_pyr = _pyramid(src_valid, spec.levels) if src_valid is not None else None

    flow: Optional[np.ndarray] = None
    for level in reversed(range(len(ref_pyr))):
        shape = ref_pyr[level].shape
        if flow is None:
            flow = np.zeros(shape + (2,))
        else:
            flow = _upsample_flow(flow, shape)
        flow = _lk_refine(
            ref_pyr[level],
            src_pyr[level],
            flow,
            spec,
            ref_valid_pyr[level] if ref_valid_pyr else None,
            src_valid_pyr[level] if src_valid_pyr else None,
        )
    return flow


@FlowEstimatorRegistry.register("zero")
def zero_flow(
    ref: np.ndarray,
    src: np.ndarray,
    spec: FlowEstimatorSpec,
    ref_valid: Optional[np.ndarray] = None,
    src_valid: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Identity alignment."""
    return np.zeros(ref.shape + (2,))


def estimate_flow(
    ref: ExposureImage,
    src: ExposureImage,
    spec: FlowEstimatorSpec,
    ref_valid: Optional[np.ndarray] = None,
    src_valid: Optional[np.ndarray] = None,
) -> FlowField:
    """
    Estimate the flow from ``ref`` to ``src``.

    Args:
        ref: Reference frame
        src: Source frame, exposure-compensated to ``ref.ev`` by the caller
        spec: Estimator id and parameters
        ref_valid: Optional H×W confidence of reference pixels
        src_valid: Optional H×W confidence of source pixels (source coordinates)

    Returns:
        Flow such that ``warp(src, flow)`` approximates ``ref``

    Raises:
        ShapeMismatchError: If the frames differ in shape
        ConfigError: If the estimator id is unknown
    """
    if ref.shape != src.shape:
        raise ShapeMismatchError(
            f"estimate_flow: reference {ref.shape} and source {src.shape} differ"
        )
    estimator = FlowEstimatorRegistry.get(spec.algorithm)
    vectors = estimator(
        ref.pixels.mean(axis=2), src.pixels.mean(axis=2), spec, ref_valid, src_valid
    )
    limit = float(max(ref.shape[0], ref.shape[1]))
    return FlowField(vectors=np.clip(vectors, -limit, limit))


def align_stack(
    frames: Tuple[ExposureImage, ExposureImage, ExposureImage],
    spec: FlowEstimatorSpec,
    cfg: Optional[RadiometryConfig] = None,
    prealign: bool = True,
) -> AlignedStack:
    """
    Register frames 1 and 3 to frame 2.

    Both the linear images and the LDR frames are warped with the same flow; frame 2 is
    never altered. ``prealign=False`` skips flow estimation entirely.
    """
    i1, i2, i3 = frames
    reference_ev = i2.ev
    h1, h2, h3 = (linearize(f, reference_ev, cfg) for f in frames)

    if not prealign:
        spec = spec.model_copy(update={"algorithm": "zero"})

    aligned = {}
    for key, ldr, linear in (("1", i1, h1), ("3", i3, h3)):
        compensated = exposure_compensate(ldr, reference_ev, cfg)
        flow = estimate_flow(
            i2,
            compensated,
            spec,
            ref_valid=well_exposed(i2),
            src_valid=well_exposed(ldr),
        )
        logger.debug(
            f"Estimated flow frame={key} algorithm={spec.algorithm} "
            f"mean_dx={flow.vectors[..., 0].mean():.3f} mean_dy={flow.vectors[..., 1].mean():.3f}"
        )
        aligned[key] = (warp(linear, flow), warp(ldr, flow), flow)

    return AlignedStack(
        h1=aligned["1"][0],
        h2=h2,
        h3=aligned["3"][0],
        i1=aligned["1"][1],
        i2=i2,
        i3=aligned["3"][1],
        flow_1=aligned["1"][2],
        flow_3=aligned["3"][2],
    )
