import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from app.core.exceptions import ConfigError, ShapeMismatchError
from app.schemas.config import FlowEstimatorSpec
from app.schemas.images import ExposureImage, FlowField, LinearImage
from app.schemas.scene import NetworkInput
from app.services.alignment import (
    FlowEstimatorRegistry,
    align_stack,
    estimate_flow,
    exposure_compensate,
    warp,
    well_exposed,
)
from app.services.radiometry import linearize

MARGIN = 8


def interior(arr: np.ndarray) -> np.ndarray:
    return arr[MARGIN:-MARGIN, MARGIN:-MARGIN]


def test_warp_by_integer_flow_shifts_pixels(rng):
    src = rng.uniform(0, 1, (10, 12, 3))
    flow = np.zeros((10, 12, 2))
    flow[..., 0] = 2.0
    out = warp(src, flow)
    np.testing.assert_allclose(out[:, :-2], src[:, 2:])
    # border replication
    np.testing.assert_allclose(out[:, -1], src[:, -1])


def test_warp_zero_flow_is_identity_and_keeps_type(rng):
    img = LinearImage(pixels=rng.uniform(0, 2, (6, 6, 3)), reference_ev=1.0)
    out = warp(img, FlowField.zeros(6, 6))
    assert isinstance(out, LinearImage)
    assert out.reference_ev == 1.0
    np.testing.assert_array_equal(out.pixels, img.pixels)


def test_warp_half_pixel_interpolates_linearly():
    src = np.tile(np.arange(8, dtype=np.float64), (4, 1))
    flow = np.zeros((4, 8, 2))
    flow[..., 0] = 0.5
    out = warp(src, flow)
    np.testing.assert_allclose(out[:, :-1], src[:, :-1] + 0.5)


def test_warp_rejects_mismatched_flow(rng):
    with pytest.raises(ShapeMismatchError):
        warp(rng.uniform(0, 1, (4, 4, 3)), np.zeros((5, 4, 2)))


def test_registry_lists_shipped_estimators():
    assert {"pyramidal_lk", "zero"} <= set(FlowEstimatorRegistry.available())
    with pytest.raises(ConfigError):
        FlowEstimatorRegistry.get("farneback")


def test_exposure_compensate_matches_reference_rendering(rng):
    radiance = rng.uniform(0.001, 0.2, (8, 8, 3))
    short = ExposureImage(pixels=(radiance * 0.25) ** (1 / 2.2), ev=-2.0)
    ref = ExposureImage(pixels=radiance ** (1 / 2.2), ev=0.0)
    compensated = exposure_compensate(short, 0.0)
    np.testing.assert_allclose(compensated.pixels, ref.pixels, atol=1e-12)
    assert compensated.ev == 0.0


def test_well_exposed_excludes_clipped_pixels():
    pixels = np.full((2, 2, 3), 0.5)
    pixels[0, 0, 1] = 1.0
    pixels[1, 1, 2] = 0.0
    mask = well_exposed(ExposureImage(pixels=pixels, ev=0.0))
    np.testing.assert_array_equal(mask, [[0.0, 1.0], [1.0, 0.0]])


def test_zero_estimator_returns_zero_flow(make_scene):
    scene = make_scene(motion="shift", size=32)
    flow = estimate_flow(scene.frames[1], scene.frames[1], FlowEstimatorSpec(algorithm="zero"))
    assert flow.vectors.shape == (32, 32, 2)
    assert not np.any(flow.vectors)


@pytest.mark.parametrize("displacement", [(1.0, 0.0), (3.0, -2.0), (-5.0, 1.0)])
def test_global_shift_is_recovered(make_scene, displacement):
    scene = make_scene(motion="shift", displacement=displacement, size=64, bit_depth=16, seed=5)
    i1, i2, _ = scene.frames
    compensated = exposure_compensate(i1, i2.ev)
    flow = estimate_flow(
        i2,
        compensated,
        FlowEstimatorSpec(),
        ref_valid=well_exposed(i2),
        src_valid=well_exposed(i1),
    )
    valid = (interior(well_exposed(i2)) > 0) & (interior(well_exposed(i1)) > 0)
    error = np.linalg.norm(interior(flow.vectors - scene.true_flows[0].vectors), axis=2)
    assert valid.mean() > 0.3
    assert error[valid].mean() < 0.5


def test_align_stack_reduces_misalignment(make_scene):
    scene = make_scene(motion="shift", displacement=(4.0, 2.0), size=64, bit_depth=16, seed=9)
    frames = scene.frames
    spec = FlowEstimatorSpec()
    aligned = align_stack(frames, spec)
    unaligned = linearize(frames[0], frames[1].ev)

    gt = scene.ground_truth.pixels
    valid = (
        (interior(well_exposed(frames[1])) > 0)
        & (interior(well_exposed(aligned.i1)) > 0)
    )

    def mae(h: np.ndarray) -> float:
        diff = np.abs(np.clip(interior(h), 0, 1) - interior(gt)).mean(axis=2)
        return float(diff[valid].mean())

    assert mae(aligned.h1.pixels) * 5 <= mae(unaligned.pixels)
    # the reference frame is never altered
    np.testing.assert_array_equal(aligned.i2.pixels, frames[1].pixels)


def test_align_stack_without_prealignment_keeps_frames(make_scene):
    scene = make_scene(motion="shift", size=32)
    aligned = align_stack(scene.frames, FlowEstimatorSpec(), prealign=False)
    np.testing.assert_array_equal(aligned.i1.pixels, scene.frames[0].pixels)
    np.testing.assert_array_equal(aligned.i3.pixels, scene.frames[2].pixels)
    assert not np.any(aligned.flow_1.vectors)


def test_warp_is_linear_in_the_source(rng):
    x = rng.uniform(0, 1, (16, 16, 3))
    y = rng.uniform(0, 1, (16, 16, 3))
    flow = rng.uniform(-3, 3, (16, 16, 2))
    np.testing.assert_allclose(
        warp(2.0 * x + 3.0 * y, flow), 2.0 * warp(x, flow) + 3.0 * warp(y, flow), atol=1e-6
    )


def test_fractional_warp_of_saturated_frame_stays_in_range(rng):
    frame = ExposureImage(pixels=np.ones((12, 12, 3)), ev=2.0)
    out = warp(frame, rng.uniform(-2.5, 2.5, (12, 12, 2)))
    assert isinstance(out, ExposureImage)
    assert out.ev == 2.0
    assert out.pixels.max() <= 1.0
    np.testing.assert_allclose(out.pixels, 1.0)


def test_rect_scene_alignment_feeds_network_input(make_scene):
    scene = make_scene(motion="rect", seed=1)
    aligned = align_stack(scene.frames, FlowEstimatorSpec())
    for frame in (aligned.i1, aligned.i3):
        assert 0.0 <= frame.pixels.min()
        assert frame.pixels.max() <= 1.0

    x = NetworkInput.from_frames(
        (aligned.i1, aligned.i2, aligned.i3), (aligned.h1, aligned.h2, aligned.h3)
    )
    assert all(0.0 <= f.min() and f.max() <= 1.0 for f in x.frames)


def _smooth_radiance(rng: np.random.Generator, size: int) -> np.ndarray:
    texture = gaussian_filter(rng.standard_normal((size, size, 3)), sigma=(2.0, 2.0, 0))
    texture = (texture - texture.min()) / (texture.max() - texture.min())
    return 0.05 + 0.3 * texture


def _endpoint_error(radiance: np.ndarray, ev: float, d: np.ndarray) -> float:
    gamma = 2.2
    ref = ExposureImage(pixels=radiance ** (1 / gamma), ev=0.0)
    moved = warp(radiance, -np.broadcast_to(d, radiance.shape[:2] + (2,)))
    src = ExposureImage(pixels=(moved * 2.0**ev) ** (1 / gamma), ev=ev)
    flow = estimate_flow(ref, exposure_compensate(src, 0.0), FlowEstimatorSpec())
    return float(np.linalg.norm(interior(flow.vectors) - d, axis=2).mean())


def test_exposure_compensation_keeps_flow_accuracy(rng):
    radiance = _smooth_radiance(rng, 64)
    d = np.array([2.0, 1.0])
    equal = _endpoint_error(radiance, 0.0, d)
    darker = _endpoint_error(radiance, -1.0, d)
    assert equal < 0.5
    assert darker <= 2 * equal + 1e-6
