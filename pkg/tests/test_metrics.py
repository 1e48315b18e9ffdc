import json
import math

import numpy as np
import pytest

from app.core.exceptions import ShapeMismatchError
from app.schemas.images import HdrImage
from app.services.metrics import (
    aggregate,
    evaluate,
    format_table_row,
    psnr,
    psnr_u,
    ssim,
    ssim_u,
)
from app.services.radiometry import tonemap


def test_psnr_matches_scalar_formula(rng):
    for _ in range(50):
        a = rng.uniform(0, 1, (8, 8, 3))
        b = rng.uniform(0, 1, (8, 8, 3))
        mse = sum((x - y) ** 2 for x, y in zip(a.flatten(), b.flatten())) / a.size
        assert abs(psnr(a, b) - 10 * math.log10(1.0 / mse)) < 1e-9


def test_psnr_of_identical_images_is_infinite(rng):
    a = rng.uniform(0, 1, (4, 4, 3))
    assert psnr(a, a.copy()) == math.inf


def test_psnr_u_uses_tone_mapped_values(rng):
    a = rng.uniform(0, 1, (8, 8, 3))
    b = np.clip(a + 0.01, 0, 1)
    assert psnr_u(a, b) == pytest.approx(psnr(tonemap(a), tonemap(b)))


def test_ssim_bounds(rng):
    a = rng.uniform(0, 1, (32, 32, 3))
    assert ssim(a, a) == pytest.approx(1.0)
    noisy = np.clip(a + rng.normal(0, 0.2, a.shape), 0, 1)
    value = ssim(a, noisy)
    assert -1.0 <= value < 0.95
    assert ssim_u(a, a) == pytest.approx(1.0)


def test_metrics_reject_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        psnr(np.zeros((2, 2, 3)), np.zeros((2, 3, 3)))
    with pytest.raises(ShapeMismatchError):
        ssim(np.zeros((16, 16, 3)), np.zeros((16, 17, 3)))


def test_evaluate_and_aggregate(rng):
    gt = HdrImage(pixels=rng.uniform(0, 1, (16, 16, 3)), role="ground_truth")
    near = HdrImage(pixels=np.clip(gt.pixels + 0.01, 0, 1))
    far = HdrImage(pixels=np.clip(gt.pixels + 0.1, 0, 1))

    rows = [evaluate(near, gt, scene_id="a"), evaluate(far, gt, scene_id="b")]
    assert rows[0].psnr_u > rows[1].psnr_u
    assert rows[0].hdr_vdp2 is None

    report = aggregate("method", rows)
    assert report.mean.psnr_l == pytest.approx((rows[0].psnr_l + rows[1].psnr_l) / 2)
    assert [s.scene_id for s in report.scenes] == ["a", "b"]

    row = format_table_row("method", report)
    assert row.startswith("method | ")
    assert row.endswith("| -")
    assert row.count("|") == 3


def test_report_serializes_infinite_psnr(rng):
    gt = HdrImage(pixels=rng.uniform(0, 1, (16, 16, 3)))
    report = aggregate("exact", [evaluate(gt, gt, scene_id="a")])
    payload = json.loads(report.model_dump_json())
    assert payload["mean"]["psnr_u"] == math.inf


def test_aggregate_rejects_empty():
    with pytest.raises(ValueError):
        aggregate("nothing", [])


def test_constant_offset_gives_twenty_db(rng):
    a = rng.uniform(0, 0.8, (16, 16, 3))
    assert psnr(a, a + 0.1) == pytest.approx(20.0, abs=1e-9)


def test_psnr_u_decreases_with_noise_level(rng):
    a = rng.uniform(0.2, 0.8, (32, 32, 3))
    noise = rng.normal(0, 1, a.shape)
    values = [psnr_u(a, np.clip(a + s * noise, 0, 1)) for s in (0.005, 0.01, 0.02, 0.05)]
    assert all(x > y for x, y in zip(values, values[1:]))


def test_ssim_of_inverted_image_is_low(rng):
    a = rng.uniform(0, 1, (32, 32, 3))
    assert ssim(a, 1.0 - a) < 0.5


def test_ssim_ignores_a_shared_offset(rng):
    a = rng.uniform(0.2, 0.8, (32, 32, 3))
    b = a + rng.normal(0, 0.05, a.shape)
    assert abs(ssim(a + 0.05, b + 0.05) - ssim(a, b)) < 1e-3
