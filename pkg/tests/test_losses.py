import math

import numpy as np
import pytest
import torch

from app.core.config import settings
from app.core.exceptions import ConfigError, ShapeMismatchError
from app.schemas.config import AblationConfig, LossConfig
from app.services.losses import (
    build_extractor,
    loss_color,
    loss_se,
    loss_sp,
    loss_stru,
    masked_l1,
    objective_reconstruction,
    objective_structure,
    random_pyramid,
    tonemap_tensor,
)

MU = 5000.0


def scalar_tonemap(x: float) -> float:
    x = min(max(x, 0.0), 1.0)
    return math.log(1.0 + MU * x) / math.log(1.0 + MU)


def random_tensors(gen: torch.Generator, shape=(1, 3, 8, 8), binary_mask=True):
    y_hat = torch.rand(shape, generator=gen, dtype=torch.float64) * 0.9 + 0.05
    target = torch.rand(shape, generator=gen, dtype=torch.float64) * 0.9 + 0.05
    mask = torch.rand(shape, generator=gen, dtype=torch.float64)
    if binary_mask:
        mask = (mask > 0.3).double()
    return y_hat, target, mask


def test_masked_l1_matches_scalar_formula():
    gen = torch.Generator().manual_seed(0)
    for _ in range(50):
        y_hat, target, mask = random_tensors(gen, binary_mask=False)
        value = masked_l1(y_hat, target, mask).item()
        flat = zip(y_hat.flatten().tolist(), target.flatten().tolist(), mask.flatten().tolist())
        expected = sum(abs((scalar_tonemap(a) - scalar_tonemap(b)) * m) for a, b, m in flat)
        expected /= y_hat.numel()
        assert abs(value - expected) < 1e-6


def test_term_aliases_share_the_masked_l1():
    gen = torch.Generator().manual_seed(1)
    y_hat, target, mask = random_tensors(gen)
    reference = masked_l1(y_hat, target, mask)
    for term in (loss_sp, loss_se, loss_color):
        assert torch.equal(term(y_hat, target, mask), reference)


def test_tonemap_tensor_clamps_predictions():
    x = torch.tensor([-0.5, 0.0, 1.0, 2.0])
    np.testing.assert_allclose(tonemap_tensor(x).numpy(), [0.0, 0.0, 1.0, 1.0], atol=1e-6)


def test_loss_rejects_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        masked_l1(torch.zeros(1, 3, 4, 4), torch.zeros(1, 3, 4, 5), torch.zeros(1, 3, 4, 4))


def test_zero_mask_gives_zero_loss():
    gen = torch.Generator().manual_seed(2)
    y_hat, target, _ = random_tensors(gen)
    assert masked_l1(y_hat, target, torch.zeros_like(y_hat)).item() == 0.0


@pytest.mark.parametrize("term", [loss_sp, loss_se, loss_color])
def test_l1_terms_pass_gradient_check(term):
    gen = torch.Generator().manual_seed(3)
    for _ in range(20):
        y_hat, target, mask = random_tensors(gen, shape=(1, 3, 4, 4))
        y_hat.requires_grad_(True)
        assert torch.autograd.gradcheck(
            lambda y: term(y, target, mask), (y_hat,), eps=1e-7, atol=1e-8, rtol=1e-4
        )


def test_perceptual_term_passes_gradient_check():
    extractor = random_pyramid([3, 8], seed=0).double()
    gen = torch.Generator().manual_seed(4)
    for _ in range(20):
        y_hat, y_stru, _ = random_tensors(gen, shape=(1, 3, 8, 8))
        y_hat.requires_grad_(True)
        assert torch.autograd.gradcheck(
            lambda y: loss_stru(y, y_stru, extractor), (y_hat,), eps=1e-8, atol=1e-6, rtol=1e-3
        )


def test_perceptual_term_is_zero_for_identical_images():
    extractor = random_pyramid([3, 8, 15], seed=0)
    y = torch.rand(1, 3, 16, 16)
    assert loss_stru(y, y.clone(), extractor).item() == 0.0


def test_extractor_is_frozen():
    extractor = random_pyramid([3, 8, 15], seed=0)
    assert all(not p.requires_grad for p in extractor.parameters())
    extractor.train()
    assert not extractor.training
    features = extractor(torch.rand(2, 3, 16, 16))
    assert len(features) == 3
    assert features[0].shape == (2, 8, 16, 16)
    assert features[1].shape == (2, 16, 8, 8)
    assert features[2].shape == (2, 32, 4, 4)


def test_extractor_rejects_missing_layer():
    with pytest.raises(ConfigError):
        random_pyramid([40])


def test_random_pyramid_is_seeded():
    x = torch.rand(1, 3, 8, 8)
    a = random_pyramid([3], seed=7)(x)[0]
    b = random_pyramid([3], seed=7)(x)[0]
    c = random_pyramid([3], seed=8)(x)[0]
    assert torch.equal(a, b)
    assert not torch.equal(a, c)


def test_vgg_backbone_falls_back_without_pretrained_weights():
    extractor = build_extractor(LossConfig(perceptual_backbone="vgg19"), allow_pretrained=False)
    assert extractor.name == "random"


def test_default_backbone_is_pretrained_with_random_fallback(monkeypatch):
    assert LossConfig().perceptual_backbone == "vgg19"
    monkeypatch.setattr(settings, "ALLOW_PRETRAINED_WEIGHTS", False)
    extractor = build_extractor(LossConfig())
    assert extractor.name == "random"
    x = torch.rand(1, 3, 8, 8)
    expected = random_pyramid(LossConfig().perceptual_layers, seed=0)(x)
    assert all(torch.equal(a, b) for a, b in zip(extractor(x), expected))


def test_structure_objective_weights_and_switches():
    gen = torch.Generator().manual_seed(5)
    y_hat, y_color, m_se = random_tensors(gen)
    _, h2, m_sp = random_tensors(gen, binary_mask=False)
    cfg = LossConfig(lambda_sp=4.0)

    full = objective_structure(y_hat, y_color, h2, m_se, m_sp, cfg)
    expected = loss_se(y_hat, y_color, m_se) + 4.0 * loss_sp(y_hat, h2, m_sp)
    assert torch.allclose(full, expected)

    se_only = objective_structure(
        y_hat, y_color, h2, m_se, m_sp, cfg, AblationConfig(use_loss_sp=False)
    )
    assert torch.allclose(se_only, loss_se(y_hat, y_color, m_se))

    no_mask = objective_structure(
        y_hat, y_color, h2, m_se, m_sp, cfg, AblationConfig(use_mask_se=False)
    )
    ones = torch.ones_like(m_se)
    assert torch.allclose(no_mask, loss_se(y_hat, y_color, ones) + 4.0 * loss_sp(y_hat, h2, m_sp))

    with pytest.raises(ConfigError):
        objective_structure(
            y_hat, y_color, h2, m_se, m_sp, cfg,
            AblationConfig(use_loss_se=False, use_loss_sp=False),
        )


def test_reconstruction_objective_combines_terms():
    gen = torch.Generator().manual_seed(6)
    y_hat, y_color, m_color = random_tensors(gen, shape=(1, 3, 16, 16))
    _, y_stru, _ = random_tensors(gen, shape=(1, 3, 16, 16))
    extractor = random_pyramid([3, 8], seed=0).double()

    total = objective_reconstruction(y_hat, y_color, y_stru, m_color, extractor, LossConfig())
    expected = loss_color(y_hat, y_color, m_color) + loss_stru(y_hat, y_stru, extractor)
    assert torch.allclose(total, expected)

    color_only = objective_reconstruction(
        y_hat, y_color, y_stru, m_color, extractor, LossConfig(lambda_stru=0.0)
    )
    assert torch.allclose(color_only, loss_color(y_hat, y_color, m_color))
