"""Training objectives.

Tensors are ``(N, 3, H, W)``. Every L1 term is a mean over all elements, not over the
mask support, and predictions are clamped to [0, 1] before tone mapping.
"""

import math
from typing import List, Optional, Sequence

import torch
from torch import nn

from app.core.config import settings
from app.core.exceptions import ConfigError, ModelError, ShapeMismatchError
from app.core.logging import setup_logger
from app.schemas.config import AblationConfig, LossConfig

logger = setup_logger(__name__)

DEFAULT_MU = 5000.0

_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)

# VGG19 "features" layout up to relu3_4: conv/act pairs and pools
_VGG_LAYOUT = [
    ("conv", 64), ("act",), ("conv", 64), ("act",), ("pool",),
    ("conv", 128), ("act",), ("conv", 128), ("act",), ("pool",),
    ("conv", 256), ("act",), ("conv", 256), ("act",), ("conv", 256), ("act",),
    ("conv", 256), ("act",),
]


def tonemap_tensor(x: torch.Tensor, mu: float = DEFAULT_MU) -> torch.Tensor:
    """Differentiable mu-law on values clamped to [0, 1]."""
    return torch.log1p(mu * torch.clamp(x, 0.0, 1.0)) / math.log1p(mu)


def _check_shapes(*tensors: torch.Tensor) -> None:
    shapes = {tuple(t.shape) for t in tensors}
    if len(shapes) > 1:
        raise ShapeMismatchError(f"Loss inputs differ in shape: {sorted(shapes)}")


def masked_l1(
    y_hat: torch.Tensor, target: torch.Tensor, mask: torch.Tensor, mu: float = DEFAULT_MU
) -> torch.Tensor:
    """``mean |(T(y_hat) - T(target)) * mask|``."""
    _check_shapes(y_hat, target, mask)
    diff = tonemap_tensor(y_hat, mu) - tonemap_tensor(target, mu)
    return torch.abs(diff * mask).mean()


def loss_sp(y_hat, h2, m_sp, mu: float = DEFAULT_MU) -> torch.Tensor:
    """Structure-preserving term against the reference exposure."""
    return masked_l1(y_hat, h2, m_sp, mu)


def loss_se(y_hat, y_color, m_se, mu: float = DEFAULT_MU) -> torch.Tensor:
    """Structure-expansion term against the color component."""
    return masked_l1(y_hat, y_color, m_se, mu)


def loss_color(y_hat, y_color, m_color, mu: float = DEFAULT_MU) -> torch.Tensor:
    """Color-mapping term against the color component."""
    return masked_l1(y_hat, y_color, m_color, mu)


class FeatureExtractor(nn.Module):
    """Frozen convolutional feature stack returning activations at the tap layers."""

    in_channels = 3

    def __init__(
        self, layers: nn.Sequential, taps: Sequence[int], normalize: bool, name: str
    ) -> None:
        super().__init__()
        if not taps:
            raise ConfigError("Perceptual loss needs at least one feature layer")
        if max(taps) >= len(layers):
            raise ConfigError(
                f"Feature layer {max(taps)} does not exist in a {len(layers)}-layer {name} stack"
            )
        self.layers = layers
        self.taps = sorted(taps)
        self.normalize = normalize
        self.name = name
        self.register_buffer("mean", torch.tensor(_IMAGENET_MEAN).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(_IMAGENET_STD).view(1, 3, 1, 1))
        for param in self.parameters():
            param.requires_grad = False
        self.eval()

    def train(self, mode: bool = True) -> "FeatureExtractor":
        # Always frozen
        return super().train(False)

    def forward(self, x: torch.Tensor) -> List[torch.Tensor]:
        if x.dim() != 4 or x.shape[1] != self.in_channels:
            raise ShapeMismatchError(
                f"{self.name} extractor expects (N, {self.in_channels}, H, W), got {tuple(x.shape)}"
            )
        if self.normalize:
            x = (x - self.mean) / self.std
        features = []
        last = self.taps[-1]
        for index, layer in enumerate(self.layers):
            x = layer(x)
            if index in self.taps:
                features.append(x)
            if index == last:
                break
        return features


def random_pyramid(taps: Sequence[int], seed: int = 0) -> FeatureExtractor:
    """Fixed-seed random stack with VGG19 layer indexing, narrow widths and tanh/avg-pool."""
    depth = max(taps) + 1
    if depth > len(_VGG_LAYOUT):
        raise ConfigError(
            f"Random pyramid has {len(_VGG_LAYOUT)} layers, tap {max(taps)} requested"
        )
    modules: List[nn.Module] = []
    channels = 3
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        for entry in _VGG_LAYOUT[:depth]:
            if entry[0] == "conv":
                width = entry[1] // 8
                modules.append(nn.Conv2d(channels, width, 3, padding=1))
                channels = width
            elif entry[0] == "act":
                modules.append(nn.Tanh())
            else:
                modules.append(nn.AvgPool2d(2))
    return FeatureExtractor(nn.Sequential(*modules), taps, normalize=False, name="random")


def _vgg19(taps: Sequence[int]) -> FeatureExtractor:
    from torchvision.models import VGG19_Weights, vgg19

    features = vgg19(weights=VGG19_Weights.IMAGENET1K_V1).features[: max(taps) + 1]
    for module in features:
        if isinstance(module, nn.ReLU):
            module.inplace = False
    return FeatureExtractor(features, taps, normalize=True, name="vgg19")


def build_extractor(
    cfg: Optional[LossConfig] = None, allow_pretrained: Optional[bool] = None
) -> FeatureExtractor:
    """
    Build the frozen perceptual feature stack.

    ``vgg19`` needs ``ALLOW_PRETRAINED_WEIGHTS``; without it, or when the weights cannot
    be loaded, the random pyramid is used instead.
    """
    cfg = cfg or LossConfig()
    if allow_pretrained is None:
        allow_pretrained = settings.ALLOW_PRETRAINED_WEIGHTS

    if cfg.perceptual_backbone == "vgg19":
        if allow_pretrained:
            try:
                return _vgg19(cfg.perceptual_layers)
            except ConfigError:
                raise
            except Exception as e:
                logger.warning(f"VGG19 weights unavailable, using random pyramid: {str(e)}")
        else:
            logger.warning("Pretrained weights not allowed, using random pyramid extractor")
    elif cfg.perceptual_backbone != "random":
        raise ModelError(f"Unknown perceptual backbone '{cfg.perceptual_backbone}'")

    return random_pyramid(cfg.perceptual_layers, cfg.extractor_seed)


def loss_stru(
    y_hat: torch.Tensor,
    y_stru: torch.Tensor,
    extractor: FeatureExtractor,
    mu: float = DEFAULT_MU,
) -> torch.Tensor:
    """Perceptual structure term: sum over taps of mean feature L1 distances."""
    _check_shapes(y_hat, y_stru)
    pred_features = extractor(tonemap_tensor(y_hat, mu))
    with torch.no_grad():
        target_features = extractor(tonemap_tensor(y_stru, mu))
    total = y_hat.new_zeros(())
    for pred, target in zip(pred_features, target_features):
        total = total + torch.abs(pred - target).mean()
    return total


def objective_structure(
    y_hat: torch.Tensor,
    y_color: torch.Tensor,
    h2: torch.Tensor,
    m_se: torch.Tensor,
    m_sp: torch.Tensor,
    cfg: Optional[LossConfig] = None,
    ablation: Optional[AblationConfig] = None,
    mu: float = DEFAULT_MU,
) -> torch.Tensor:
    """``loss_se + lambda_sp * loss_sp`` with the ablation switches applied."""
    cfg = cfg or LossConfig()
    ablation = ablation or AblationConfig()
    if not (ablation.use_loss_se or ablation.use_loss_sp):
        raise ConfigError("Structure objective needs at least one of loss_se / loss_sp")

    total = y_hat.new_zeros(())
    if ablation.use_loss_se:
        mask = m_se if ablation.use_mask_se else torch.ones_like(m_se)
        total = total + loss_se(y_hat, y_color, mask, mu)
    if ablation.use_loss_sp:
        mask = m_sp if ablation.use_mask_sp else torch.ones_like(m_sp)
        total = total + cfg.lambda_sp * loss_sp(y_hat, h2, mask, mu)
    return total


def objective_reconstruction(
    y_hat: torch.Tensor,
    y_color: torch.Tensor,
    y_stru: torch.Tensor,
    m_color: torch.Tensor,
    extractor: FeatureExtractor,
    cfg: Optional[LossConfig] = None,
    mu: float = DEFAULT_MU,
) -> torch.Tensor:
    """``loss_color + lambda_stru * loss_stru``."""
    cfg = cfg or LossConfig()
    total = loss_color(y_hat, y_color, m_color, mu)
    if cfg.lambda_stru > 0:
        total = total + cfg.lambda_stru * loss_stru(y_hat, y_stru, extractor, mu)
    return total
