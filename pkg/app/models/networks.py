"""Merging networks shared by the structure-focused and reconstruction phases.

Both networks take the three bracketed frames as one ``(N, 18, H, W)`` tensor, frame by
frame ``concat(I_i, H_i)``, and return ``(N, 3, H, W)`` linear HDR in [0, 1].
"""

from typing import Callable, Dict, Optional, Tuple

import numpy as np
import torch
from torch import nn

from app.core.exceptions import ModelError, ShapeMismatchError
from app.core.logging import setup_logger
from app.schemas.config import ModelSpec
from app.schemas.images import HdrImage
from app.schemas.scene import NetworkInput

logger = setup_logger(__name__)

FRAME_CHANNELS = 6
INPUT_CHANNELS = 3 * FRAME_CHANNELS


class SpatialAttention(nn.Module):
    """Per-pixel, per-channel weights in [0, 1] for a non-reference feature map."""

    def __init__(self, width: int) -> None:
        super().__init__()
        self.conv1 = nn.Conv2d(2 * width, 2 * width, 3, padding=1)
        self.conv2 = nn.Conv2d(2 * width, width, 3, padding=1)
        self.act = nn.LeakyReLU(0.2)

    def forward(self, feat: torch.Tensor, ref_feat: torch.Tensor) -> torch.Tensor:
        hidden = self.act(self.conv1(torch.cat([feat, ref_feat], dim=1)))
        return torch.sigmoid(self.conv2(hidden))


class DilatedResidualBlock(nn.Module):
    def __init__(self, width: int, dilation: int = 2) -> None:
        super().__init__()
        self.conv1 = nn.Conv2d(width, width, 3, padding=dilation, dilation=dilation)
        self.conv2 = nn.Conv2d(width, width, 3, padding=dilation, dilation=dilation)
        self.act = nn.LeakyReLU(0.2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.conv2(self.act(self.conv1(x)))


class AttentionMergeNet(nn.Module):
    """
    Compact attention-guided merging CNN.

    A shared two-layer encoder embeds every frame; attention maps computed from
    (non-reference, reference) feature pairs gate the non-reference features; a trunk of
    dilated residual blocks merges them, with a global skip from the reference features.
    The sigmoid output keeps predictions in [0, 1] for any parameter values.
    """

    downsampling = 1

    def __init__(self, spec: ModelSpec) -> None:
        super().__init__()
        width = spec.width
        self.spec = spec
        self.encoder = nn.Sequential(
            nn.Conv2d(FRAME_CHANNELS, width, 3, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv2d(width, width, 3, padding=1),
            nn.LeakyReLU(0.2),
        )
        if spec.attention:
            self.attention_1 = SpatialAttention(width)
            self.attention_3 = SpatialAttention(width)
        self.merge = nn.Conv2d(3 * width, width, 3, padding=1)
        self.trunk = nn.Sequential(*[DilatedResidualBlock(width) for _ in range(spec.blocks)])
        self.fuse = nn.Conv2d(width, width, 3, padding=1)
        self.output = nn.Conv2d(width, 3, 3, padding=1)
        self.act = nn.LeakyReLU(0.2)
        # Last attention maps, for instrumentation
        self.last_attention: Optional[Tuple[torch.Tensor, torch.Tensor]] = None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4 or x.shape[1] != INPUT_CHANNELS:
            raise ShapeMismatchError(
                f"Expected input of shape (N, {INPUT_CHANNELS}, H, W), got {tuple(x.shape)}"
            )
        x1, x2, x3 = torch.split(x, FRAME_CHANNELS, dim=1)
        f1, f2, f3 = self.encoder(x1), self.encoder(x2), self.encoder(x3)

        if self.spec.attention:
            a1 = self.attention_1(f1, f2)
            a3 = self.attention_3(f3, f2)
            self.last_attention = (a1.detach(), a3.detach())
            f1 = f1 * a1
            f3 = f3 * a3

        merged = self.merge(torch.cat([f1, f2, f3], dim=1))
        merged = self.fuse(self.trunk(merged)) + f2
        return torch.sigmoid(self.output(self.act(merged)))


MODEL_REGISTRY: Dict[str, Callable[[ModelSpec], nn.Module]] = {
    "attention_merge": AttentionMergeNet,
}


def build_model(spec: ModelSpec) -> nn.Module:
    """Instantiate ``spec.architecture`` with parameters drawn from ``spec.seed``."""
    factory = MODEL_REGISTRY.get(spec.architecture)
    if factory is None:
        raise ModelError(
            f"Unknown architecture '{spec.architecture}'. Available: {sorted(MODEL_REGISTRY)}"
        )
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(spec.seed)
        model = factory(spec)
    return model.float()


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def input_to_tensor(x: NetworkInput, device: str = "cpu") -> torch.Tensor:
    """NetworkInput -> ``(1, 18, H, W)`` float32 tensor."""
    stacked = np.concatenate(x.frames, axis=2).transpose(2, 0, 1)[None]
    return torch.from_numpy(np.ascontiguousarray(stacked, dtype=np.float32)).to(device)


def tensor_to_image(y: torch.Tensor, role: str = "prediction") -> HdrImage:
    """``(1, 3, H, W)`` tensor -> HdrImage."""
    pixels = y.detach().cpu().double().numpy()[0].transpose(1, 2, 0)
    return HdrImage(pixels=np.clip(pixels, 0.0, 1.0), role=role)


def forward(
    model: nn.Module, x: NetworkInput, role: str = "prediction", device: str = "cpu"
) -> HdrImage:
    """Single eval-mode forward pass on one stack."""
    factor = getattr(model, "downsampling", 1)
    height, width = x.shape
    if height % factor or width % factor:
        raise ShapeMismatchError(
            f"Input size {height}x{width} is not divisible by {factor}"
        )
    model.eval()
    with torch.no_grad():
        y = model(input_to_tensor(x, device))
    return tensor_to_image(y, role=role)
