"""Two-phase training: the structure-focused network, then the reconstruction network."""

import sys
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn
from tqdm import tqdm

from app.core.config import settings
from app.core.exceptions import ConfigError, MissingArtifactError, NumericError
from app.core.logging import setup_logger
from app.models.networks import build_model, forward
from app.schemas.config import TrainConfig
from app.schemas.images import ExposureImage, HdrImage
from app.schemas.reports import PhaseReport
from app.schemas.scene import Scene, SupervisionArtifacts
from app.services.losses import (
    FeatureExtractor,
    build_extractor,
    objective_reconstruction,
    objective_structure,
)
from app.services.metrics import psnr_u
from app.services.supervision import SupervisionService, raw_network_input

logger = setup_logger(__name__)

Batch = Dict[str, torch.Tensor]


@dataclass
class TrainingSample:
    """Full-resolution, channel-last arrays of one scene, cropped jointly."""

    scene_id: str
    inputs: np.ndarray  # H×W×18, raw (unaligned) stack
    h2: np.ndarray
    y_color: np.ndarray
    m_sp: np.ndarray
    m_se: np.ndarray
    y_stru: Optional[np.ndarray] = None
    m_color: Optional[np.ndarray] = None

    def arrays(self) -> Dict[str, np.ndarray]:
        named = {
            "inputs": self.inputs,
            "h2": self.h2,
            "y_color": self.y_color,
            "m_sp": self.m_sp,
            "m_se": self.m_se,
        }
        if self.y_stru is not None:
            named["y_stru"] = self.y_stru
        if self.m_color is not None:
            named["m_color"] = self.m_color
        return named

    @property
    def shape(self) -> Tuple[int, int]:
        return self.inputs.shape[:2]


def lr_schedule(epoch: int, cfg: TrainConfig) -> float:
    """Step decay: ``lr0 * 0.5^floor(epoch / period)``."""
    return cfg.lr0 * 0.5 ** (epoch // cfg.lr_halving_period)


class PatchSampler:
    """Seeded uniform sampler of top-left crop corners."""

    def __init__(self, height: int, width: int, patch_size: int, seed: int = 0) -> None:
        if patch_size > min(height, width):
            raise ConfigError(
                f"patch_size {patch_size} exceeds image size {height}x{width}"
            )
        self.height = height
        self.width = width
        self.patch_size = patch_size
        self.rng = np.random.default_rng(seed)

    def corner(self) -> Tuple[int, int]:
        y = int(self.rng.integers(0, self.height - self.patch_size + 1))
        x = int(self.rng.integers(0, self.width - self.patch_size + 1))
        return y, x

    def sample(self, count: int) -> List[Tuple[int, int]]:
        return [self.corner() for _ in range(count)]

    def crop(self, array: np.ndarray, corner: Tuple[int, int]) -> np.ndarray:
        y, x = corner
        return array[y : y + self.patch_size, x : x + self.patch_size]


def _augment(arrays: Dict[str, np.ndarray], rng: np.random.Generator) -> Dict[str, np.ndarray]:
    k = int(rng.integers(0, 4))
    flip = bool(rng.integers(0, 2))
    out = {}
    for name, arr in arrays.items():
        arr = np.rot90(arr, k, axes=(0, 1))
        if flip:
            arr = arr[:, ::-1]
        out[name] = np.ascontiguousarray(arr)
    return out


def _to_tensor(batch: List[np.ndarray], device: str) -> torch.Tensor:
    stacked = np.stack(batch).transpose(0, 3, 1, 2)
    return torch.from_numpy(np.ascontiguousarray(stacked, dtype=np.float32)).to(device)


def build_training_samples(
    scenes: Sequence[Scene],
    artifacts: Sequence[SupervisionArtifacts],
    cfg: TrainConfig,
    phase: str = "structure",
) -> List[TrainingSample]:
    """
    Join scenes with their supervision.

    Network inputs are the raw stacks; the ablation switches decide which masks are used.

    Raises:
        MissingArtifactError: If a scene lacks supervision, or the structure component
            for ``phase="recon"``
    """
    by_id = {a.scene_id: a for a in artifacts}
    ablation = cfg.ablation
    samples = []
    for scene in scenes:
        art = by_id.get(scene.scene_id)
        if art is None:
            raise MissingArtifactError(f"No supervision artifacts for scene {scene.scene_id}")
        if phase == "recon" and not art.has_structure:
            raise MissingArtifactError(
                f"Scene {scene.scene_id} has no structure component; "
                f"train the structure phase and rebuild supervision with it"
            )

        x = raw_network_input(scene.frames, cfg.radiometry)
        m_sp = art.m_sp.values if ablation.use_mask_sp else np.ones_like(art.m_sp.values)
        m_se = art.m_se.values if ablation.use_mask_se else np.ones_like(art.m_se.values)

        m_color = None
        if art.m_color is not None:
            if ablation.color_mask == "color":
                m_color = art.m_color.values
            elif ablation.color_mask == "se":
                m_color = art.m_se.values
            else:
                m_color = np.ones_like(art.m_color.values)

        samples.append(
            TrainingSample(
                scene_id=scene.scene_id,
                inputs=np.concatenate(x.frames, axis=2),
                h2=np.clip(x.frames[1][..., 3:], 0.0, 1.0),
                y_color=art.y_color.pixels,
                m_sp=m_sp,
                m_se=m_se,
                y_stru=art.y_stru.pixels if art.y_stru is not None else None,
                m_color=m_color,
            )
        )
    return samples


def _epoch_batches(
    samples: Sequence[TrainingSample],
    cfg: TrainConfig,
    rng: np.random.Generator,
    device: str,
) -> List[Batch]:
    """All crops of one epoch, in a seed-determined order."""
    crops: List[Dict[str, np.ndarray]] = []
    for index in rng.permutation(len(samples)):
        sample = samples[index]
        height, width = sample.shape
        sampler = PatchSampler(height, width, cfg.patch_size, seed=int(rng.integers(0, 2**31 - 1)))
        for corner in sampler.sample(cfg.patches_per_scene):
            crop = {name: sampler.crop(arr, corner) for name, arr in sample.arrays().items()}
            if cfg.augment:
                crop = _augment(crop, rng)
            crops.append(crop)

    order = rng.permutation(len(crops))
    batches = []
    for start in range(0, len(order), cfg.batch_size):
        chunk = [crops[i] for i in order[start : start + cfg.batch_size]]
        batches.append({name: _to_tensor([c[name] for c in chunk], device) for name in chunk[0]})
    return batches


def _configure_torch(seed: int) -> None:
    torch.manual_seed(seed)
    if settings.NUM_THREADS:
        torch.set_num_threads(settings.NUM_THREADS)
    torch.use_deterministic_algorithms(settings.DETERMINISTIC, warn_only=True)


def infer(
    model: nn.Module,
    frames: Tuple[ExposureImage, ExposureImage, ExposureImage],
    cfg: Optional[TrainConfig] = None,
    device: Optional[str] = None,
) -> HdrImage:
    """Predict HDR from a raw stack; no flow is computed at test time."""
    cfg = cfg or TrainConfig()
    return forward(
        model,
        raw_network_input(frames, cfg.radiometry),
        role="prediction",
        device=device or settings.DEVICE,
    )


def validation_psnr_u(
    model: nn.Module, scenes: Sequence[Scene], cfg: TrainConfig, device: str
) -> Optional[float]:
    """Mean PSNR-u on scenes that carry ground truth; None when there are none."""
    values = [
        psnr_u(infer(model, s.frames, cfg, device), s.ground_truth, cfg.radiometry)
        for s in scenes
        if s.ground_truth is not None
    ]
    if not values:
        return None
    return float(np.mean(values))


def _fit(
    phase: str,
    samples: Sequence[TrainingSample],
    loss_fn: Callable[[torch.Tensor, Batch], torch.Tensor],
    cfg: TrainConfig,
    val_scenes: Sequence[Scene],
    device: str,
) -> Tuple[nn.Module, PhaseReport]:
    if not samples:
        raise MissingArtifactError(f"No training samples for the {phase} phase")
    started = time.perf_counter()
    _configure_torch(cfg.seed)
    rng = np.random.default_rng(cfg.seed)

    model = build_model(cfg.model).to(device)
    model.train()
    optimizer = torch.optim.Adam(
        model.parameters(), lr=cfg.lr0, betas=(cfg.beta1, cfg.beta2)
    )

    curve: List[float] = []
    progress = tqdm(
        range(cfg.epochs),
        desc=f"train[{phase}]",
        disable=not sys.stderr.isatty(),
    )
    for epoch in progress:
        lr = lr_schedule(epoch, cfg)
        for group in optimizer.param_groups:
            group["lr"] = lr

        total, count = 0.0, 0
        for batch in _epoch_batches(samples, cfg, rng, device):
            optimizer.zero_grad()
            y_hat = model(batch["inputs"])
            loss = loss_fn(y_hat, batch)
            if not torch.isfinite(loss):
                raise NumericError(
                    f"Non-finite {phase} loss at epoch {epoch}",
                    details={"phase": phase, "epoch": epoch},
                )
            loss.backward()
            optimizer.step()
            size = batch["inputs"].shape[0]
            total += float(loss.item()) * size
            count += size

        curve.append(total / count)
        progress.set_postfix(loss=f"{curve[-1]:.5f}")
        logger.debug(
            f"Epoch done phase={phase} epoch={epoch} lr={lr:.2e} loss={curve[-1]:.6f}",
            extra={"phase": phase, "epoch": epoch, "loss": curve[-1]},
        )

    val = validation_psnr_u(model, val_scenes, cfg, device)
    model.eval()
    report = PhaseReport(
        phase=phase,
        epochs=cfg.epochs,
        seed=cfg.seed,
        loss_curve=curve,
        val_psnr_u=val,
        wall_time_s=time.perf_counter() - started,
    )
    logger.info(
        f"Finished {phase} phase epochs={cfg.epochs} first_loss={curve[0]:.6f} "
        f"last_loss={curve[-1]:.6f} val_psnr_u={val}"
    )
    return model, report


def train_structure_phase(
    scenes: Sequence[Scene],
    artifacts: Sequence[SupervisionArtifacts],
    cfg: TrainConfig,
    val_scenes: Sequence[Scene] = (),
    device: Optional[str] = None,
) -> Tuple[nn.Module, PhaseReport]:
    """
    Train the structure-focused network on the structure-preserving/expansion objective.

    Args:
        scenes: Training scenes; the network sees their raw, unaligned stacks
        artifacts: Color supervision (Y_color, M_sp, M_se) of every training scene
        cfg: Training configuration
        val_scenes: Held-out scenes with ground truth for the final PSNR-u
        device: torch device (defaults to ``settings.DEVICE``)

    Returns:
        Trained model in eval mode and its PhaseReport

    Raises:
        MissingArtifactError: If a scene has no supervision
    """
    samples = build_training_samples(scenes, artifacts, cfg, phase="structure")
    mu = cfg.radiometry.mu

    def loss_fn(y_hat: torch.Tensor, batch: Batch) -> torch.Tensor:
        return objective_structure(
            y_hat,
            batch["y_color"],
            batch["h2"],
            batch["m_se"],
            batch["m_sp"],
            cfg.loss,
            cfg.ablation,
            mu,
        )

    return _fit("structure", samples, loss_fn, cfg, val_scenes, device or settings.DEVICE)


def train_reconstruction_phase(
    scenes: Sequence[Scene],
    artifacts: Sequence[SupervisionArtifacts],
    structure_model: Optional[nn.Module],
    cfg: TrainConfig,
    extractor: Optional[FeatureExtractor] = None,
    val_scenes: Sequence[Scene] = (),
    device: Optional[str] = None,
) -> Tuple[nn.Module, PhaseReport]:
    """
    Train the reconstruction network on the color-mapping + perceptual objective.

    Structure components missing from ``artifacts`` are generated with
    ``structure_model``; the structure model and the extractor are never updated.

    Raises:
        MissingArtifactError: If a structure component is missing and no model is given
    """
    device = device or settings.DEVICE
    samples = prepare_reconstruction_samples(scenes, artifacts, cfg, structure_model, device)
    extractor = (extractor or build_extractor(cfg.loss)).to(device)
    mu = cfg.radiometry.mu

    def loss_fn(y_hat: torch.Tensor, batch: Batch) -> torch.Tensor:
        return objective_reconstruction(
            y_hat,
            batch["y_color"],
            batch["y_stru"],
            batch["m_color"],
            extractor,
            cfg.loss,
            mu,
        )

    return _fit("recon", samples, loss_fn, cfg, val_scenes, device)


def prepare_reconstruction_samples(
    scenes: Sequence[Scene],
    artifacts: Sequence[SupervisionArtifacts],
    cfg: TrainConfig,
    structure_model: Optional[nn.Module] = None,
    device: str = "cpu",
) -> List[TrainingSample]:
    """Reconstruction samples, generating missing structure components with ``structure_model``."""
    artifacts = list(artifacts)
    if any(not a.has_structure for a in artifacts):
        if structure_model is None:
            raise MissingArtifactError(
                "Structure components are missing and no structure-focused model was given"
            )
        supervision = SupervisionService(cfg, device=device)
        by_id = {s.scene_id: s for s in scenes}
        artifacts = [
            a
            if a.has_structure or a.scene_id not in by_id
            else supervision.add_structure(by_id[a.scene_id], a, structure_model)
            for a in artifacts
        ]
    return build_training_samples(scenes, artifacts, cfg, phase="recon")
