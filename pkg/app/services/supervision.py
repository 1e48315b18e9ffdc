"""Color / structure components and their masks."""

from typing import Dict, List, Optional, Tuple

import numpy as np
from torch import nn

from app.core.exceptions import MissingArtifactError
from app.core.logging import setup_logger
from app.models.networks import forward
from app.repositories.supervision_repo import SupervisionRepositoryProtocol
from app.schemas.config import (
    FlowEstimatorSpec,
    RadiometryConfig,
    ThresholdConfig,
    TrainConfig,
)
from app.schemas.images import (
    ExposureImage,
    HdrImage,
    LinearImage,
    Mask,
    require_same_shape,
)
from app.schemas.scene import AlignedStack, NetworkInput, Scene, SupervisionArtifacts
from app.services.alignment import align_stack
from app.services.radiometry import fuse_color, linearize, tonemap, triangle_weights

logger = setup_logger(__name__)


def _binary(passed: np.ndarray) -> Mask:
    """Per-channel pass map -> H×W×3 binary mask, AND across channels."""
    pixel = np.all(passed, axis=2, keepdims=True)
    return Mask(values=np.repeat(pixel, 3, axis=2).astype(np.float64))


def mask_sp(i2: ExposureImage, cfg: Optional[RadiometryConfig] = None) -> Mask:
    """Soft structure-preserving mask, ``Λ2(I_2)``."""
    _, lam2, _ = triangle_weights(i2, cfg)
    return Mask(values=lam2.values, soft=True)


def mask_se(
    y_color: HdrImage,
    h2: LinearImage,
    i2: ExposureImage,
    thresholds: Optional[ThresholdConfig] = None,
    cfg: Optional[RadiometryConfig] = None,
    weighted: bool = True,
) -> Mask:
    """
    Structure-expansion mask.

    1 where ``|(T(Y_color) - T(H_2)) * Λ2(I_2)| < sigma_se`` in every channel. With
    ``weighted=False`` the Λ2 factor is dropped.
    """
    thresholds = thresholds or ThresholdConfig()
    require_same_shape(y_color.pixels, h2.pixels, i2.pixels)
    diff = tonemap(y_color, cfg) - tonemap(np.clip(h2.pixels, 0.0, 1.0), cfg)
    if weighted:
        _, lam2, _ = triangle_weights(i2, cfg)
        diff = diff * lam2.values
    return _binary(np.abs(diff) < thresholds.sigma_se)


def mask_color(
    y_color: HdrImage,
    y_stru: HdrImage,
    thresholds: Optional[ThresholdConfig] = None,
    cfg: Optional[RadiometryConfig] = None,
) -> Mask:
    """1 where ``|T(Y_color) - T(Y_stru)| < sigma_color`` in every channel."""
    thresholds = thresholds or ThresholdConfig()
    require_same_shape(y_color.pixels, y_stru.pixels)
    diff = tonemap(y_color, cfg) - tonemap(y_stru, cfg)
    return _binary(np.abs(diff) < thresholds.sigma_color)


def build_color_component(
    frames: Tuple[ExposureImage, ExposureImage, ExposureImage],
    spec: Optional[FlowEstimatorSpec] = None,
    cfg: Optional[RadiometryConfig] = None,
    prealign: bool = True,
) -> Tuple[HdrImage, AlignedStack]:
    """Align the stack to frame 2 and fuse it; the aligned stack is returned for reuse."""
    aligned = align_stack(frames, spec or FlowEstimatorSpec(), cfg, prealign=prealign)
    y_color = fuse_color(aligned.h1, aligned.h2, aligned.h3, aligned.i2, cfg)
    return y_color, aligned


def build_structure_component(
    model_s: nn.Module, x: NetworkInput, device: str = "cpu"
) -> HdrImage:
    """Run the structure-focused network once on (aligned) inputs."""
    return forward(model_s, x, role="structure_component", device=device)


def fuse_components_baseline(
    y_color: HdrImage,
    y_stru: HdrImage,
    thresholds: Optional[ThresholdConfig] = None,
    cfg: Optional[RadiometryConfig] = None,
    m_color: Optional[Mask] = None,
) -> HdrImage:
    """Pixel blend ``M_color * Y_color + (1 - M_color) * Y_stru``."""
    if m_color is None:
        m_color = mask_color(y_color, y_stru, thresholds, cfg)
    require_same_shape(y_color.pixels, y_stru.pixels, m_color.values)
    m = m_color.values
    blended = m * y_color.pixels + (1.0 - m) * y_stru.pixels
    return HdrImage(pixels=np.clip(blended, 0.0, 1.0), role="baseline")


def raw_network_input(
    frames: Tuple[ExposureImage, ExposureImage, ExposureImage],
    cfg: Optional[RadiometryConfig] = None,
) -> NetworkInput:
    """``X_i = {I_i, H_i}`` from an unaligned stack."""
    reference_ev = frames[1].ev
    linear = tuple(linearize(f, reference_ev, cfg) for f in frames)
    return NetworkInput.from_frames(frames, linear)


def aligned_network_input(
    artifacts: SupervisionArtifacts, scene: Scene, cfg: Optional[RadiometryConfig] = None
) -> NetworkInput:
    i1, i3 = artifacts.aligned_ldr
    h1, h3 = artifacts.aligned_hdr
    i2 = scene.frames[1]
    h2 = linearize(i2, i2.ev, cfg)
    return NetworkInput.from_frames((i1, i2, i3), (h1, h2, h3))


class SupervisionService:
    """Builds and persists per-scene supervision."""

    def __init__(
        self,
        config: TrainConfig,
        supervision_repo: Optional[SupervisionRepositoryProtocol] = None,
        device: str = "cpu",
    ) -> None:
        """
        Args:
            config: Training configuration (radiometry, thresholds, flow, ablation)
            supervision_repo: Where artifacts are written; None keeps them in memory
            device: torch device for the structure-focused network
        """
        self.config = config
        self._repo = supervision_repo
        self.device = device

    def build_color(self, scene: Scene) -> SupervisionArtifacts:
        """Y_color, M_sp, M_se and the aligned stack of one scene."""
        cfg = self.config
        y_color, aligned = build_color_component(
            scene.frames, cfg.flow, cfg.radiometry, prealign=cfg.ablation.prealign_color
        )
        artifacts = SupervisionArtifacts(
            scene_id=scene.scene_id,
            y_color=y_color,
            m_sp=mask_sp(scene.frames[1], cfg.radiometry),
            m_se=mask_se(y_color, aligned.h2, aligned.i2, cfg.thresholds, cfg.radiometry),
            aligned_ldr=(aligned.i1, aligned.i3),
            aligned_hdr=(aligned.h1, aligned.h3),
        )
        logger.info(
            f"Built color supervision scene_id={scene.scene_id} "
            f"m_se_valid={artifacts.m_se.values.mean():.3f}"
        )
        return artifacts

    def add_structure(
        self, scene: Scene, artifacts: SupervisionArtifacts, model_s: nn.Module
    ) -> SupervisionArtifacts:
        """Attach Y_stru and the color mask computed against it."""
        cfg = self.config
        if cfg.ablation.prealign_structure:
            x = aligned_network_input(artifacts, scene, cfg.radiometry)
        else:
            x = raw_network_input(scene.frames, cfg.radiometry)
        y_stru = build_structure_component(model_s, x, self.device)
        m_color = mask_color(artifacts.y_color, y_stru, cfg.thresholds, cfg.radiometry)
        logger.info(
            f"Built structure supervision scene_id={scene.scene_id} "
            f"m_color_valid={m_color.values.mean():.3f}"
        )
        return artifacts.model_copy(update={"y_stru": y_stru, "m_color": m_color})

    def visualizations(
        self, scene: Scene, artifacts: SupervisionArtifacts
    ) -> Dict[str, np.ndarray]:
        """H×W maps in [0, 1]; bright means weight (m_sp) or rejected (the others)."""
        cfg = self.config
        i2 = scene.frames[1]
        h2 = linearize(i2, i2.ev, cfg.radiometry)
        unweighted = mask_se(
            artifacts.y_color, h2, i2, cfg.thresholds, cfg.radiometry, weighted=False
        )
        maps = {
            "m_sp": artifacts.m_sp.values.mean(axis=2),
            "m_se": 1.0 - artifacts.m_se.values[..., 0],
            "m_se_unweighted": 1.0 - unweighted.values[..., 0],
        }
        if artifacts.m_color is not None:
            maps["m_color"] = 1.0 - artifacts.m_color.values[..., 0]
        return maps

    def _persist(self, scene: Scene, artifacts: SupervisionArtifacts, viz: bool) -> None:
        if self._repo is None:
            return
        self._repo.save(artifacts)
        if viz:
            self._repo.save_visualizations(scene.scene_id, self.visualizations(scene, artifacts))

    def build_all(
        self,
        scenes: List[Scene],
        model_s: Optional[nn.Module] = None,
        viz: bool = False,
    ) -> List[SupervisionArtifacts]:
        """Color supervision for every scene, plus structure supervision given ``model_s``."""
        results = []
        for scene in scenes:
            artifacts = self.build_color(scene)
            if model_s is not None:
                artifacts = self.add_structure(scene, artifacts, model_s)
            self._persist(scene, artifacts, viz)
            results.append(artifacts)
        return results

    def add_structure_all(
        self,
        scenes: List[Scene],
        artifacts: List[SupervisionArtifacts],
        model_s: nn.Module,
        viz: bool = False,
    ) -> List[SupervisionArtifacts]:
        by_id = {a.scene_id: a for a in artifacts}
        results = []
        for scene in scenes:
            if scene.scene_id not in by_id:
                raise MissingArtifactError(
                    f"No color supervision for scene {scene.scene_id}; run build-supervision first"
                )
            updated = self.add_structure(scene, by_id[scene.scene_id], model_s)
            self._persist(scene, updated, viz)
            results.append(updated)
        return results
