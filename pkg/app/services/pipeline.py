"""End-to-end desk-scale run on synthetic data."""

import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from app.core.config import settings
from app.core.logging import setup_logger
from app.models.checkpoint import save_params
from app.repositories.scene_repo import SceneRepositoryProtocol
from app.repositories.supervision_repo import SupervisionRepositoryProtocol
from app.schemas.config import PipelineConfig
from app.schemas.images import HdrImage
from app.schemas.reports import MetricReport, PipelineReport
from app.schemas.scene import Scene, SupervisionArtifacts
from app.services.metrics import aggregate, evaluate
from app.services.radiometry import fuse_color, linearize
from app.services.supervision import SupervisionService, fuse_components_baseline
from app.services.synthetic import synthesize_dataset
from app.services.training import (
    infer,
    train_reconstruction_phase,
    train_structure_phase,
)

logger = setup_logger(__name__)


def split_scenes(scenes: Sequence[Scene], val_fraction: float) -> Tuple[List[Scene], List[Scene]]:
    """Hold out the trailing ``round(n * val_fraction)`` scenes (at least one if > 0)."""
    scenes = list(scenes)
    if val_fraction <= 0 or len(scenes) < 2:
        return scenes, []
    held = min(len(scenes) - 1, max(1, round(len(scenes) * val_fraction)))
    return scenes[:-held], scenes[-held:]


def no_flow_merge(scene: Scene, pipeline_cfg: PipelineConfig) -> HdrImage:
    """Weighted merge of the unaligned stack; the ghosting baseline."""
    radiometry = pipeline_cfg.train.radiometry
    i1, i2, i3 = scene.frames
    h1, h2, h3 = (linearize(f, i2.ev, radiometry) for f in scene.frames)
    return fuse_color(h1, h2, h3, i2, radiometry).model_copy(update={"role": "baseline"})


class PipelineService:
    """Synthesize, supervise, train both phases and evaluate the held-out split."""

    def __init__(
        self,
        scene_repo: SceneRepositoryProtocol,
        supervision_repo: SupervisionRepositoryProtocol,
        checkpoint_dir: Path,
    ) -> None:
        self._scene_repo = scene_repo
        self._supervision_repo = supervision_repo
        self.checkpoint_dir = Path(checkpoint_dir)

    def _rows(
        self,
        config: PipelineConfig,
        held_out: Sequence[Scene],
        artifacts: Dict[str, SupervisionArtifacts],
        predictions: Dict[str, HdrImage],
    ) -> Dict[str, MetricReport]:
        radiometry = config.train.radiometry
        thresholds = config.train.thresholds
        candidates = {
            "no_flow_merge": lambda s: no_flow_merge(s, config),
            "y_color": lambda s: artifacts[s.scene_id].y_color,
            "y_stru": lambda s: artifacts[s.scene_id].y_stru,
            "component_fusion": lambda s: fuse_components_baseline(
                artifacts[s.scene_id].y_color,
                artifacts[s.scene_id].y_stru,
                thresholds,
                radiometry,
            ),
            "reconstruction": lambda s: predictions[s.scene_id],
        }
        rows = {}
        for name, produce in candidates.items():
            metrics = [
                evaluate(produce(s), s.ground_truth, radiometry, scene_id=s.scene_id)
                for s in held_out
            ]
            rows[name] = aggregate(name, metrics)
        return rows

    def run(self, config: PipelineConfig, seed: Optional[int] = None) -> PipelineReport:
        """
        Run the full pipeline.

        Args:
            config: Pipeline configuration
            seed: Overrides both the dataset and the training seed

        Returns:
            Training reports and held-out metrics of the reconstruction and baselines
        """
        started = time.perf_counter()
        if seed is not None:
            config = config.model_copy(
                update={
                    "synth": config.synth.model_copy(update={"seed": seed}),
                    "train": config.train.model_copy(update={"seed": seed}),
                }
            )
        cfg = config.train
        device = settings.DEVICE

        scenes = synthesize_dataset(config.synth, cfg.radiometry)
        for scene in scenes:
            self._scene_repo.save_scene(scene)
        train_scenes, held_out = split_scenes(scenes, cfg.val_fraction)
        logger.info(
            f"Pipeline split train={len(train_scenes)} held_out={len(held_out)} seed={cfg.seed}"
        )

        supervision = SupervisionService(cfg, self._supervision_repo, device=device)
        color_artifacts = supervision.build_all(scenes)

        structure_model, structure_report = train_structure_phase(
            train_scenes, color_artifacts, cfg, val_scenes=held_out, device=device
        )
        structure_report.checkpoint_path = str(
            save_params(
                structure_model,
                self.checkpoint_dir / "structure.ckpt",
                metadata={"phase": "structure", "seed": cfg.seed},
            )
        )

        artifacts = supervision.add_structure_all(scenes, color_artifacts, structure_model)
        recon_model, recon_report = train_reconstruction_phase(
            train_scenes, artifacts, structure_model, cfg, val_scenes=held_out, device=device
        )
        recon_report.checkpoint_path = str(
            save_params(
                recon_model,
                self.checkpoint_dir / "recon.ckpt",
                metadata={"phase": "recon", "seed": cfg.seed},
            )
        )

        predictions = {s.scene_id: infer(recon_model, s.frames, cfg, device) for s in held_out}
        by_id = {a.scene_id: a for a in artifacts}
        rows = self._rows(config, held_out, by_id, predictions) if held_out else {}

        return PipelineReport(
            seed=cfg.seed,
            train_scenes=[s.scene_id for s in train_scenes],
            held_out_scenes=[s.scene_id for s in held_out],
            structure=structure_report,
            reconstruction=recon_report,
            rows=rows,
            wall_time_s=time.perf_counter() - started,
        )


def run_pipeline(
    config: PipelineConfig, workdir: Path, seed: Optional[int] = None
) -> PipelineReport:
    """Run the pipeline with file repositories under ``workdir``."""
    from app.dependencies.services import get_pipeline_service

    return get_pipeline_service(workdir).run(config, seed)
