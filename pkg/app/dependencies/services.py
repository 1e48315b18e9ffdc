"""Service factories with injected repositories."""

from pathlib import Path
from typing import Union

from app.core.config import settings
from app.dependencies.repositories import get_scene_repository, get_supervision_repository
from app.schemas.config import TrainConfig
from app.services.pipeline import PipelineService
from app.services.supervision import SupervisionService


def get_supervision_service(
    config: TrainConfig, out_dir: Union[str, Path]
) -> SupervisionService:
    """Get supervision service persisting under ``out_dir``."""
    return SupervisionService(
        config,
        supervision_repo=get_supervision_repository(out_dir),
        device=settings.DEVICE,
    )


def get_pipeline_service(workdir: Union[str, Path]) -> PipelineService:
    """Get pipeline service with file repositories under ``workdir``."""
    workdir = Path(workdir)
    return PipelineService(
        scene_repo=get_scene_repository(workdir / "data"),
        supervision_repo=get_supervision_repository(workdir / "supervision"),
        checkpoint_dir=workdir / "checkpoints",
    )
