"""Synthetic scene generation."""

from pathlib import Path
from typing import Annotated, Optional

import typer

from app.cli.common import echo_paths
from app.core.logging import setup_logger
from app.dependencies import get_scene_repository
from app.schemas.config import load_config, with_overrides
from app.schemas.reports import CommandResult
from app.services.synthetic import synthesize_dataset

logger = setup_logger(__name__)


def synth(
    out: Annotated[Path, typer.Option("--out", help="Directory receiving the scenes")],
    scenes: Annotated[Optional[int], typer.Option(help="Number of scenes")] = None,
    size: Annotated[Optional[int], typer.Option(help="Square scene size in pixels")] = None,
    motion: Annotated[
        Optional[str], typer.Option(help="none | shift | rect | mixed")
    ] = None,
    seed: Annotated[Optional[int], typer.Option(help="Dataset seed")] = None,
    config: Annotated[Optional[Path], typer.Option(help="Pipeline JSON config")] = None,
) -> CommandResult:
    """
    Write synthetic scenes with ground truth and true-displacement sidecars.

    Output bytes depend only on the flags, the config and the seed.
    """
    pipeline_cfg = load_config(config)
    synth_cfg = with_overrides(
        pipeline_cfg.synth, scenes=scenes, size=size, motion=motion, seed=seed
    )
    logger.info(
        f"Synthesizing scenes={synth_cfg.scenes} size={synth_cfg.size} "
        f"motion={synth_cfg.motion} seed={synth_cfg.seed} out={out}"
    )

    repo = get_scene_repository(out)
    written = [
        repo.save_scene(scene)
        for scene in synthesize_dataset(synth_cfg, pipeline_cfg.train.radiometry)
    ]
    echo_paths(written)
    return CommandResult(artifacts=[str(p) for p in written])
