"""Supervision construction."""

from pathlib import Path
from typing import Annotated, Optional

import typer

from app.cli.common import echo_paths, existing_file, load_scenes
from app.core.logging import setup_logger
from app.dependencies import get_supervision_service
from app.models.checkpoint import load_params
from app.schemas.config import load_config
from app.schemas.reports import CommandResult

logger = setup_logger(__name__)


def build_supervision(
    data: Annotated[Path, typer.Option("--data", help="Scene directory or data root")],
    out: Annotated[Path, typer.Option("--out", help="Supervision directory")],
    config: Annotated[Optional[Path], typer.Option(help="Pipeline JSON config")] = None,
    with_structure: Annotated[
        Optional[Path],
        typer.Option(
            "--with-structure",
            help="Structure-phase checkpoint; adds Y_stru and M_color",
        ),
    ] = None,
    viz: Annotated[bool, typer.Option("--viz", help="Also write mask PNGs")] = False,
) -> CommandResult:
    """
    Build the color component and masks of every scene.

    Given a structure-phase checkpoint, the structure component and the color mask are
    added too. Re-running over the same inputs rewrites identical bytes.
    """
    train_cfg = load_config(config).train
    scenes = load_scenes(data)

    model_s = None
    if existing_file(with_structure, "Structure checkpoint") is not None:
        model_s = load_params(with_structure, expected_spec=train_cfg.model)

    service = get_supervision_service(train_cfg, out)
    artifacts = service.build_all(scenes, model_s=model_s, viz=viz)
    logger.info(
        f"Built supervision scenes={len(artifacts)} structure={model_s is not None} out={out}"
    )
    written = [Path(out) / a.scene_id for a in artifacts]
    echo_paths(written)
    return CommandResult(artifacts=[str(p) for p in written])
