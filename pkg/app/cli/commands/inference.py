"""Prediction on unseen stacks."""

from pathlib import Path
from typing import Annotated, Optional

import typer

from app.cli.common import echo_paths, existing_file, load_scenes
from app.core.config import settings
from app.core.logging import setup_logger
from app.models.checkpoint import load_params
from app.schemas.config import load_config
from app.schemas.reports import CommandResult
from app.services.hdr_io import save_hdr_native, write_ldr
from app.services.radiometry import tonemap
from app.services.training import infer as predict

logger = setup_logger(__name__)

PREDICTION_FILE = "pred.shdr"
PREVIEW_FILE = "preview.png"


def infer(
    checkpoint: Annotated[Path, typer.Option("--ckpt", help="Reconstruction checkpoint")],
    data: Annotated[Path, typer.Option("--data", help="Scene directory or data root")],
    out: Annotated[Path, typer.Option("--out", help="Prediction directory")],
    config: Annotated[Optional[Path], typer.Option(help="Pipeline JSON config")] = None,
) -> CommandResult:
    """
    Predict HDR images from raw stacks.

    Writes ``<out>/<scene_id>/pred.shdr`` and an 8-bit tone-mapped ``preview.png``.
    """
    train_cfg = load_config(config).train
    existing_file(checkpoint, "Checkpoint")
    model = load_params(checkpoint, expected_spec=train_cfg.model)

    written = []
    for scene in load_scenes(data):
        prediction = predict(model, scene.frames, train_cfg, settings.DEVICE)
        scene_dir = Path(out) / scene.scene_id
        written.append(save_hdr_native(scene_dir / PREDICTION_FILE, prediction.pixels))
        written.append(
            write_ldr(
                scene_dir / PREVIEW_FILE, tonemap(prediction, train_cfg.radiometry), 8
            )
        )
        logger.debug(f"Predicted scene_id={scene.scene_id} out={scene_dir}")

    logger.info(f"Inference done scenes={len(written) // 2} out={out}")
    echo_paths(written)
    return CommandResult(artifacts=[str(p) for p in written])
