"""Training phases."""

from pathlib import Path
from typing import Annotated, Optional

import typer

from app.cli.common import echo_paths, existing_file, load_scenes, write_json
from app.core.config import settings
from app.core.exceptions import ConfigError
from app.core.logging import setup_logger
from app.dependencies import get_supervision_repository
from app.models.checkpoint import load_params, save_params
from app.schemas.config import load_config, with_overrides
from app.schemas.reports import CommandResult
from app.services.training import train_reconstruction_phase, train_structure_phase

logger = setup_logger(__name__)

PHASES = ("structure", "recon")


def train(
    phase: Annotated[str, typer.Option("--phase", help="structure | recon")],
    data: Annotated[Path, typer.Option("--data", help="Training scenes")],
    supervision: Annotated[
        Path, typer.Option("--supervision", help="Supervision directory")
    ],
    out: Annotated[Path, typer.Option("--out", help="Checkpoint to write")],
    config: Annotated[Optional[Path], typer.Option(help="Pipeline JSON config")] = None,
    report: Annotated[
        Optional[Path],
        typer.Option(help="PhaseReport JSON (defaults next to the checkpoint)"),
    ] = None,
    structure: Annotated[
        Optional[Path],
        typer.Option(
            "--structure",
            help="Structure checkpoint generating Y_stru for scenes that lack it",
        ),
    ] = None,
    val_data: Annotated[
        Optional[Path], typer.Option("--val-data", help="Held-out scenes with ground truth")
    ] = None,
    seed: Annotated[Optional[int], typer.Option(help="Training seed")] = None,
    epochs: Annotated[Optional[int], typer.Option(help="Epoch count")] = None,
) -> CommandResult:
    """
    Train one phase and write its checkpoint and PhaseReport.

    The reconstruction phase needs structure components: build them with
    ``build-supervision --with-structure`` or pass ``--structure``.
    """
    if phase not in PHASES:
        raise ConfigError(f"--phase must be one of {PHASES}, got {phase!r}")
    train_cfg = with_overrides(load_config(config).train, seed=seed, epochs=epochs)

    scenes = load_scenes(data)
    val_scenes = load_scenes(val_data) if val_data is not None else []
    artifacts = get_supervision_repository(supervision).load_all(scenes)
    logger.info(
        f"Training phase={phase} scenes={len(scenes)} epochs={train_cfg.epochs} "
        f"seed={train_cfg.seed}"
    )

    if phase == "structure":
        model, phase_report = train_structure_phase(
            scenes, artifacts, train_cfg, val_scenes=val_scenes, device=settings.DEVICE
        )
    else:
        model_s = None
        if existing_file(structure, "Structure checkpoint") is not None:
            model_s = load_params(structure, expected_spec=train_cfg.model)
        model, phase_report = train_reconstruction_phase(
            scenes,
            artifacts,
            model_s,
            train_cfg,
            val_scenes=val_scenes,
            device=settings.DEVICE,
        )

    checkpoint = save_params(
        model,
        out,
        spec=train_cfg.model,
        metadata={"phase": phase, "seed": train_cfg.seed, "epochs": train_cfg.epochs},
    )
    phase_report.checkpoint_path = str(checkpoint)
    report_path = write_json(report or Path(out).with_suffix(".json"), phase_report)
    echo_paths([checkpoint, report_path])
    return CommandResult(artifacts=[str(checkpoint), str(report_path)])
