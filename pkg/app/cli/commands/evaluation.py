"""Metric evaluation against ground truth."""

from pathlib import Path
from typing import Annotated, Dict, List, Optional

import numpy as np
import typer
from pydantic import ConfigDict, RootModel

from app.cli.common import load_scenes, write_json
from app.cli.commands.inference import PREDICTION_FILE
from app.core.exceptions import ConfigError, NotFoundError
from app.core.logging import setup_logger
from app.dependencies import get_supervision_repository
from app.schemas.config import load_config
from app.schemas.images import HdrImage
from app.schemas.reports import CommandResult, MetricReport
from app.schemas.scene import Scene
from app.services.hdr_io import load_hdr_native
from app.services.metrics import aggregate, evaluate, format_table_row

logger = setup_logger(__name__)


class MetricTable(RootModel[Dict[str, MetricReport]]):
    """Metric reports keyed by method."""

    model_config = ConfigDict(ser_json_inf_nan="constants")


def _require_ground_truth(scenes: List[Scene]) -> None:
    missing = [s.scene_id for s in scenes if s.ground_truth is None]
    if missing:
        raise NotFoundError(f"No ground truth for scenes {missing}")


def _load_prediction(pred_dir: Path, scene: Scene) -> HdrImage:
    path = Path(pred_dir) / scene.scene_id / PREDICTION_FILE
    if not path.is_file():
        raise NotFoundError(f"Missing prediction {path}")
    return HdrImage(pixels=np.clip(load_hdr_native(path), 0.0, 1.0), role="prediction")


def evaluate_cmd(
    data: Annotated[Path, typer.Option("--data", help="Scenes with ground truth")],
    out: Annotated[Path, typer.Option("--out", help="MetricReport JSON to write")],
    pred: Annotated[
        Optional[Path], typer.Option("--pred", help="Directory written by infer")
    ] = None,
    components: Annotated[
        Optional[Path],
        typer.Option("--components", help="Supervision directory; scores Y_color/Y_stru"),
    ] = None,
    name: Annotated[str, typer.Option(help="Row name in the table")] = "reconstruction",
    config: Annotated[Optional[Path], typer.Option(help="Pipeline JSON config")] = None,
) -> CommandResult:
    """
    Score predictions, or stored supervision components, against ground truth.

    Prints one table row per method: ``name | PSNR-u / SSIM-u | PSNR-l / SSIM-l | HDR-VDP-2``.
    """
    if (pred is None) == (components is None):
        raise ConfigError("Pass exactly one of --pred or --components")
    radiometry = load_config(config).train.radiometry
    scenes = load_scenes(data)
    _require_ground_truth(scenes)

    def score(method: str, images: List[HdrImage]) -> MetricReport:
        return aggregate(
            method,
            [
                evaluate(image, s.ground_truth, radiometry, scene_id=s.scene_id)
                for image, s in zip(images, scenes)
            ],
        )

    if pred is not None:
        report = score(name, [_load_prediction(pred, s) for s in scenes])
        written = write_json(out, report)
        typer.echo(format_table_row(name, report))
    else:
        artifacts = get_supervision_repository(components).load_all(scenes)
        rows = {"y_color": score("y_color", [a.y_color for a in artifacts])}
        if all(a.has_structure for a in artifacts):
            rows["y_stru"] = score("y_stru", [a.y_stru for a in artifacts])
        else:
            logger.warning("Structure components missing; only y_color is scored")
        written = write_json(out, MetricTable(rows))
        for method, report in rows.items():
            typer.echo(format_table_row(method, report))

    logger.info(f"Evaluation done scenes={len(scenes)} out={written}")
    return CommandResult(artifacts=[str(written)])
