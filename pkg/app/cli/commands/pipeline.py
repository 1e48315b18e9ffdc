"""End-to-end desk-scale run."""

from pathlib import Path
from typing import Annotated, Optional

import typer

from app.cli.common import write_json
from app.dependencies import get_pipeline_service
from app.schemas.config import load_config
from app.schemas.reports import CommandResult
from app.services.metrics import format_table_row

REPORT_FILE = "pipeline_report.json"


def pipeline(
    out: Annotated[Path, typer.Option("--out", help="Working directory")],
    config: Annotated[Optional[Path], typer.Option(help="Pipeline JSON config")] = None,
    seed: Annotated[
        Optional[int], typer.Option(help="Overrides the dataset and training seeds")
    ] = None,
) -> CommandResult:
    """Synthesize, supervise, train both phases and evaluate the held-out scenes."""
    report = get_pipeline_service(out).run(load_config(config), seed)
    written = write_json(Path(out) / REPORT_FILE, report)
    for name, row in report.rows.items():
        typer.echo(format_table_row(name, row))
    return CommandResult(artifacts=[str(written)])
