"""Helpers shared by the command modules."""

from pathlib import Path
from typing import List, Optional

import typer
from pydantic import BaseModel
from rich.console import Console

from app.core.exceptions import NotFoundError
from app.dependencies import get_scene_repository
from app.repositories.scene_repo import EXPOSURES_FILE
from app.schemas.scene import Scene

# stdout carries command output only
err_console = Console(stderr=True, soft_wrap=True)


def load_scenes(data: Path) -> List[Scene]:
    """One scene directory, or every scene under a data root."""
    data = Path(data)
    if (data / EXPOSURES_FILE).is_file():
        return [get_scene_repository(data.parent).load_scene(data)]
    return get_scene_repository(data).load_all()


def write_json(path: Path, report: BaseModel) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def existing_file(path: Optional[Path], what: str) -> Optional[Path]:
    if path is not None and not Path(path).is_file():
        raise NotFoundError(f"{what} not found: {path}")
    return path


def echo_paths(paths: List[Path]) -> None:
    for path in paths:
        typer.echo(str(path))
