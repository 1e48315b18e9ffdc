"""Repository factories."""

from pathlib import Path
from typing import Union

from app.repositories.scene_repo import SceneRepository
from app.repositories.supervision_repo import SupervisionRepository


def get_scene_repository(root: Union[str, Path]) -> SceneRepository:
    """Get scene repository instance rooted at ``root``."""
    return SceneRepository(root)


def get_supervision_repository(root: Union[str, Path]) -> SupervisionRepository:
    """Get supervision repository instance rooted at ``root``."""
    return SupervisionRepository(root)
