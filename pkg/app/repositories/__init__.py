"""Repository classes for scene and supervision files."""

from .scene_repo import SceneRepository, SceneRepositoryProtocol
from .supervision_repo import SupervisionRepository, SupervisionRepositoryProtocol

__all__ = [
    "SceneRepository",
    "SceneRepositoryProtocol",
    "SupervisionRepository",
    "SupervisionRepositoryProtocol",
]
