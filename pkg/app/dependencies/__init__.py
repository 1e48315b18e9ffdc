"""Factory functions wiring repositories into services."""

from .repositories import get_scene_repository, get_supervision_repository
from .services import get_pipeline_service, get_supervision_service

__all__ = [
    "get_scene_repository",
    "get_supervision_repository",
    "get_supervision_service",
    "get_pipeline_service",
]
