"""Neural networks and their checkpoints."""

from .checkpoint import load_params, save_params
from .networks import MODEL_REGISTRY, AttentionMergeNet, build_model

__all__ = ["MODEL_REGISTRY", "AttentionMergeNet", "build_model", "load_params", "save_params"]
