"""Network checkpoints.

Layout::

    b"SHCK" | uint32 version | uint32 header length | header JSON | float32 parameter blob

The header holds the ModelSpec and free-form metadata; the blob concatenates the
``state_dict`` tensors in order, little-endian.
"""

import json
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import torch
from pydantic import ValidationError as PydanticValidationError
from torch import nn

from app.core.exceptions import CheckpointError, NotFoundError
from app.core.logging import setup_logger
from app.models.networks import build_model
from app.schemas.config import ModelSpec

logger = setup_logger(__name__)

CHECKPOINT_MAGIC = b"SHCK"
CHECKPOINT_VERSION = 1
_PREFIX = struct.Struct("<4sII")


def save_params(
    model: nn.Module,
    path: Union[str, Path],
    spec: Optional[ModelSpec] = None,
    metadata: Optional[Dict[str, Any]] = None,
) -> Path:
    """Write ``model`` with its spec to ``path``."""
    path = Path(path)
    spec = spec or getattr(model, "spec", None)
    if spec is None:
        raise CheckpointError("Cannot save a model without its ModelSpec")

    header = json.dumps(
        {"spec": spec.model_dump(mode="json"), "metadata": metadata or {}},
        sort_keys=True,
    ).encode("utf-8")
    blob = b"".join(
        tensor.detach().cpu().contiguous().numpy().astype("<f4").tobytes()
        for tensor in model.state_dict().values()
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    prefix = _PREFIX.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(header))
    path.write_bytes(prefix + header + blob)
    logger.info(f"Saved checkpoint path={path} parameters={len(blob) // 4}")
    return path


def read_header(path: Union[str, Path]) -> Tuple[ModelSpec, Dict[str, Any], bytes]:
    """Parse a checkpoint into (spec, metadata, parameter blob)."""
    path = Path(path)
    if not path.exists():
        raise NotFoundError(f"Checkpoint not found: {path}")
    data = path.read_bytes()
    if len(data) < _PREFIX.size:
        raise CheckpointError(f"{path}: truncated checkpoint")
    magic, version, header_len = _PREFIX.unpack_from(data)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (magic {magic!r})")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    start = _PREFIX.size
    try:
        header = json.loads(data[start : start + header_len].decode("utf-8"))
        spec = ModelSpec.model_validate(header["spec"])
    except (ValueError, KeyError, PydanticValidationError) as e:
        raise CheckpointError(f"{path}: corrupt checkpoint header: {str(e)}")
    return spec, header.get("metadata", {}), data[start + header_len :]


def load_params(
    path: Union[str, Path], expected_spec: Optional[ModelSpec] = None
) -> nn.Module:
    """
    Rebuild a model from a checkpoint.

    Args:
        path: Checkpoint file
        expected_spec: If given, the stored spec must equal it

    Returns:
        Model in eval mode with the stored parameters

    Raises:
        CheckpointError: On a spec mismatch or a corrupt file
    """
    spec, _, blob = read_header(path)
    if expected_spec is not None and expected_spec != spec:
        raise CheckpointError(
            f"{path}: checkpoint spec {spec.model_dump()} does not match "
            f"expected {expected_spec.model_dump()}"
        )

    model = build_model(spec)
    state = model.state_dict()
    expected_bytes = sum(t.numel() for t in state.values()) * 4
    if len(blob) != expected_bytes:
        raise CheckpointError(
            f"{path}: parameter blob has {len(blob)} bytes, expected {expected_bytes}"
        )

    offset = 0
    loaded = {}
    for name, tensor in state.items():
        count = tensor.numel()
        values = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
        loaded[name] = torch.from_numpy(values.reshape(tuple(tensor.shape)).copy())
        offset += count * 4
    model.load_state_dict(loaded)
    model.eval()
    return model


def checkpoint_metadata(path: Union[str, Path]) -> Dict[str, Any]:
    spec, metadata, _ = read_header(path)
    return {"spec": spec.model_dump(mode="json"), **metadata}
