"""Scene and supervision containers."""

from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.exceptions import ShapeMismatchError, ValidationError
from app.schemas.images import (
    ExposureImage,
    FlowField,
    HdrImage,
    LinearImage,
    Mask,
)


class Scene(BaseModel):
    """A bracketed LDR triplet ordered by exposure value."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    scene_id: str
    frames: Tuple[ExposureImage, ExposureImage, ExposureImage]
    ground_truth: Optional[HdrImage] = None
    # Synthetic scenes only: true reference -> frame 1 / frame 3 displacement
    true_flows: Optional[Tuple[FlowField, FlowField]] = None
    # Synthetic scenes only: H×W boolean map of pixels touched by motion
    motion_region: Optional[np.ndarray] = None

    @field_validator("motion_region", mode="before")
    @classmethod
    def validate_region(cls, v):
        if v is None:
            return v
        arr = np.asarray(v)
        if arr.ndim != 2:
            raise ShapeMismatchError(f"motion_region must be H×W, got {arr.shape}")
        return arr.astype(bool)

    @model_validator(mode="after")
    def check_stack(self) -> "Scene":
        evs = [f.ev for f in self.frames]
        if not (evs[0] < evs[1] < evs[2]):
            raise ValidationError(
                f"Scene {self.scene_id}: exposure values must be strictly increasing, got {evs}"
            )
        shape = self.frames[0].shape
        for frame in self.frames[1:]:
            if frame.shape != shape:
                raise ShapeMismatchError(
                    f"Scene {self.scene_id}: frame shapes differ ({shape} vs {frame.shape})"
                )
        if self.ground_truth is not None and self.ground_truth.shape != shape:
            raise ShapeMismatchError(
                f"Scene {self.scene_id}: ground truth shape {self.ground_truth.shape} != {shape}"
            )
        if self.motion_region is not None and self.motion_region.shape != shape[:2]:
            raise ShapeMismatchError(f"Scene {self.scene_id}: motion_region shape mismatch")
        return self

    @property
    def evs(self) -> Tuple[float, float, float]:
        return tuple(f.ev for f in self.frames)

    @property
    def reference_ev(self) -> float:
        return self.frames[1].ev

    @property
    def height(self) -> int:
        return self.frames[0].shape[0]

    @property
    def width(self) -> int:
        return self.frames[0].shape[1]


class AlignedStack(BaseModel):
    """Linear and gamma-domain frames registered to the reference exposure."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    h1: LinearImage
    h2: LinearImage
    h3: LinearImage
    i1: ExposureImage
    i2: ExposureImage
    i3: ExposureImage
    flow_1: FlowField
    flow_3: FlowField


class SupervisionArtifacts(BaseModel):
    """Everything precomputed for one training scene.

    ``y_stru`` and ``m_color`` only exist once the structure-focused network was trained.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    scene_id: str
    y_color: HdrImage
    m_sp: Mask
    m_se: Mask
    aligned_ldr: Tuple[ExposureImage, ExposureImage]
    aligned_hdr: Tuple[LinearImage, LinearImage]
    y_stru: Optional[HdrImage] = None
    m_color: Optional[Mask] = None

    @property
    def has_structure(self) -> bool:
        return self.y_stru is not None and self.m_color is not None


class NetworkInput(BaseModel):
    """Three H×W×6 frames, each ``concat(I_i, H_i)`` in [0, 1]."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    frames: Tuple[np.ndarray, np.ndarray, np.ndarray] = Field(
        description="Gamma-domain channels first, linear channels second"
    )

    @field_validator("frames", mode="before")
    @classmethod
    def validate_frames(cls, v):
        arrays = tuple(np.asarray(x, dtype=np.float64) for x in v)
        if len(arrays) != 3:
            raise ValidationError(f"NetworkInput needs exactly 3 frames, got {len(arrays)}")
        shape = arrays[0].shape
        for arr in arrays:
            if arr.ndim != 3 or arr.shape[2] != 6:
                raise ShapeMismatchError(f"Network frames must be H×W×6, got {arr.shape}")
            if arr.shape != shape:
                raise ShapeMismatchError(f"Network frames differ in shape: {shape} vs {arr.shape}")
            if not np.all(np.isfinite(arr)) or arr.min() < 0 or arr.max() > 1:
                raise ValidationError("Network inputs must be finite and within [0, 1]")
        return arrays

    @classmethod
    def from_frames(
        cls,
        ldr: Tuple[ExposureImage, ExposureImage, ExposureImage],
        linear: Tuple[LinearImage, LinearImage, LinearImage],
    ) -> "NetworkInput":
        """Build ``X_i = {I_i, H_i}``; both halves are clipped to [0, 1]."""
        return cls(
            frames=tuple(
                np.clip(np.concatenate([i.pixels, h.pixels], axis=2), 0.0, 1.0)
                for i, h in zip(ldr, linear)
            )
        )

    @property
    def shape(self) -> Tuple[int, int]:
        return self.frames[0].shape[:2]
