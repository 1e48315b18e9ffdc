"""Image containers flowing through the pipeline.

All pixel arrays are ``float64`` numpy arrays laid out H×W×C.
"""

from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.core.exceptions import ShapeMismatchError, ValidationError

HdrRole = Literal[
    "color_component", "structure_component", "prediction", "ground_truth", "baseline"
]


def as_pixels(value, channels: int = 3, name: str = "pixels") -> np.ndarray:
    """Coerce to a finite H×W×channels float64 array."""
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != channels or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeMismatchError(
            f"{name} must be H×W×{channels}, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def require_same_shape(*arrays: np.ndarray) -> None:
    shapes = {a.shape for a in arrays}
    if len(shapes) > 1:
        raise ShapeMismatchError(f"Shape mismatch: {sorted(shapes)}")


class _ArrayModel(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @property
    def shape(self) -> tuple:
        return self.pixels.shape


class ExposureImage(_ArrayModel):
    """An LDR frame in [0, 1] together with its exposure value."""

    pixels: np.ndarray
    ev: float
    bit_depth: Literal[8, 16] = 8

    @field_validator("pixels", mode="before")
    @classmethod
    def validate_pixels(cls, v):
        arr = as_pixels(v)
        if arr.min() < 0 or arr.max() > 1:
            raise ValidationError("LDR pixels must lie in [0, 1]")
        return arr

    @field_validator("ev")
    @classmethod
    def validate_ev(cls, v: float) -> float:
        if not np.isfinite(v):
            raise ValidationError(f"Exposure value must be finite, got {v}")
        return float(v)


class LinearImage(_ArrayModel):
    """Linear radiance normalized to ``reference_ev``."""

    pixels: np.ndarray
    reference_ev: float = 0.0

    @field_validator("pixels", mode="before")
    @classmethod
    def validate_pixels(cls, v):
        arr = as_pixels(v)
        if arr.min() < 0:
            raise ValidationError("Linear pixels must be non-negative")
        return arr


class HdrImage(_ArrayModel):
    """Normalized linear HDR image in [0, 1]."""

    pixels: np.ndarray
    role: HdrRole = "prediction"

    @field_validator("pixels", mode="before")
    @classmethod
    def validate_pixels(cls, v):
        arr = as_pixels(v)
        if arr.min() < 0 or arr.max() > 1:
            raise ValidationError("HDR pixels must lie in [0, 1]; clip first")
        return arr


class WeightMap(_ArrayModel):
    """Per-pixel blending weights in [0, 1]."""

    pixels: np.ndarray = Field(alias="values")

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True, populate_by_name=True)

    @property
    def values(self) -> np.ndarray:
        return self.pixels

    @field_validator("pixels", mode="before")
    @classmethod
    def validate_values(cls, v):
        arr = as_pixels(v, name="weights")
        if arr.min() < 0 or arr.max() > 1:
            raise ValidationError("Weights must lie in [0, 1]")
        return arr


class Mask(WeightMap):
    """Binary (``soft=False``) or soft mask, H×W×3."""

    soft: bool = False

    def model_post_init(self, __context) -> None:
        if not self.soft and not np.all((self.pixels == 0) | (self.pixels == 1)):
            raise ValidationError("Binary masks may only contain 0 or 1")


class FlowField(_ArrayModel):
    """Per-pixel (x, y) displacement from the reference to a source frame."""

    pixels: np.ndarray = Field(alias="vectors")

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True, populate_by_name=True)

    @property
    def vectors(self) -> np.ndarray:
        return self.pixels

    @field_validator("pixels", mode="before")
    @classmethod
    def validate_vectors(cls, v):
        arr = as_pixels(v, channels=2, name="flow")
        limit = max(arr.shape[0], arr.shape[1])
        if np.abs(arr).max(initial=0.0) > limit:
            raise ValidationError(f"Flow magnitude exceeds image size {limit}")
        return arr

    @classmethod
    def zeros(cls, height: int, width: int) -> "FlowField":
        return cls(vectors=np.zeros((height, width, 2)))
