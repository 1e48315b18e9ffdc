"""Experiment configuration models.

Every hyperparameter of the pipeline lives here. ``PipelineConfig`` is the single JSON
document shared by all commands; its ``train`` section mirrors ``TrainConfig`` field names.
"""

from pathlib import Path
from typing import Any, List, Literal, Optional, Tuple, TypeVar

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.exceptions import ConfigError


class RadiometryConfig(BaseModel):
    """Gamma of the LDR linearization and mu of the mu-law tone mapper."""

    model_config = ConfigDict(frozen=True)

    gamma: float = Field(default=2.2, gt=0, description="Gamma correction parameter")
    mu: float = Field(default=5000.0, gt=0, description="mu-law compression strength")
    weight_breakpoint: float = Field(
        default=0.5,
        gt=0,
        lt=1,
        description="Pixel value at which the triangle blending ramps change slope",
    )


class ThresholdConfig(BaseModel):
    """Tone-mapped difference thresholds of the binary masks."""

    model_config = ConfigDict(frozen=True)

    sigma_se: float = Field(default=5 / 255, gt=0, description="Structure-expansion mask threshold")
    sigma_color: float = Field(default=10 / 255, gt=0, description="Color mask threshold")


class LossConfig(BaseModel):
    """Loss weights and perceptual feature taps."""

    model_config = ConfigDict(frozen=True)

    lambda_sp: float = Field(
        default=4.0, ge=0, description="Weight of the structure-preserving term"
    )
    lambda_stru: float = Field(
        default=1.0, ge=0, description="Weight of the perceptual structure term"
    )
    perceptual_layers: List[int] = Field(
        default_factory=lambda: [3, 8, 15],
        min_length=1,
        description="Feature layer ids (VGG19 features indexing: relu1_2, relu2_2, relu3_3)",
    )
    perceptual_backbone: Literal["vgg19", "random"] = Field(
        default="vgg19",
        description="Feature stack of the perceptual loss; falls back to random without weights",
    )
    extractor_seed: int = Field(default=0, description="Seed of the random feature pyramid")

    @field_validator("perceptual_layers")
    @classmethod
    def validate_layers(cls, v: List[int]) -> List[int]:
        if any(layer < 0 for layer in v):
            raise ValueError("perceptual layer ids must be non-negative")
        return sorted(set(v))


class FlowEstimatorSpec(BaseModel):
    """Optical flow backend and its parameters."""

    model_config = ConfigDict(frozen=True)

    algorithm: str = Field(default="pyramidal_lk", description="Registered estimator id")
    levels: int = Field(default=3, ge=1, description="Pyramid levels")
    iterations: int = Field(default=8, ge=1, description="Warping iterations per level")
    smoothness: float = Field(
        default=1.0, ge=0, description="Gaussian sigma of the flow smoothing pass (0 = off)"
    )
    window_sigma: float = Field(
        default=2.0, gt=0, description="Gaussian integration window of the structure tensor"
    )


class ModelSpec(BaseModel):
    """Architecture of the structure-focused and reconstruction networks."""

    model_config = ConfigDict(frozen=True)

    architecture: str = Field(default="attention_merge")
    width: int = Field(default=8, ge=4, description="Base channel width")
    blocks: int = Field(default=2, ge=1, description="Dilated residual blocks in the merging trunk")
    attention: bool = Field(default=True, description="Attention on non-reference features")
    seed: int = Field(default=0, description="Parameter initialization seed")


class AblationConfig(BaseModel):
    """On/off switches for loss terms, masks and pre-alignment."""

    model_config = ConfigDict(frozen=True)

    use_loss_se: bool = True
    use_loss_sp: bool = True
    use_mask_sp: bool = True
    use_mask_se: bool = True
    color_mask: Literal["color", "se", "none"] = "color"
    prealign_color: bool = True
    prealign_structure: bool = True


class TrainConfig(BaseModel):
    """Optimization protocol shared by both training phases."""

    model_config = ConfigDict(frozen=True)

    patch_size: int = Field(default=64, gt=0)
    batch_size: int = Field(default=4, gt=0)
    epochs: int = Field(default=30, gt=0)
    lr0: float = Field(default=1e-3, gt=0)
    lr_halving_period: int = Field(default=10, gt=0)
    beta1: float = Field(default=0.9, gt=0, lt=1)
    beta2: float = Field(default=0.999, gt=0, lt=1)
    seed: int = Field(default=0)
    patches_per_scene: int = Field(default=4, gt=0)
    augment: bool = Field(default=False, description="Joint random flips / rot90 of crops")
    val_fraction: float = Field(default=0.25, ge=0, lt=1)

    loss: LossConfig = Field(default_factory=LossConfig)
    thresholds: ThresholdConfig = Field(default_factory=ThresholdConfig)
    radiometry: RadiometryConfig = Field(default_factory=RadiometryConfig)
    flow: FlowEstimatorSpec = Field(default_factory=FlowEstimatorSpec)
    model: ModelSpec = Field(default_factory=ModelSpec)
    ablation: AblationConfig = Field(default_factory=AblationConfig)


class SyntheticSpec(BaseModel):
    """Parameters of one synthetic scene."""

    model_config = ConfigDict(frozen=True)

    size: Tuple[int, int] = Field(default=(64, 64), description="(height, width)")
    ev_set: Tuple[float, float, float] = Field(default=(-2.0, 0.0, 2.0))
    motion: Literal["none", "shift", "rect"] = "none"
    displacement: Tuple[float, float] = Field(
        default=(3.0, 0.0), description="(dx, dy) of frame 1; frame 3 moves by the opposite"
    )
    bit_depth: Literal[8, 16] = 8
    seed: int = 0

    @field_validator("size", mode="before")
    @classmethod
    def square_size(cls, v):
        if isinstance(v, int):
            return (v, v)
        return v

    @model_validator(mode="after")
    def check_ranges(self) -> "SyntheticSpec":
        if min(self.size) < 16:
            raise ValueError("synthetic scenes need at least 16x16 pixels")
        if max(abs(d) for d in self.displacement) > 10:
            raise ValueError("displacements are limited to 10 px")
        evs = self.ev_set
        if not (evs[0] < evs[1] < evs[2]):
            raise ValueError(f"ev_set must be strictly increasing, got {evs}")
        return self


class SyntheticDatasetConfig(BaseModel):
    """How ``synth`` and the toy pipeline generate a dataset."""

    model_config = ConfigDict(frozen=True)

    scenes: int = Field(default=16, gt=0)
    size: int = Field(default=64, ge=16)
    motion: Literal["none", "shift", "rect", "mixed"] = "mixed"
    max_displacement: float = Field(default=5.0, ge=0, le=10)
    ev_set: Tuple[float, float, float] = (-2.0, 0.0, 2.0)
    bit_depth: Literal[8, 16] = 8
    seed: int = 0

    @field_validator("ev_set")
    @classmethod
    def validate_ev_set(cls, v: Tuple[float, float, float]) -> Tuple[float, float, float]:
        if not v[0] < v[1] < v[2]:
            raise ConfigError(f"synth ev_set must be strictly increasing, got {tuple(v)}")
        return v


class PipelineConfig(BaseModel):
    """Single configuration document shared by all commands."""

    model_config = ConfigDict(frozen=True)

    train: TrainConfig = Field(default_factory=TrainConfig)
    synth: SyntheticDatasetConfig = Field(default_factory=SyntheticDatasetConfig)


ModelT = TypeVar("ModelT", bound=BaseModel)


def with_overrides(model: ModelT, **updates: Any) -> ModelT:
    """Re-validated copy of ``model`` with the non-None ``updates`` applied."""
    updates = {key: value for key, value in updates.items() if value is not None}
    if not updates:
        return model
    try:
        return type(model).model_validate({**model.model_dump(), **updates})
    except ValueError as e:
        raise ConfigError(f"Invalid override {sorted(updates)}: {str(e)}")


def load_config(path: Optional[Path]) -> PipelineConfig:
    """
    Load a pipeline configuration document.

    Args:
        path: JSON file; None selects ``settings.DEFAULT_CONFIG`` (or the built-in defaults
            when that file does not exist)

    Returns:
        Validated configuration

    Raises:
        ConfigError: If the file is missing or invalid
    """
    from app.core.config import settings

    if path is None:
        path = settings.DEFAULT_CONFIG
        if not Path(path).exists():
            return PipelineConfig()

    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    try:
        return PipelineConfig.model_validate_json(path.read_text(encoding="utf-8"))
    except ValueError as e:
        raise ConfigError(f"Invalid config file {path}: {str(e)}")
