"""Report models emitted as JSON by training, evaluation and the CLI."""

import math
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class PhaseReport(BaseModel):
    """Outcome of one training phase."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    phase: Literal["structure", "recon"]
    epochs: int
    seed: int
    loss_curve: List[float] = Field(description="Mean objective per epoch")
    val_psnr_u: Optional[float] = Field(default=None, description="PSNR-u on the held-out split")
    checkpoint_path: Optional[str] = None
    wall_time_s: float = 0.0

    @model_validator(mode="after")
    def check_curve(self) -> "PhaseReport":
        if len(self.loss_curve) != self.epochs:
            raise ValueError(
                f"loss curve has {len(self.loss_curve)} entries for {self.epochs} epochs"
            )
        return self


class MetricValues(BaseModel):
    """PSNR in dB (``inf`` for identical images) and SSIM in [-1, 1]."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    psnr_l: float
    psnr_u: float
    ssim_l: float
    ssim_u: float
    # HDR-VDP-2 needs an external model; reserved
    hdr_vdp2: Optional[float] = None

    @model_validator(mode="after")
    def check_ranges(self) -> "MetricValues":
        for name in ("ssim_l", "ssim_u"):
            value = getattr(self, name)
            if not -1.0 - 1e-9 <= value <= 1.0 + 1e-9:
                raise ValueError(f"{name} out of range: {value}")
        for name in ("psnr_l", "psnr_u"):
            value = getattr(self, name)
            if math.isnan(value):
                raise ValueError(f"{name} is NaN")
        return self


class SceneMetrics(MetricValues):
    scene_id: str


class MetricReport(BaseModel):
    """Per-scene metrics and their means."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    name: str
    scenes: List[SceneMetrics]
    mean: MetricValues


class PipelineReport(BaseModel):
    """Result of the end-to-end toy pipeline."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    seed: int
    train_scenes: List[str]
    held_out_scenes: List[str]
    structure: PhaseReport
    reconstruction: PhaseReport
    rows: Dict[str, MetricReport] = Field(
        description="Held-out metrics keyed by method: reconstruction, y_color, y_stru, ..."
    )
    wall_time_s: float = 0.0


class CommandResult(BaseModel):
    """What a CLI command did."""

    exit_code: int = 0
    artifacts: List[str] = Field(default_factory=list)
    message: Optional[str] = None
