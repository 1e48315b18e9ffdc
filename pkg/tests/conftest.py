"""Shared fixtures."""

import json
from pathlib import Path
from typing import Callable

import numpy as np
import pytest

from app.schemas.config import (
    FlowEstimatorSpec,
    LossConfig,
    ModelSpec,
    PipelineConfig,
    RadiometryConfig,
    SyntheticDatasetConfig,
    SyntheticSpec,
    TrainConfig,
)
from app.schemas.images import ExposureImage
from app.schemas.scene import Scene
from app.services.synthetic import synthesize_scene


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def radiometry() -> RadiometryConfig:
    return RadiometryConfig()


@pytest.fixture
def make_exposure(rng) -> Callable[..., ExposureImage]:
    """Random LDR frame factory."""

    def factory(height: int = 8, width: int = 8, ev: float = 0.0) -> ExposureImage:
        return ExposureImage(pixels=rng.uniform(0.0, 1.0, (height, width, 3)), ev=ev)

    return factory


@pytest.fixture
def make_scene() -> Callable[..., Scene]:
    """Synthetic scene factory with small defaults."""

    def factory(
        motion: str = "none",
        displacement=(3.0, 0.0),
        size: int = 32,
        seed: int = 0,
        bit_depth: int = 8,
        scene_id: str = "scene",
    ) -> Scene:
        spec = SyntheticSpec(
            size=(size, size),
            motion=motion,
            displacement=displacement if motion != "none" else (0.0, 0.0),
            seed=seed,
            bit_depth=bit_depth,
        )
        return synthesize_scene(spec, scene_id=scene_id)

    return factory


@pytest.fixture
def tiny_model_spec() -> ModelSpec:
    return ModelSpec(width=4, blocks=1, seed=0)


@pytest.fixture
def tiny_train_config(tiny_model_spec) -> TrainConfig:
    return TrainConfig(
        patch_size=16,
        batch_size=2,
        epochs=2,
        patches_per_scene=2,
        lr_halving_period=1,
        model=tiny_model_spec,
        flow=FlowEstimatorSpec(levels=2, iterations=3),
        loss=LossConfig(perceptual_backbone="random"),
    )


@pytest.fixture
def tiny_pipeline_config(tiny_train_config) -> PipelineConfig:
    return PipelineConfig(
        train=tiny_train_config.model_copy(update={"epochs": 1, "val_fraction": 0.25}),
        synth=SyntheticDatasetConfig(scenes=4, size=32, motion="mixed", seed=3),
    )


@pytest.fixture
def tiny_config_file(tmp_path, tiny_pipeline_config) -> Path:
    path = tmp_path / "tiny.json"
    path.write_text(
        json.dumps(tiny_pipeline_config.model_dump(mode="json"), indent=2), encoding="utf-8"
    )
    return path
