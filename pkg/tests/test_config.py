import json

import pytest

from app.core.config import PROJECT_ROOT, settings
from app.core.exceptions import ConfigError
from app.schemas.config import (
    LossConfig,
    PipelineConfig,
    RadiometryConfig,
    SyntheticDatasetConfig,
    SyntheticSpec,
    TrainConfig,
    load_config,
    with_overrides,
)


def test_defaults_follow_the_training_protocol():
    cfg = TrainConfig()
    assert cfg.radiometry.gamma == 2.2
    assert cfg.radiometry.mu == 5000.0
    assert cfg.thresholds.sigma_se == pytest.approx(5 / 255)
    assert cfg.thresholds.sigma_color == pytest.approx(10 / 255)
    assert cfg.loss.lambda_sp == 4.0
    assert cfg.loss.lambda_stru == 1.0
    assert cfg.loss.perceptual_layers == [3, 8, 15]


def test_shipped_presets_load():
    desk = load_config(PROJECT_ROOT / "configs" / "desk.json")
    full = load_config(PROJECT_ROOT / "configs" / "full.json")
    assert desk.synth.scenes == 16 and desk.synth.size == 64
    assert desk.train.epochs == 30 and desk.train.model.width == 8
    assert full.train.patch_size == 128 and full.train.epochs == 150
    assert full.train.loss.perceptual_backbone == "vgg19"


def test_missing_default_config_falls_back_to_builtin(tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "DEFAULT_CONFIG", tmp_path / "absent.json")
    assert load_config(None) == PipelineConfig()


def test_invalid_documents(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"train": {"radiometry": {"gamma": -1}}}))
    with pytest.raises(ConfigError):
        load_config(bad)

    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(broken)


def test_overrides_are_validated():
    cfg = TrainConfig()
    assert with_overrides(cfg, epochs=3, seed=None).epochs == 3
    assert with_overrides(cfg) is cfg
    with pytest.raises(ConfigError):
        with_overrides(cfg, epochs=0)


def test_perceptual_layers_are_normalized():
    assert LossConfig(perceptual_layers=[15, 3, 8, 3]).perceptual_layers == [3, 8, 15]
    with pytest.raises(ValueError):
        LossConfig(perceptual_layers=[-1])


@pytest.mark.parametrize("breakpoint", [0.0, 1.0])
def test_breakpoint_must_be_interior(breakpoint):
    with pytest.raises(ValueError):
        RadiometryConfig(weight_breakpoint=breakpoint)


def test_synthetic_spec_validation():
    assert SyntheticSpec(size=32).size == (32, 32)
    with pytest.raises(ValueError):
        SyntheticSpec(size=8)
    with pytest.raises(ValueError):
        SyntheticSpec(ev_set=(0.0, 0.0, 2.0))


@pytest.mark.parametrize("ev_set", [(0.0, 0.0, 2.0), (2.0, 0.0, -2.0), (-2.0, 1.0, 1.0)])
def test_synthetic_dataset_ev_set_must_increase(ev_set):
    with pytest.raises(ConfigError, match="strictly increasing"):
        SyntheticDatasetConfig(ev_set=ev_set)
    with pytest.raises(ConfigError):
        with_overrides(SyntheticDatasetConfig(), ev_set=ev_set)


def test_bad_synth_ev_set_in_document_is_a_config_error(tmp_path):
    bad = tmp_path / "bad_ev.json"
    bad.write_text(json.dumps({"synth": {"ev_set": [0.0, 0.0, 2.0]}}))
    with pytest.raises(ConfigError):
        load_config(bad)
    assert SyntheticDatasetConfig(ev_set=(-3.0, 0.0, 3.0)).ev_set == (-3.0, 0.0, 3.0)
