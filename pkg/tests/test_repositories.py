import numpy as np
import pytest

from app.core.exceptions import (
    DataFormatError,
    MissingArtifactError,
    NotFoundError,
    ValidationError,
)
from app.repositories.scene_repo import SceneRepository, parse_exposures
from app.repositories.supervision_repo import SupervisionRepository
from app.services.hdr_io import write_rgbe
from app.services.supervision import SupervisionService


def tree_bytes(root):
    return {
        p.relative_to(root).as_posix(): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def test_parse_exposures_accepts_unicode_minus():
    assert parse_exposures("−2\n0\n2\n") == (-2.0, 0.0, 2.0)
    assert parse_exposures("-3 0 3") == (-3.0, 0.0, 3.0)


@pytest.mark.parametrize("text", ["0 2", "a b c", "1 2 3 4"])
def test_parse_exposures_rejects_malformed(text):
    with pytest.raises(DataFormatError):
        parse_exposures(text)


def test_parse_exposures_rejects_unordered():
    with pytest.raises(ValidationError):
        parse_exposures("2 0 -2")


def test_scene_round_trip(tmp_path, make_scene):
    scene = make_scene(motion="rect", size=32, seed=2, scene_id="s1")
    repo = SceneRepository(tmp_path)
    repo.save_scene(scene)
    loaded = repo.load_scene(tmp_path / "s1")

    assert loaded.scene_id == "s1"
    assert loaded.evs == scene.evs
    for a, b in zip(loaded.frames, scene.frames):
        np.testing.assert_array_equal(a.pixels, b.pixels)
        assert a.bit_depth == b.bit_depth
    np.testing.assert_array_equal(loaded.ground_truth.pixels, scene.ground_truth.pixels)
    np.testing.assert_array_equal(loaded.true_flows[0].vectors, scene.true_flows[0].vectors)
    np.testing.assert_array_equal(loaded.motion_region, scene.motion_region)
    assert (tmp_path / "s1" / "exposures.txt").read_text() == "-2\n0\n2\n"


def test_sixteen_bit_frames_round_trip(tmp_path, make_scene):
    scene = make_scene(size=16, bit_depth=16, scene_id="deep")
    repo = SceneRepository(tmp_path)
    repo.save_scene(scene)
    loaded = repo.load_scene(tmp_path / "deep")
    assert loaded.frames[0].bit_depth == 16
    np.testing.assert_array_equal(loaded.frames[2].pixels, scene.frames[2].pixels)


def test_scene_without_ground_truth(tmp_path, make_scene):
    scene = make_scene(size=16, scene_id="plain").model_copy(
        update={"ground_truth": None, "true_flows": None, "motion_region": None}
    )
    repo = SceneRepository(tmp_path)
    repo.save_scene(scene)
    loaded = repo.load_scene(tmp_path / "plain")
    assert loaded.ground_truth is None
    assert loaded.true_flows is None


def test_radiance_ground_truth_is_clipped(tmp_path, make_scene):
    scene = make_scene(size=16, scene_id="rgbe").model_copy(update={"ground_truth": None})
    repo = SceneRepository(tmp_path)
    repo.save_scene(scene)
    write_rgbe(tmp_path / "rgbe" / "gt.hdr", np.full((16, 16, 3), 2.0))
    loaded = repo.load_scene(tmp_path / "rgbe")
    assert loaded.ground_truth.pixels.max() == 1.0


def test_load_all_sorted(tmp_path, make_scene):
    repo = SceneRepository(tmp_path)
    for name in ("b", "a"):
        repo.save_scene(make_scene(size=16, scene_id=name))
    (tmp_path / "notes").mkdir()
    assert [s.scene_id for s in repo.load_all()] == ["a", "b"]


def test_missing_scene_data(tmp_path, make_scene):
    with pytest.raises(NotFoundError):
        SceneRepository(tmp_path / "absent").load_all()
    with pytest.raises(NotFoundError):
        SceneRepository(tmp_path).load_all()

    repo = SceneRepository(tmp_path)
    repo.save_scene(make_scene(size=16, scene_id="s"))
    (tmp_path / "s" / "ldr_3.png").unlink()
    with pytest.raises(NotFoundError):
        repo.load_scene(tmp_path / "s")


def test_supervision_round_trip(tmp_path, make_scene, tiny_train_config):
    scene = make_scene(motion="rect", size=32, scene_id="s")
    artifacts = SupervisionService(tiny_train_config).build_color(scene)
    repo = SupervisionRepository(tmp_path)
    repo.save(artifacts)
    assert repo.exists("s")

    loaded = repo.load(scene)
    assert not loaded.has_structure
    np.testing.assert_allclose(loaded.y_color.pixels, artifacts.y_color.pixels, atol=1e-7)
    np.testing.assert_array_equal(loaded.m_se.values, artifacts.m_se.values)
    assert loaded.aligned_ldr[0].ev == scene.frames[0].ev


def test_supervision_rewrite_is_byte_identical(tmp_path, make_scene, tiny_train_config):
    scene = make_scene(motion="shift", size=32, scene_id="s")
    repo = SupervisionRepository(tmp_path)
    service = SupervisionService(tiny_train_config, repo)
    service.build_all([scene], viz=True)
    first = tree_bytes(tmp_path)
    service.build_all([scene], viz=True)
    assert tree_bytes(tmp_path) == first
    assert {"s/viz/m_sp.png", "s/viz/m_se.png", "s/viz/m_se_unweighted.png"} <= set(first)


def test_supervision_missing(tmp_path, make_scene):
    scene = make_scene(size=16, scene_id="s")
    with pytest.raises(MissingArtifactError):
        SupervisionRepository(tmp_path).load(scene)
    with pytest.raises(NotFoundError):
        SupervisionRepository(tmp_path / "absent").load_all([scene])
