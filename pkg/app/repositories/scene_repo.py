"""Repository for scene directories with Protocol.

Layout of one scene::

    <scene_id>/ldr_1.png ldr_2.png ldr_3.png   (8/16-bit PNG or TIFF)
    <scene_id>/exposures.txt                    (three exposure values)
    <scene_id>/gt.shdr | gt.hdr                 (optional ground truth)
    <scene_id>/flow_1.shdr flow_3.shdr          (synthetic scenes: true flows)
    <scene_id>/motion_region.png                (synthetic scenes: moving pixels)
"""

from pathlib import Path
from typing import List, Optional, Protocol, Tuple, Union

import numpy as np

from app.core.exceptions import DataFormatError, NotFoundError, ValidationError
from app.core.logging import setup_logger
from app.schemas.images import ExposureImage, FlowField, HdrImage
from app.schemas.scene import Scene
from app.services.hdr_io import (
    load_hdr_native,
    read_ldr,
    read_rgbe,
    save_hdr_native,
    write_ldr,
    write_mask_png,
)

logger = setup_logger(__name__)

LDR_EXTENSIONS = (".png", ".tif", ".tiff")
EXPOSURES_FILE = "exposures.txt"


def parse_exposures(text: str, source: str = EXPOSURES_FILE) -> Tuple[float, float, float]:
    """Parse three whitespace-separated exposure values (unicode minus accepted)."""
    tokens = text.replace("−", "-").split()
    if len(tokens) != 3:
        raise DataFormatError(f"{source}: expected 3 exposure values, found {len(tokens)}")
    try:
        evs = tuple(float(token) for token in tokens)
    except ValueError as e:
        raise DataFormatError(f"{source}: invalid exposure value: {str(e)}")
    if not (evs[0] < evs[1] < evs[2]):
        raise ValidationError(f"{source}: exposure values must be strictly increasing, got {evs}")
    return evs


class SceneRepositoryProtocol(Protocol):
    """Protocol for SceneRepository interface."""

    def list_scene_dirs(self) -> List[Path]: ...

    def load_scene(self, scene_dir: Union[str, Path]) -> Scene: ...

    def load_all(self) -> List[Scene]: ...

    def save_scene(self, scene: Scene) -> Path: ...


class SceneRepository:
    """Repository for scene directories under ``root``."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    def list_scene_dirs(self) -> List[Path]:
        """Sorted scene directories (those holding an exposures file)."""
        if not self.root.is_dir():
            raise NotFoundError(f"Data directory not found: {self.root}")
        dirs = sorted(p for p in self.root.iterdir() if (p / EXPOSURES_FILE).is_file())
        if not dirs:
            raise NotFoundError(f"No scenes found under {self.root}")
        return dirs

    @staticmethod
    def _find_ldr(scene_dir: Path, index: int) -> Path:
        for ext in LDR_EXTENSIONS:
            candidate = scene_dir / f"ldr_{index}{ext}"
            if candidate.is_file():
                return candidate
        raise NotFoundError(f"Missing frame {scene_dir / f'ldr_{index}.png'} (png/tif)")

    @staticmethod
    def _load_ground_truth(scene_dir: Path) -> Optional[HdrImage]:
        native = scene_dir / "gt.shdr"
        rgbe = scene_dir / "gt.hdr"
        if native.is_file():
            pixels = load_hdr_native(native)
        elif rgbe.is_file():
            pixels = read_rgbe(rgbe)
        else:
            return None
        if pixels.max() > 1.0:
            logger.warning(
                f"Ground truth exceeds 1 and is clipped "
                f"scene={scene_dir.name} max={pixels.max():.3f}"
            )
        return HdrImage(pixels=np.clip(pixels, 0.0, 1.0), role="ground_truth")

    def load_scene(self, scene_dir: Union[str, Path]) -> Scene:
        """
        Load one scene directory.

        Raises:
            NotFoundError: If the directory, a frame or the exposures file is missing
            DataFormatError: If a file cannot be decoded
            ValidationError: If exposures are not increasing or shapes differ
        """
        scene_dir = Path(scene_dir)
        if not scene_dir.is_dir():
            raise NotFoundError(f"Scene directory not found: {scene_dir}")
        exposures = scene_dir / EXPOSURES_FILE
        if not exposures.is_file():
            raise NotFoundError(f"Missing exposures file {exposures}")
        evs = parse_exposures(exposures.read_text(encoding="utf-8"), str(exposures))

        frames = []
        for index, ev in enumerate(evs, start=1):
            pixels, bit_depth = read_ldr(self._find_ldr(scene_dir, index))
            frames.append(ExposureImage(pixels=pixels, ev=ev, bit_depth=bit_depth))

        true_flows = None
        flow_paths = (scene_dir / "flow_1.shdr", scene_dir / "flow_3.shdr")
        if all(p.is_file() for p in flow_paths):
            true_flows = tuple(FlowField(vectors=load_hdr_native(p)) for p in flow_paths)

        motion_region = None
        region_path = scene_dir / "motion_region.png"
        if region_path.is_file():
            motion_region = read_ldr(region_path)[0][..., 0] > 0.5

        return Scene(
            scene_id=scene_dir.name,
            frames=tuple(frames),
            ground_truth=self._load_ground_truth(scene_dir),
            true_flows=true_flows,
            motion_region=motion_region,
        )

    def load_all(self) -> List[Scene]:
        scenes = [self.load_scene(d) for d in self.list_scene_dirs()]
        logger.info(f"Loaded {len(scenes)} scenes from {self.root}")
        return scenes

    def save_scene(self, scene: Scene) -> Path:
        """Write ``scene`` to ``root/<scene_id>``; output bytes depend only on the scene."""
        scene_dir = self.root / scene.scene_id
        scene_dir.mkdir(parents=True, exist_ok=True)
        for index, frame in enumerate(scene.frames, start=1):
            write_ldr(scene_dir / f"ldr_{index}.png", frame.pixels, frame.bit_depth)
        (scene_dir / EXPOSURES_FILE).write_text(
            "".join(f"{ev:g}\n" for ev in scene.evs), encoding="utf-8"
        )
        if scene.ground_truth is not None:
            save_hdr_native(scene_dir / "gt.shdr", scene.ground_truth.pixels)
        if scene.true_flows is not None:
            save_hdr_native(scene_dir / "flow_1.shdr", scene.true_flows[0].vectors)
            save_hdr_native(scene_dir / "flow_3.shdr", scene.true_flows[1].vectors)
        if scene.motion_region is not None:
            write_mask_png(scene_dir / "motion_region.png", scene.motion_region.astype(np.float64))
        logger.debug(f"Saved scene scene_id={scene.scene_id} path={scene_dir}")
        return scene_dir
