"""Repository for per-scene supervision artifacts with Protocol."""

import json
from pathlib import Path
from typing import Dict, List, Optional, Protocol, Union

import numpy as np

from app.core.exceptions import MissingArtifactError, NotFoundError
from app.core.logging import setup_logger
from app.schemas.images import ExposureImage, HdrImage, LinearImage, Mask
from app.schemas.scene import Scene, SupervisionArtifacts
from app.services.hdr_io import load_hdr_native, save_hdr_native, write_mask_png

logger = setup_logger(__name__)

MANIFEST_FILE = "manifest.json"
_REQUIRED = (
    "y_color",
    "m_sp",
    "m_se",
    "aligned_ldr_1",
    "aligned_ldr_3",
    "aligned_hdr_1",
    "aligned_hdr_3",
)


class SupervisionRepositoryProtocol(Protocol):
    """Protocol for SupervisionRepository interface."""

    def save(self, artifacts: SupervisionArtifacts) -> Path: ...

    def load(self, scene: Scene) -> SupervisionArtifacts: ...

    def exists(self, scene_id: str) -> bool: ...

    def save_visualizations(self, scene_id: str, maps: Dict[str, np.ndarray]) -> List[Path]: ...


class SupervisionRepository:
    """Stores supervision as ``.shdr`` files under ``root/<scene_id>``."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    def _dir(self, scene_id: str) -> Path:
        return self.root / scene_id

    def exists(self, scene_id: str) -> bool:
        return (self._dir(scene_id) / MANIFEST_FILE).is_file()

    def save(self, artifacts: SupervisionArtifacts) -> Path:
        """Write all artifacts and a manifest listing them."""
        scene_dir = self._dir(artifacts.scene_id)
        scene_dir.mkdir(parents=True, exist_ok=True)
        arrays = {
            "y_color": artifacts.y_color.pixels,
            "m_sp": artifacts.m_sp.values,
            "m_se": artifacts.m_se.values,
            "aligned_ldr_1": artifacts.aligned_ldr[0].pixels,
            "aligned_ldr_3": artifacts.aligned_ldr[1].pixels,
            "aligned_hdr_1": artifacts.aligned_hdr[0].pixels,
            "aligned_hdr_3": artifacts.aligned_hdr[1].pixels,
        }
        if artifacts.y_stru is not None:
            arrays["y_stru"] = artifacts.y_stru.pixels
        if artifacts.m_color is not None:
            arrays["m_color"] = artifacts.m_color.values

        for name, pixels in arrays.items():
            save_hdr_native(scene_dir / f"{name}.shdr", pixels)

        # A stale structure component from an earlier run must not survive a rebuild
        if artifacts.y_stru is None:
            for name in ("y_stru", "m_color"):
                (scene_dir / f"{name}.shdr").unlink(missing_ok=True)

        manifest = {
            "scene_id": artifacts.scene_id,
            "files": sorted(f"{name}.shdr" for name in arrays),
            "has_structure": artifacts.has_structure,
        }
        (scene_dir / MANIFEST_FILE).write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        logger.debug(f"Saved supervision scene_id={artifacts.scene_id} path={scene_dir}")
        return scene_dir

    def load(self, scene: Scene) -> SupervisionArtifacts:
        """
        Load the artifacts of ``scene``.

        Raises:
            MissingArtifactError: If the color supervision was never built
        """
        scene_dir = self._dir(scene.scene_id)
        if not self.exists(scene.scene_id):
            raise MissingArtifactError(
                f"No supervision for scene {scene.scene_id} under {self.root}; "
                f"run build-supervision first"
            )
        missing = [n for n in _REQUIRED if not (scene_dir / f"{n}.shdr").is_file()]
        if missing:
            raise MissingArtifactError(
                f"Incomplete supervision for scene {scene.scene_id}: missing {missing}"
            )

        def read(name: str) -> np.ndarray:
            return load_hdr_native(scene_dir / f"{name}.shdr")

        def read_optional(name: str) -> Optional[np.ndarray]:
            path = scene_dir / f"{name}.shdr"
            return load_hdr_native(path) if path.is_file() else None

        i1, _, i3 = scene.frames
        reference_ev = scene.reference_ev

        def ldr(name: str, frame: ExposureImage) -> ExposureImage:
            pixels = np.clip(read(name), 0.0, 1.0)
            return ExposureImage(pixels=pixels, ev=frame.ev, bit_depth=frame.bit_depth)

        def linear(name: str) -> LinearImage:
            return LinearImage(pixels=np.maximum(read(name), 0.0), reference_ev=reference_ev)

        y_stru = read_optional("y_stru")
        m_color = read_optional("m_color")
        return SupervisionArtifacts(
            scene_id=scene.scene_id,
            y_color=HdrImage(pixels=np.clip(read("y_color"), 0.0, 1.0), role="color_component"),
            m_sp=Mask(values=np.clip(read("m_sp"), 0.0, 1.0), soft=True),
            m_se=Mask(values=read("m_se")),
            aligned_ldr=(ldr("aligned_ldr_1", i1), ldr("aligned_ldr_3", i3)),
            aligned_hdr=(linear("aligned_hdr_1"), linear("aligned_hdr_3")),
            y_stru=(
                HdrImage(pixels=np.clip(y_stru, 0.0, 1.0), role="structure_component")
                if y_stru is not None
                else None
            ),
            m_color=Mask(values=m_color) if m_color is not None else None,
        )

    def load_all(self, scenes: List[Scene]) -> List[SupervisionArtifacts]:
        if not self.root.is_dir():
            raise NotFoundError(f"Supervision directory not found: {self.root}")
        return [self.load(scene) for scene in scenes]

    def save_visualizations(self, scene_id: str, maps: Dict[str, np.ndarray]) -> List[Path]:
        """8-bit grayscale PNGs under ``<scene_id>/viz``."""
        viz_dir = self._dir(scene_id) / "viz"
        return [
            write_mask_png(viz_dir / f"{name}.png", values)
            for name, values in sorted(maps.items())
        ]
