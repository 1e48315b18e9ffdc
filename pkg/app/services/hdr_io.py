"""HDR and LDR file formats.

``.shdr`` is the canonical lossless container::

    b"SHDR" | uint32 version | uint32 H | uint32 W | uint32 C | float32[H*W*C] (row-major)

All integers and floats are little-endian. Radiance RGBE (``.hdr``) is supported for
import/export only; it is lossy.
"""

import re
import struct
from pathlib import Path
from typing import Tuple, Union

import cv2
import numpy as np

from app.core.exceptions import DataFormatError, NotFoundError, ValidationError
from app.core.logging import setup_logger

logger = setup_logger(__name__)

SHDR_MAGIC = b"SHDR"
SHDR_VERSION = 1
_SHDR_HEADER = struct.Struct("<4sIIII")

RGBE_MAGIC = b"#?RADIANCE"
_RGBE_FORMAT = b"FORMAT=32-bit_rle_rgbe"
_RESOLUTION = re.compile(rb"^-Y (\d+) \+X (\d+)$")

PathLike = Union[str, Path]


def _ensure_parent(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)


# --- native container -------------------------------------------------------------------


def save_hdr_native(path: PathLike, pixels: np.ndarray) -> Path:
    """Write an H×W×C array as ``.shdr`` (values stored as float32)."""
    path = Path(path)
    arr = np.asarray(pixels)
    if arr.ndim == 2:
        arr = arr[..., None]
    if arr.ndim != 3:
        raise ValidationError(f"SHDR payload must be H×W×C, got shape {arr.shape}")
    h, w, c = arr.shape
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    _ensure_parent(path)
    path.write_bytes(_SHDR_HEADER.pack(SHDR_MAGIC, SHDR_VERSION, h, w, c) + payload)
    return path


def load_hdr_native(path: PathLike) -> np.ndarray:
    """Read a ``.shdr`` file into a float64 H×W×C array."""
    path = Path(path)
    if not path.exists():
        raise NotFoundError(f"HDR file not found: {path}")
    data = path.read_bytes()
    if len(data) < _SHDR_HEADER.size:
        raise DataFormatError(f"{path}: truncated SHDR header")
    magic, version, h, w, c = _SHDR_HEADER.unpack_from(data)
    if magic != SHDR_MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}, expected {SHDR_MAGIC!r}")
    if version != SHDR_VERSION:
        raise DataFormatError(f"{path}: unsupported SHDR version {version}")
    expected = h * w * c * 4
    payload = data[_SHDR_HEADER.size :]
    if len(payload) != expected:
        raise DataFormatError(
            f"{path}: payload has {len(payload)} bytes, expected {expected} for {h}x{w}x{c}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(h, w, c).astype(np.float64)


# --- Radiance RGBE ----------------------------------------------------------------------


def rgbe_to_float(rgbe: np.ndarray) -> np.ndarray:
    """Decode uint8 (..., 4) RGBE quadruples; exponent 0 decodes to black."""
    rgbe = np.asarray(rgbe)
    mantissa = rgbe[..., :3].astype(np.float64)
    exponent = rgbe[..., 3:].astype(np.int32)
    scale = np.where(exponent > 0, np.ldexp(1.0, exponent - 128), 0.0)
    return (mantissa / 256.0) * scale


def float_to_rgbe(pixels: np.ndarray) -> np.ndarray:
    """Encode non-negative (..., 3) floats as RGBE with round-to-nearest mantissas."""
    pixels = np.asarray(pixels, dtype=np.float64)
    brightest = pixels.max(axis=-1)
    out = np.zeros(pixels.shape[:-1] + (4,), dtype=np.uint8)
    valid = brightest > 1e-32
    _, exponent = np.frexp(np.where(valid, brightest, 1.0))
    scaled = pixels * np.ldexp(256.0, -exponent)[..., None]
    mantissa = np.clip(np.rint(scaled), 0, 255).astype(np.uint8)
    out[..., :3] = np.where(valid[..., None], mantissa, 0)
    out[..., 3] = np.where(valid, np.clip(exponent + 128, 0, 255), 0).astype(np.uint8)
    return out


def write_rgbe(path: PathLike, pixels: np.ndarray) -> Path:
    """Write an H×W×3 array as a flat (non run-length) Radiance file."""
    path = Path(path)
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValidationError(f"RGBE images must be H×W×3, got {arr.shape}")
    if arr.min() < 0 or not np.all(np.isfinite(arr)):
        raise ValidationError("RGBE images must be finite and non-negative")
    h, w, _ = arr.shape
    header = b"\n".join(
        [RGBE_MAGIC, _RGBE_FORMAT, b"", f"-Y {h} +X {w}".encode("ascii"), b""]
    )
    _ensure_parent(path)
    path.write_bytes(header + float_to_rgbe(arr).tobytes())
    return path


def _read_rle_scanline(data: bytes, pos: int, width: int, path: Path) -> Tuple[np.ndarray, int]:
    scanline = np.zeros((width, 4), dtype=np.uint8)
    for channel in range(4):
        i = 0
        while i < width:
            if pos >= len(data):
                raise DataFormatError(f"{path}: truncated run-length scanline")
            count = data[pos]
            pos += 1
            if count > 128:
                count -= 128
                if i + count > width or pos >= len(data):
                    raise DataFormatError(f"{path}: bad run-length scanline")
                scanline[i : i + count, channel] = data[pos]
                pos += 1
            else:
                if count == 0 or i + count > width or pos + count > len(data):
                    raise DataFormatError(f"{path}: bad run-length scanline")
                scanline[i : i + count, channel] = np.frombuffer(
                    data, dtype=np.uint8, count=count, offset=pos
                )
                pos += count
            i += count
    return scanline, pos


def read_rgbe(path: PathLike) -> np.ndarray:
    """
    Read a Radiance ``.hdr`` file.

    Supports flat and new-style run-length scanlines in the ``-Y H +X W`` orientation.

    Raises:
        NotFoundError: If the file is missing
        DataFormatError: On a bad magic, unsupported layout or truncated scanlines
    """
    path = Path(path)
    if not path.exists():
        raise NotFoundError(f"HDR file not found: {path}")
    data = path.read_bytes()
    if not data.startswith(b"#?"):
        raise DataFormatError(f"{path}: missing Radiance magic")

    pos = 0
    while True:
        end = data.find(b"\n", pos)
        if end < 0:
            raise DataFormatError(f"{path}: unterminated Radiance header")
        line = data[pos:end]
        pos = end + 1
        if line.startswith(b"FORMAT=") and line != _RGBE_FORMAT:
            raise DataFormatError(f"{path}: unsupported pixel format {line!r}")
        if line == b"":
            break

    end = data.find(b"\n", pos)
    match = _RESOLUTION.match(data[pos:end] if end >= 0 else b"")
    if match is None:
        raise DataFormatError(f"{path}: unsupported resolution line")
    height, width = int(match.group(1)), int(match.group(2))
    pos = end + 1

    rgbe = np.zeros((height, width, 4), dtype=np.uint8)
    for y in range(height):
        head = data[pos : pos + 4]
        if len(head) < 4:
            raise DataFormatError(f"{path}: truncated at scanline {y}")
        is_rle = 8 <= width < 32768 and head[0] == 2 and head[1] == 2 and head[2] < 128
        if is_rle:
            if (head[2] << 8) + head[3] != width:
                raise DataFormatError(f"{path}: scanline {y} width mismatch")
            rgbe[y], pos = _read_rle_scanline(data, pos + 4, width, path)
        else:
            size = width * 4
            if pos + size > len(data):
                raise DataFormatError(f"{path}: truncated at scanline {y}")
            rgbe[y] = np.frombuffer(data, dtype=np.uint8, count=size, offset=pos).reshape(width, 4)
            pos += size

    return rgbe_to_float(rgbe)


# --- LDR images -------------------------------------------------------------------------


def read_ldr(path: PathLike) -> Tuple[np.ndarray, int]:
    """Read an 8/16-bit PNG or TIFF as RGB float64 in [0, 1] plus its bit depth."""
    path = Path(path)
    if not path.exists():
        raise NotFoundError(f"LDR image not found: {path}")
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise DataFormatError(f"{path}: cannot decode image")
    if raw.dtype == np.uint8:
        bit_depth, scale = 8, 255.0
    elif raw.dtype == np.uint16:
        bit_depth, scale = 16, 65535.0
    else:
        raise DataFormatError(f"{path}: unsupported sample type {raw.dtype}")

    if raw.ndim == 2:
        rgb = np.repeat(raw[..., None], 3, axis=2)
    elif raw.shape[2] == 4:
        rgb = cv2.cvtColor(raw, cv2.COLOR_BGRA2RGB)
    else:
        rgb = cv2.cvtColor(raw, cv2.COLOR_BGR2RGB)
    return rgb.astype(np.float64) / scale, bit_depth


def quantize(pixels: np.ndarray, bit_depth: int) -> np.ndarray:
    """Round [0, 1] values to the grid of a ``bit_depth`` integer encoding."""
    levels = float((1 << bit_depth) - 1)
    return np.rint(np.clip(pixels, 0.0, 1.0) * levels) / levels


def write_ldr(path: PathLike, pixels: np.ndarray, bit_depth: int = 8) -> Path:
    """Write [0, 1] RGB (or H×W grayscale) values as an 8/16-bit PNG or TIFF."""
    path = Path(path)
    levels = (1 << bit_depth) - 1
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    arr = np.rint(np.clip(np.asarray(pixels, np.float64), 0.0, 1.0) * levels).astype(dtype)
    if arr.ndim == 3:
        arr = cv2.cvtColor(arr, cv2.COLOR_RGB2BGR)
    _ensure_parent(path)
    if not cv2.imwrite(str(path), arr):
        raise DataFormatError(f"Failed to write image: {path}")
    return path


def write_mask_png(path: PathLike, values: np.ndarray) -> Path:
    """8-bit grayscale visualization of an H×W or H×W×C map in [0, 1]."""
    arr = np.asarray(values, np.float64)
    if arr.ndim == 3:
        arr = arr.mean(axis=2)
    return write_ldr(path, arr, bit_depth=8)
