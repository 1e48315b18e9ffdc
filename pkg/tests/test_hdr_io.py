import struct

import numpy as np
import pytest

from app.core.exceptions import DataFormatError, NotFoundError
from app.services.hdr_io import (
    float_to_rgbe,
    load_hdr_native,
    quantize,
    read_ldr,
    read_rgbe,
    rgbe_to_float,
    save_hdr_native,
    write_ldr,
    write_mask_png,
    write_rgbe,
)

HEADER = b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n"


def test_native_container_is_lossless_for_float32(tmp_path, rng):
    pixels = rng.uniform(0, 1, (5, 7, 3)).astype(np.float32).astype(np.float64)
    path = save_hdr_native(tmp_path / "a.shdr", pixels)
    np.testing.assert_array_equal(load_hdr_native(path), pixels)


def test_native_container_layout(tmp_path):
    path = save_hdr_native(tmp_path / "a.shdr", np.ones((2, 3)))
    data = path.read_bytes()
    assert struct.unpack_from("<4sIIII", data) == (b"SHDR", 1, 2, 3, 1)
    assert len(data) == 20 + 2 * 3 * 4
    assert load_hdr_native(path).shape == (2, 3, 1)


def test_native_container_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.shdr"
    path.write_bytes(struct.pack("<4sIIII", b"XXXX", 1, 1, 1, 1) + b"\0" * 4)
    with pytest.raises(DataFormatError):
        load_hdr_native(path)


def test_native_container_rejects_short_payload(tmp_path):
    path = save_hdr_native(tmp_path / "a.shdr", np.ones((4, 4, 3)))
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(DataFormatError):
        load_hdr_native(path)


def test_native_container_missing_file(tmp_path):
    with pytest.raises(NotFoundError):
        load_hdr_native(tmp_path / "absent.shdr")


def test_rgbe_decoding_of_known_quadruples():
    rgbe = np.array([[128, 64, 0, 129], [0, 0, 0, 0], [255, 255, 255, 128]], dtype=np.uint8)
    decoded = rgbe_to_float(rgbe)
    np.testing.assert_allclose(decoded[0], [1.0, 0.5, 0.0])
    np.testing.assert_array_equal(decoded[1], [0.0, 0.0, 0.0])
    np.testing.assert_allclose(decoded[2], [255 / 256] * 3)


def test_rgbe_encoding_relative_error(rng):
    pixels = rng.uniform(1e-3, 10.0, (64, 3))
    decoded = rgbe_to_float(float_to_rgbe(pixels))
    brightest = pixels.max(axis=1, keepdims=True)
    assert np.all(np.abs(decoded - pixels) <= brightest / 256 + 1e-12)


def test_rgbe_file_round_trip(tmp_path, rng):
    pixels = rng.uniform(0, 1, (6, 9, 3))
    path = write_rgbe(tmp_path / "a.hdr", pixels)
    assert path.read_bytes().startswith(HEADER + b"-Y 6 +X 9\n")
    decoded = read_rgbe(path)
    assert decoded.shape == (6, 9, 3)
    assert np.all(np.abs(decoded - pixels) <= pixels.max(axis=2, keepdims=True) / 256 + 1e-12)


def test_rgbe_run_length_scanline(tmp_path):
    width = 8
    line = bytes([2, 2, 0, width])
    line += bytes([128 + 8, 128])                          # R: one run
    line += bytes([8, 0, 32, 64, 96, 128, 160, 192, 224])  # G: literal
    line += bytes([128 + 4, 64, 4, 1, 2, 3, 4])            # B: run then literal
    line += bytes([128 + 8, 129])                          # E: one run
    path = tmp_path / "rle.hdr"
    path.write_bytes(HEADER + b"-Y 1 +X 8\n" + line)

    decoded = read_rgbe(path)
    np.testing.assert_allclose(decoded[0, :, 0], 1.0)
    np.testing.assert_allclose(decoded[0, :, 1], np.arange(0, 256, 32) / 128)
    np.testing.assert_allclose(decoded[0, :4, 2], 0.5)
    np.testing.assert_allclose(decoded[0, 4:, 2], np.array([1, 2, 3, 4]) / 128)


def test_rgbe_truncated_run_length_scanline(tmp_path):
    path = tmp_path / "rle.hdr"
    path.write_bytes(HEADER + b"-Y 1 +X 8\n" + bytes([2, 2, 0, 8, 128 + 8, 128, 8, 1]))
    with pytest.raises(DataFormatError):
        read_rgbe(path)


def test_rgbe_truncated_flat_scanline(tmp_path):
    path = tmp_path / "flat.hdr"
    path.write_bytes(HEADER + b"-Y 2 +X 2\n" + bytes(12))
    with pytest.raises(DataFormatError):
        read_rgbe(path)


def test_rgbe_rejects_missing_magic(tmp_path):
    path = tmp_path / "x.hdr"
    path.write_bytes(b"P6\n")
    with pytest.raises(DataFormatError):
        read_rgbe(path)


@pytest.mark.parametrize("bit_depth", [8, 16])
def test_ldr_write_read(tmp_path, rng, bit_depth):
    pixels = quantize(rng.uniform(0, 1, (5, 6, 3)), bit_depth)
    path = write_ldr(tmp_path / "f.png", pixels, bit_depth)
    loaded, depth = read_ldr(path)
    assert depth == bit_depth
    np.testing.assert_allclose(loaded, pixels, atol=1e-12)


def test_ldr_keeps_channel_order(tmp_path):
    pixels = np.zeros((2, 2, 3))
    pixels[..., 0] = 1.0
    loaded, _ = read_ldr(write_ldr(tmp_path / "red.png", pixels))
    np.testing.assert_array_equal(loaded[..., 0], 1.0)
    np.testing.assert_array_equal(loaded[..., 1:], 0.0)


def test_grayscale_png_is_expanded(tmp_path):
    path = write_mask_png(tmp_path / "m.png", np.eye(3))
    loaded, depth = read_ldr(path)
    assert depth == 8
    assert loaded.shape == (3, 3, 3)
    np.testing.assert_array_equal(loaded[..., 2], np.eye(3))


def test_read_ldr_rejects_garbage(tmp_path):
    path = tmp_path / "broken.png"
    path.write_bytes(b"not an image")
    with pytest.raises(DataFormatError):
        read_ldr(path)
