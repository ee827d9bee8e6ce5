"""Image interchange (binary PPM), float conversion, and patch extraction.

Two image forms are used throughout:

* ImageU8 -- ``uint8`` array, H x W x 3, interleaved RGB (file form)
* ImageF  -- floating array, 3 x H x W, nominally in [0, 1] (working form)
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np


class PPMError(ValueError):
    pass


def _read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    """Skip whitespace and ``#`` comments, then read one header token."""
    n = len(buf)
    while pos < n:
        if buf[pos:pos + 1].isspace():
            pos += 1
        elif buf[pos:pos + 1] == b"#":
            nl = buf.find(b"\n", pos)
            pos = n if nl < 0 else nl + 1
        else:
            break
    end = pos
    while end < n and not buf[end:end + 1].isspace() and buf[end:end + 1] != b"#":
        end += 1
    if end == pos:
        raise PPMError("truncated PPM header")
    return buf[pos:end], end


def parse_ppm(buf: bytes) -> np.ndarray:
    if buf[:2] != b"P6":
        raise PPMError(f"not a binary PPM (magic {buf[:2]!r}); only P6 is supported")
    pos = 2
    fields = []
    for _ in range(3):
        tok, pos = _read_token(buf, pos)
        if not tok.isdigit():
            raise PPMError(f"bad PPM header field {tok!r}")
        fields.append(int(tok))
    width, height, maxval = fields
    if maxval != 255:
        raise PPMError(f"unsupported PPM depth: maxval {maxval} (only 255)")
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise PPMError("missing whitespace after PPM header")
    pos += 1
    need = width * height * 3
    payload = buf[pos:pos + need]
    if len(payload) != need:
        raise PPMError(f"truncated PPM payload: {len(payload)} of {need} bytes")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3).copy()


def read_ppm(path) -> np.ndarray:
    return parse_ppm(Path(path).read_bytes())


def encode_ppm(img: np.ndarray) -> bytes:
    img = np.asarray(img)
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise PPMError(f"write_ppm expects uint8 H x W x 3, got {img.dtype} {img.shape}")
    h, w, _ = img.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img).tobytes()


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def write_ppm(img: np.ndarray, path) -> None:
    atomic_write_bytes(path, encode_ppm(img))


def to_float(img: np.ndarray, dtype=np.float32) -> np.ndarray:
    """uint8 HxWx3 -> float 3xHxW in [0, 1]."""
    return (np.asarray(img, dtype=np.float64).transpose(2, 0, 1) / 255.0).astype(dtype)


def to_u8(img: np.ndarray) -> np.ndarray:
    """float 3xHxW -> uint8 HxWx3, clamping out-of-range values."""
    a = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * 255.0
    return np.floor(a + 0.5).astype(np.uint8).transpose(1, 2, 0).copy()


def read_image(path, dtype=np.float32) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() in (".ppm", ".pnm"):
        return to_float(read_ppm(path), dtype)
    from PIL import Image  # optional convenience for non-PPM inputs

    with Image.open(path) as im:
        return to_float(np.asarray(im.convert("RGB")), dtype)


IMAGE_SUFFIXES = (".ppm", ".pnm", ".png")


def list_images(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"image directory not found: {d}")
    files = sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise FileNotFoundError(f"no images in {d}")
    return files


def crop_even(img: np.ndarray) -> np.ndarray:
    h, w = img.shape[-2:]
    return img[..., : h - h % 2, : w - w % 2]


def extract_patches(img: np.ndarray, size: int, count: int, seed: int) -> list[np.ndarray]:
    """``count`` random size x size crops (duplicates allowed), seeded."""
    h, w = img.shape[-2:]
    if h < size or w < size:
        raise ValueError(f"image {h}x{w} smaller than patch size {size}")
    rng = np.random.default_rng(seed)
    tops = rng.integers(0, h - size + 1, size=count)
    lefts = rng.integers(0, w - size + 1, size=count)
    return [img[..., t:t + size, l:l + size].copy() for t, l in zip(tops, lefts)]
