"""Synthetic low-resolution inputs: block-DCT JPEG surrogate plus 2x downscale."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .resample import downscale2x

ORDERS = ("compress_then_downscale", "downscale_then_compress")

# ITU-T T.81 Annex K luminance table
JPEG_LUMA_TABLE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.int64)


def _dct_matrix(n: int = 8) -> np.ndarray:
    k = np.arange(n)[:, None]
    x = np.arange(n)[None, :]
    c = np.sqrt(2.0 / n) * np.cos(np.pi * (2 * x + 1) * k / (2 * n))
    c[0] /= np.sqrt(2.0)
    return c


DCT8 = _dct_matrix(8)


@dataclass
class DegradeConfig:
    quality: int = 30
    order: str = "compress_then_downscale"
    enabled: bool = True

    def __post_init__(self):
        if not 1 <= int(self.quality) <= 100:
            raise ValueError(f"JPEG quality must be in [1, 100], got {self.quality}")
        if self.order not in ORDERS:
            raise ValueError(f"degrade order must be one of {ORDERS}, got {self.order!r}")


def dct8_forward(block: np.ndarray) -> np.ndarray:
    """Orthonormal 2-D DCT-II of an 8x8 block (or a stack of them)."""
    return DCT8 @ block @ DCT8.T


def dct8_inverse(coef: np.ndarray) -> np.ndarray:
    return DCT8.T @ coef @ DCT8


def quant_table(quality: int) -> np.ndarray:
    """Standard IJG quality scaling of the luminance table."""
    if not 1 <= quality <= 100:
        raise ValueError(f"JPEG quality must be in [1, 100], got {quality}")
    scale = 5000 // quality if quality < 50 else 200 - 2 * quality
    return np.maximum((JPEG_LUMA_TABLE * scale + 50) // 100, 1)


def jpeg_surrogate(img: np.ndarray, quality: int) -> np.ndarray:
    """Quantize every 8x8 block of every channel in the DCT domain.

    ``img`` is a float image in [0, 1] with spatial axes last (HxW or CxHxW).
    Sizes that are not multiples of 8 are edge-padded, then cropped back.
    """
    q = quant_table(quality).astype(np.float64)
    img = np.asarray(img)
    h, w = img.shape[-2:]
    ph, pw = -h % 8, -w % 8
    x = img.astype(np.float64) * 255.0 - 128.0
    if ph or pw:
        x = np.pad(x, [(0, 0)] * (x.ndim - 2) + [(0, ph), (0, pw)], mode="edge")
    lead = x.shape[:-2]
    hb, wb = x.shape[-2] // 8, x.shape[-1] // 8
    blocks = x.reshape(*lead, hb, 8, wb, 8).swapaxes(-3, -2)  # ..., hb, wb, 8, 8
    coef = dct8_forward(blocks)
    coef = np.floor(coef / q + 0.5) * q
    rec = dct8_inverse(coef).swapaxes(-3, -2).reshape(x.shape)
    rec = rec[..., :h, :w]
    out = np.clip((rec + 128.0) / 255.0, 0.0, 1.0)
    return out.astype(img.dtype if img.dtype.kind == "f" else np.float64)


def make_lr(hr: np.ndarray, cfg: DegradeConfig | None = None) -> np.ndarray:
    cfg = cfg or DegradeConfig()
    if not cfg.enabled:
        return downscale2x(hr)
    if cfg.order == "compress_then_downscale":
        return downscale2x(jpeg_surrogate(hr, cfg.quality))
    return jpeg_surrogate(downscale2x(hr), cfg.quality)
