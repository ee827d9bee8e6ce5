"""Image difference ratio, residual contraction estimate, and auxiliary quality numbers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LUMA_601 = np.array([0.299, 0.587, 0.114])


def _pair(img, ref) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(img, dtype=np.float64)
    b = np.asarray(ref, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def image_difference_ratio(img, ref) -> float:
    """Mean absolute difference as a percentage of the reference's mean brightness."""
    a, b = _pair(img, ref)
    brightness = b.mean()
    if brightness == 0:
        raise ValueError("difference ratio undefined for an all-zero reference")
    return 100.0 * np.abs(a - b).mean() / brightness


def mse(img, ref) -> float:
    a, b = _pair(img, ref)
    return float(np.mean((a - b) ** 2))


def psnr(img, ref) -> float:
    """PSNR in dB for [0, 1] images; ``math.inf`` for identical inputs."""
    err = mse(img, ref)
    if err == 0:
        return math.inf
    return 10.0 * math.log10(1.0 / err)


def sharpness_proxy(img) -> float:
    """Mean squared 4-neighbour Laplacian of Rec. 601 luma over interior pixels.

    Accepts CxHxW (C = 3) or a single HxW plane.
    """
    a = np.asarray(img, dtype=np.float64)
    y = np.tensordot(LUMA_601, a, axes=(0, 0)) if a.ndim == 3 else a
    if min(y.shape) < 3:
        raise ValueError(f"sharpness_proxy needs at least 3x3 pixels, got {y.shape}")
    lap = (y[:-2, 1:-1] + y[2:, 1:-1] + y[1:-1, :-2] + y[1:-1, 2:]) - 4.0 * y[1:-1, 1:-1]
    return float(np.mean(lap * lap))


@dataclass
class AlphaEstimate:
    alpha_hat: float
    energy: float
    fit_residual: float


def estimate_alpha(r_y_down, r_x) -> AlphaEstimate:
    """Least-squares scalar alpha with r_y_down ~= alpha * r_x."""
    ry, rx = _pair(r_y_down, r_x)
    energy = float(np.sum(rx * rx))
    if energy == 0:
        raise ValueError("estimate_alpha: r_x has zero energy")
    alpha = float(np.sum(ry * rx)) / energy
    resid = float(np.sqrt(np.sum((ry - alpha * rx) ** 2)))
    return AlphaEstimate(alpha_hat=alpha, energy=energy, fit_residual=resid)
