"""Geometric-series model of repeated enhancement.

With a stage-independent contraction ``alpha`` the stage-n target is

    HR_n = y + sum_{i=1..n} alpha^i (y - y_bar)
         = y + alpha (1 - alpha^n) / (1 - alpha) * (y - y_bar)

and converges to y + alpha / (1 - alpha) * (y - y_bar).  Works for scalars
and for arrays (pixelwise).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .resample import downscale2x, upscale2x


@dataclass
class FixedPointParams:
    y: float | np.ndarray
    y_bar: float | np.ndarray
    alpha: float

    @classmethod
    def from_image(cls, y: np.ndarray, alpha: float) -> "FixedPointParams":
        """y_bar = U(D(y)) with the Lanczos pair, unclamped."""
        y_bar = upscale2x(downscale2x(y, clamp=False), clamp=False)
        return cls(y=y, y_bar=y_bar, alpha=alpha)


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1) for convergence, got {alpha}")


def series_gain(alpha: float, n: int) -> float:
    """sum_{i=1..n} alpha^i."""
    _check_alpha(alpha)
    if n < 0:
        raise ValueError("n must be >= 0")
    if alpha == 0.0:
        return 0.0
    return alpha * (1.0 - alpha ** n) / (1.0 - alpha)


def predict_hr_n(p: FixedPointParams, n: int):
    gain = series_gain(p.alpha, n)
    if n == 0:
        return p.y
    return p.y + gain * (np.asarray(p.y) - p.y_bar)


def fixed_point_limit(p: FixedPointParams):
    _check_alpha(p.alpha)
    return p.y + (p.alpha / (1.0 - p.alpha)) * (np.asarray(p.y) - p.y_bar)


def trajectory(alpha: float, n: int, detail: float = 1.0) -> list[tuple[int, float, float]]:
    """(stage, increment, cumulative offset) for stages 1..n."""
    rows = []
    for k in range(1, n + 1):
        rows.append((k, alpha ** k * detail, series_gain(alpha, k) * detail))
    return rows


@dataclass
class GeometricFit:
    alpha: float
    scale: float
    predicted: np.ndarray
    residuals: np.ndarray

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.residuals ** 2)))


def _model(alpha: float, n: np.ndarray) -> np.ndarray:
    return 1.0 - alpha ** n


def fit_geometric(dr: Sequence[float]) -> GeometricFit:
    """Least-squares fit of DR_n ~= C (1 - alpha^n), n = 1..len(dr).

    For fixed alpha the optimal C is linear; alpha is found by a bounded
    1-D search on (0, 1).
    """
    d = np.asarray(dr, dtype=np.float64)
    if d.size < 3:
        raise ValueError("need at least 3 stages to fit")
    if np.allclose(d, d[0]):
        raise ValueError("degenerate DR sequence (all values equal)")
    n = np.arange(1, d.size + 1, dtype=np.float64)

    def best_scale(a: float) -> float:
        g = _model(a, n)
        return float(g @ d / (g @ g))

    def sse(a: float) -> float:
        r = d - best_scale(a) * _model(a, n)
        return float(r @ r)

    # coarse grid guards against a local minimum, then Brent refines
    grid = np.linspace(1e-4, 1 - 1e-4, 2001)
    i = int(np.argmin([sse(a) for a in grid]))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(sse, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
    alpha = float(res.x)
    c = best_scale(alpha)
    pred = c * _model(alpha, n)
    return GeometricFit(alpha=alpha, scale=c, predicted=pred, residuals=d - pred)


def empirical_alpha_trajectory(records) -> GeometricFit:
    """Fit the geometric model to the DR column of completed stage records."""
    return fit_geometric([r.diff_ratio_pct for r in records])


def write_theory_csv(records, path) -> GeometricFit:
    fit = empirical_alpha_trajectory(records)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stage", "diff_ratio_pct", "predicted_pct", "residual_pct", "alpha_hat", "alpha_fit"])
        for r, p, e in zip(records, fit.predicted, fit.residuals):
            w.writerow([r.stage, f"{r.diff_ratio_pct:.6f}", f"{p:.6f}", f"{e:.6f}",
                        f"{r.alpha_hat:.6f}", f"{fit.alpha:.6f}"])
    return fit
