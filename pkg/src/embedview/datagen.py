"""Synthetic dataset generators for demos, benchmarks, and tests."""

from __future__ import annotations

import numpy as np

from .core import ParameterError, Rng


def uniform(n: int, d: int, seed: int) -> np.ndarray:
    """n x d points with coordinates uniform in [0, 1)."""
    if n < 1 or d < 1:
        raise ParameterError("need n >= 1 and d >= 1")
    return Rng(seed).uniform(0.0, 1.0, size=(n, d)).astype(np.float32)


def gaussians(
    c: int, n: int, d: int, seed: int, sd: float = 0.5, center_span: float = 10.0
) -> tuple[np.ndarray, np.ndarray]:
    """c spherical Gaussian clusters; returns (points, cluster labels)."""
    if c < 1:
        raise ParameterError("need at least one cluster")
    rng = Rng(seed)
    centers = rng.uniform(0.0, center_span, size=(c, d))
    labels = rng.integers(0, c, size=n)
    noise = rng.normal(0.0, 1.0, size=(n, d)) * sd
    points = centers[labels] + noise
    return points.astype(np.float32), labels.astype(np.int64)


def extruded_s(
    n: int, seed: int, noise: float = 0.05, return_t: bool = False
):
    """3D S-curve swept along the y axis: x = sin t, z = sign(t)(cos t - 1)."""
    rng = Rng(seed)
    t = rng.uniform(-1.5 * np.pi, 1.5 * np.pi, size=n)
    y = rng.uniform(0.0, 2.0, size=n)
    x = np.sin(t)
    z = np.sign(t) * (np.cos(t) - 1.0)
    pts = np.stack([x, y, z], axis=1)
    if noise > 0:
        pts = pts + rng.normal(0.0, noise, size=(n, 3))
    pts = pts.astype(np.float32)
    return (pts, t) if return_t else pts
