"""Supervised self-organizing-map training of the high-dimensional landmarks.

The user-owned 2D layout acts as the topology: the neighborhood kernel is a
Gaussian over distances between layout positions, not over lattice indices,
because the layout is an arbitrary user drawing.  sigma and alpha stay under
caller control; nothing here anneals them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, InputError, LandmarkModel, ParameterError, Rng

FIT_EPS = 1e-6  # softening for inverse-distance weights, squared layout units


@dataclass(frozen=True)
class SomConfig:
    sigma: float = 1.0  # neighborhood radius, layout units
    alpha: float = 0.1  # learning rate
    batch_size: int = 256  # samples applied per tick

    def __post_init__(self):
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be > 0, got {self.sigma}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.batch_size < 1:
            raise ParameterError(f"batch_size must be >= 1, got {self.batch_size}")


def bmu(point, hi: np.ndarray) -> int:
    """Index of the landmark nearest to `point`; ties go to the lower index."""
    p = np.asarray(point, dtype=np.float64).ravel()
    h = np.asarray(hi, dtype=np.float64)
    diff = h - p[None, :]
    d2 = np.einsum("gd,gd->g", diff, diff)
    return int(np.argmin(d2))


def som_tick(dataset: Dataset, model: LandmarkModel, cfg: SomConfig, rng: Rng) -> np.ndarray:
    """One training tick; returns the updated hi matrix (lo is never touched).

    Draws ``batch_size`` sample indices and applies them sequentially: each
    sample pulls every landmark toward it, attenuated by the Gaussian kernel
    h(j, b) = exp(-||lo_j - lo_b||^2 / (2 sigma^2)) over the layout distance
    to the sample's best matching unit b.
    """
    hi = model.hi.astype(np.float64)
    lo = model.lo.astype(np.float64)
    points = dataset.points
    lo_d2 = None  # pairwise layout distances are tick-constant
    denom = 2.0 * cfg.sigma * cfg.sigma
    sample_idx = rng.integers(0, dataset.n, size=cfg.batch_size)
    for s in sample_idx:
        x = points[s].astype(np.float64)
        diff = hi - x[None, :]
        d2 = np.einsum("gd,gd->g", diff, diff)
        b = int(np.argmin(d2))
        if lo_d2 is None:
            ldiff = lo[:, None, :] - lo[None, :, :]
            lo_d2 = np.einsum("ijk,ijk->ij", ldiff, ldiff)
        h = np.exp(-lo_d2[:, b] / denom)
        hi += cfg.alpha * h[:, None] * (x - hi)
    return hi.astype(np.float32)


def quantization_error(dataset: Dataset, hi: np.ndarray) -> float:
    """Mean squared distance from each point to its nearest landmark."""
    p = dataset.points.astype(np.float64)
    h = np.asarray(hi, dtype=np.float64)
    p_sq = np.einsum("nd,nd->n", p, p)
    h_sq = np.einsum("gd,gd->g", h, h)
    cross = p @ h.T
    d2 = p_sq[:, None] - 2.0 * cross + h_sq[None, :]
    return float(np.mean(np.maximum(d2.min(axis=1), 0.0)))


def fit_hi_for_new_landmark(pos2d, model: LandmarkModel) -> np.ndarray:
    """High-dimensional coordinates for a landmark added at a 2D position.

    Inverse-distance-weighted average of the existing hi rows, with weights
    1 / (||lo_j - pos2d||^2 + eps); an exact hit on an existing layout
    position returns that landmark's hi verbatim.
    """
    if model.g == 0:
        raise InputError("empty model")
    pos = np.asarray(pos2d, dtype=np.float64).ravel()
    if pos.shape[0] != 2:
        raise InputError("pos2d must be a 2-vector")
    diff = model.lo.astype(np.float64) - pos[None, :]
    d2 = np.einsum("gd,gd->g", diff, diff)
    j = int(np.argmin(d2))
    if d2[j] < FIT_EPS:
        return model.hi[j].copy()
    w = 1.0 / (d2 + FIT_EPS)
    fitted = (w @ model.hi.astype(np.float64)) / w.sum()
    return fitted.astype(np.float32)
