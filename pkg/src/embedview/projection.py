"""Turn each point's nearest landmarks into a 2D position.

Per point: distances become scores (smooth, maximal at the nearest landmark,
exactly zero at the k-th), every landmark pair contributes the difference
between the point's coordinate along the high-dimensional line through the
pair and the same coordinate in the 2D layout, and the score-weighted squared
disagreement is minimized by a 2x2 linear solve (Cramer's rule).

The accumulation visits unordered pairs once, in fixed ascending (u, v)
order, with float64 accumulators, so results are bit-stable run to run and
independent of how callers chunk the points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import EmbedParams, InputError, LandmarkModel, ParameterError
from .knn import NeighborList, knn

SCORE_EPS = 1e-9
PAIR_EPS = 1e-12  # absolute, on squared pair norms
DET_REL = 1e-9
DET_ABS = 1e-30


@dataclass(frozen=True)
class ScoreVector:
    """Non-negative weights aligned with one NeighborList row; last entry is 0."""

    scores: np.ndarray  # k float64, non-increasing


@njit(cache=True)
def _score_row(sqdists, out):
    k = sqdists.shape[0]
    sigma = 0.0
    for t in range(k):
        out[t] = math.sqrt(float(sqdists[t]))
        sigma += out[t]
    sigma /= k
    if sigma < SCORE_EPS:
        for t in range(k - 1):
            out[t] = 1.0
        out[k - 1] = 0.0
        return
    denom = 2.0 * sigma * sigma
    tail = math.exp(-(out[k - 1] * out[k - 1]) / denom)
    for t in range(k):
        v = math.exp(-(out[t] * out[t]) / denom) - tail
        out[t] = v if v > 0.0 else 0.0
    if out[0] < SCORE_EPS:
        for t in range(k - 1):
            out[t] = 1.0
        out[k - 1] = 0.0


@njit(cache=True)
def _score_rows(sqdists, out):
    for i in range(sqdists.shape[0]):
        _score_row(sqdists[i], out[i])


@njit(cache=True)
def _project_rows(points, hi, lo, nbr_idx, scores, out):
    n = points.shape[0]
    d = points.shape[1]
    k = nbr_idx.shape[1]
    for i in range(n):
        a11 = 0.0
        a12 = 0.0
        a22 = 0.0
        c1 = 0.0
        c2 = 0.0
        for u in range(k):
            su = scores[i, u]
            if su <= 0.0:
                continue
            ju = nbr_idx[i, u]
            for v in range(u + 1, k):
                w = su * scores[i, v]
                if w <= 0.0:
                    continue
                jv = nbr_idx[i, v]
                hd2 = 0.0
                dnum = 0.0
                for c in range(d):
                    lu = float(hi[ju, c])
                    e = float(hi[jv, c]) - lu
                    hd2 += e * e
                    dnum += (float(points[i, c]) - lu) * e
                if hd2 < PAIR_EPS:
                    continue
                lux = float(lo[ju, 0])
                luy = float(lo[ju, 1])
                ex = float(lo[jv, 0]) - lux
                ey = float(lo[jv, 1]) - luy
                ld2 = ex * ex + ey * ey
                if ld2 < PAIR_EPS:
                    continue
                g1 = ex / ld2
                g2 = ey / ld2
                h = dnum / hd2 + g1 * lux + g2 * luy
                a11 += w * g1 * g1
                a12 += w * g1 * g2
                a22 += w * g2 * g2
                c1 += w * h * g1
                c2 += w * h * g2
        det = a11 * a22 - a12 * a12
        tr = a11 + a22
        if det < DET_REL * tr * tr + DET_ABS:
            near = nbr_idx[i, 0]
            out[i, 0] = lo[near, 0]
            out[i, 1] = lo[near, 1]
        else:
            out[i, 0] = np.float32((c1 * a22 - c2 * a12) / det)
            out[i, 1] = np.float32((a11 * c2 - a12 * c1) / det)


def scores(sqdists) -> ScoreVector:
    """Convert one ascending row of squared distances into landmark scores.

    With d_i = sqrt(sqdists[i]) and sigma the mean of the d_i, the score is
    exp(-d_i^2 / (2 sigma^2)) shifted so the k-th entry lands exactly at 0,
    clamped at 0.  Falls back to uniform (1, ..., 1, 0) weights when the
    spread degenerates.
    """
    row = np.asarray(sqdists, dtype=np.float32).ravel()
    k = row.shape[0]
    if k < 3:
        raise ParameterError(f"need k >= 3 distances, got {k}")
    if np.any(row < 0) or not np.all(np.isfinite(row)):
        raise InputError("squared distances must be finite and non-negative")
    if np.any(np.diff(row) < 0):
        raise InputError("squared distances must be ascending")
    out = np.empty(k, np.float64)
    _score_row(row, out)
    return ScoreVector(scores=out)


def _scores_matrix(sqdists: np.ndarray) -> np.ndarray:
    out = np.empty(sqdists.shape, np.float64)
    _score_rows(np.ascontiguousarray(sqdists, np.float32), out)
    return out


def projection_system(x_i, model: LandmarkModel, nbr_indices, s: ScoreVector):
    """Accumulated normal equations (A, c) for one point's projection.

    A is the symmetric positive semi-definite 2x2 sum of weighted outer
    products of the per-pair layout gradients; c the matching right-hand
    side. ``project_point`` returns the Cramer solution of A x = c (or the
    fallback when A is near-singular). Exposed for introspection and tests.
    """
    hi = model.hi.astype(np.float64)
    lo = model.lo.astype(np.float64)
    x = np.asarray(x_i, np.float64).ravel()
    idx = np.asarray(nbr_indices, np.int64).ravel()
    sc = np.asarray(s.scores if isinstance(s, ScoreVector) else s, np.float64).ravel()
    a = np.zeros((2, 2), np.float64)
    c = np.zeros(2, np.float64)
    k = idx.shape[0]
    for u in range(k):
        if sc[u] <= 0:
            continue
        for v in range(u + 1, k):
            w = sc[u] * sc[v]
            if w <= 0:
                continue
            hd = hi[idx[v]] - hi[idx[u]]
            hd2 = hd @ hd
            if hd2 < PAIR_EPS:
                continue
            ld = lo[idx[v]] - lo[idx[u]]
            ld2 = ld @ ld
            if ld2 < PAIR_EPS:
                continue
            grad = ld / ld2
            h = ((x - hi[idx[u]]) @ hd) / hd2 + grad @ lo[idx[u]]
            a += w * np.outer(grad, grad)
            c += w * h * grad
    return a, c


def project_point(x_i, model: LandmarkModel, nbr_indices, s: ScoreVector) -> np.ndarray:
    """Project one point given its neighbor row and score vector.

    Returns the 2-vector minimizing the score-weighted squared disagreement
    of the pairwise line coordinates; falls back to the nearest landmark's
    layout position when the accumulated 2x2 system is near-singular.
    """
    x = np.ascontiguousarray(x_i, dtype=np.float32).reshape(1, -1)
    if x.shape[1] != model.d:
        raise InputError(f"point has {x.shape[1]} dims, model expects {model.d}")
    idx = np.ascontiguousarray(nbr_indices, dtype=np.int32).reshape(1, -1)
    sc = np.asarray(s.scores if isinstance(s, ScoreVector) else s, np.float64)
    sc = np.ascontiguousarray(sc).reshape(1, -1)
    if idx.shape[1] != sc.shape[1]:
        raise InputError("neighbor row and score vector lengths differ")
    if idx.shape[1] < 3:
        raise ParameterError("projection needs k >= 3 neighbors")
    out = np.empty((1, 2), np.float32)
    _project_rows(x, model.hi, model.lo, idx, sc, out)
    return out[0]


def project_neighbors(points, model: LandmarkModel, nbrs: NeighborList) -> np.ndarray:
    """Vectorized scores + projection over precomputed neighbor lists."""
    p = np.ascontiguousarray(points, dtype=np.float32)
    sc = _scores_matrix(nbrs.sqdists)
    out = np.empty((p.shape[0], 2), np.float32)
    _project_rows(p, model.hi, model.lo, nbrs.indices, sc, out)
    return out


def embed(
    points,
    model: LandmarkModel,
    params: EmbedParams,
    backend: str = "bitonic",
    chunk_size: int | None = None,
) -> np.ndarray:
    """Full pipeline: k-NN selection, scoring, projection; returns n x 2 float32.

    Per-point work is independent, so any chunking of the input produces the
    same output rows.
    """
    p = np.ascontiguousarray(points, dtype=np.float32)
    if p.ndim != 2:
        raise InputError("points must be a 2-d matrix")
    if p.shape[1] != model.d:
        raise InputError(f"points have d={p.shape[1]}, model has d={model.d}")
    params.validate(model.g, backend)
    n = p.shape[0]
    out = np.empty((n, 2), np.float32)
    step = max(1, n) if not chunk_size else max(1, int(chunk_size))
    for start in range(0, n, step):
        sl = slice(start, min(start + step, n))
        nbrs = knn(p[sl], model.hi, params.k, backend=backend)
        out[sl] = project_neighbors(p[sl], model, nbrs)
    return out
