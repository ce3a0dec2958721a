"""Per-point selection of the k nearest landmarks.

Two backends produce bit-identical results:

* ``knn_base`` — straightforward linear scan keeping an insertion-sorted
  k-buffer per point; the reference implementation.
* ``knn_bitonic`` — keeps a sorted k-block of current best candidates and a
  working k-block; each round fills the working block with fresh distances
  (padding the final partial block with +inf sentinels), bitonic-sorts it,
  merges the two blocks with a single comparator stage that keeps the lower
  k, and re-sorts the kept block.  Scratch is exactly 2k (distance, index)
  slots per in-flight point.

Both order candidates by the lexicographic key (squared distance, landmark
index), so ties always resolve to the smaller index and the two backends
agree exactly.  Distances are accumulated in float32 by the same helper in
both kernels; no fast-math, so the streams cannot diverge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import InputError, ParameterError


@dataclass(frozen=True)
class NeighborList:
    """k nearest landmarks per point: indices and ascending squared distances."""

    indices: np.ndarray  # n x k int32
    sqdists: np.ndarray  # n x k float32

    @property
    def n(self) -> int:
        return self.indices.shape[0]

    @property
    def k(self) -> int:
        return self.indices.shape[1]


def sq_euclidean(a, b) -> float:
    """Squared Euclidean distance between two equal-length vectors."""
    av = np.asarray(a, dtype=np.float64).ravel()
    bv = np.asarray(b, dtype=np.float64).ravel()
    if av.shape != bv.shape:
        raise InputError(f"length mismatch: {av.shape[0]} vs {bv.shape[0]}")
    diff = av - bv
    return float(np.dot(diff, diff))


@njit(cache=True, inline="always")
def _sqdist_f32(points, i, landmarks, j):
    s = np.float32(0.0)
    for c in range(points.shape[1]):
        diff = points[i, c] - landmarks[j, c]
        s += diff * diff
    return s


@njit(cache=True)
def _knn_base_kernel(points, landmarks, k, out_idx, out_dist):
    n = points.shape[0]
    g = landmarks.shape[0]
    for i in range(n):
        cnt = 0
        for j in range(g):
            s = _sqdist_f32(points, i, landmarks, j)
            if cnt < k:
                p = cnt
                cnt += 1
            else:
                dl = out_dist[i, k - 1]
                il = out_idx[i, k - 1]
                if s > dl or (s == dl and j > il):
                    continue
                p = k - 1
            while p > 0:
                dp = out_dist[i, p - 1]
                ip = out_idx[i, p - 1]
                if s < dp or (s == dp and j < ip):
                    out_dist[i, p] = dp
                    out_idx[i, p] = ip
                    p -= 1
                else:
                    break
            out_dist[i, p] = s
            out_idx[i, p] = j


@njit(cache=True, inline="always")
def _lex_before(da, ia, db, ib):
    return da < db or (da == db and ia < ib)


@njit(cache=True)
def _bitonic_sort_block(dist, idx, k):
    # full ascending sort of one power-of-two block, (dist, index) lexicographic
    size = 2
    while size <= k:
        stride = size >> 1
        while stride > 0:
            for t in range(k):
                u = t ^ stride
                if u > t:
                    asc = (t & size) == 0
                    da = dist[t]
                    ia = idx[t]
                    db = dist[u]
                    ib = idx[u]
                    if asc:
                        wrong = _lex_before(db, ib, da, ia)
                    else:
                        wrong = _lex_before(da, ia, db, ib)
                    if wrong:
                        dist[t] = db
                        idx[t] = ib
                        dist[u] = da
                        idx[u] = ia
            stride >>= 1
        size <<= 1


@njit(cache=True)
def _bitonic_merge_block(dist, idx, k):
    # ascending sort of a block that is already bitonic
    stride = k >> 1
    while stride > 0:
        for t in range(k):
            u = t ^ stride
            if u > t:
                da = dist[t]
                ia = idx[t]
                db = dist[u]
                ib = idx[u]
                if _lex_before(db, ib, da, ia):
                    dist[t] = db
                    idx[t] = ib
                    dist[u] = da
                    idx[u] = ia
        stride >>= 1


@njit(cache=True)
def _knn_bitonic_kernel(points, landmarks, k, out_idx, out_dist):
    n = points.shape[0]
    g = landmarks.shape[0]
    inf = np.float32(np.inf)
    sentinel = g  # invalid index; (inf, sentinel) loses every comparison
    nblocks = (g + k - 1) // k
    best_d = np.empty(k, np.float32)
    best_i = np.empty(k, np.int32)
    work_d = np.empty(k, np.float32)
    work_i = np.empty(k, np.int32)
    for i in range(n):
        for t in range(k):
            best_d[t] = inf
            best_i[t] = sentinel
        for b in range(nblocks):
            base = b * k
            for t in range(k):
                j = base + t
                if j < g:
                    work_d[t] = _sqdist_f32(points, i, landmarks, j)
                    work_i[t] = j
                else:
                    work_d[t] = inf
                    work_i[t] = sentinel
            _bitonic_sort_block(work_d, work_i, k)
            # half-cleaner: best[t] vs reversed work keeps the lower k,
            # leaving a bitonic block that one merge pass re-sorts
            for t in range(k):
                u = k - 1 - t
                if _lex_before(work_d[u], work_i[u], best_d[t], best_i[t]):
                    best_d[t] = work_d[u]
                    best_i[t] = work_i[u]
            _bitonic_merge_block(best_d, best_i, k)
        for t in range(k):
            out_idx[i, t] = best_i[t]
            out_dist[i, t] = best_d[t]


def _validate_inputs(points, landmarks) -> tuple[np.ndarray, np.ndarray]:
    p = np.ascontiguousarray(points, dtype=np.float32)
    lm = np.ascontiguousarray(landmarks, dtype=np.float32)
    if p.ndim != 2 or lm.ndim != 2:
        raise InputError("points and landmarks must be 2-d matrices")
    if p.shape[1] != lm.shape[1]:
        raise InputError(
            f"dimension mismatch: points d={p.shape[1]}, landmarks d={lm.shape[1]}"
        )
    if not np.all(np.isfinite(p)) or not np.all(np.isfinite(lm)):
        raise InputError("non-finite input")
    return p, lm


def knn_base(points, landmarks, k: int) -> NeighborList:
    """Exact k nearest landmarks per point by full linear scan.

    Serves as the oracle implementation the bitonic backend is checked
    against.
    """
    p, lm = _validate_inputs(points, landmarks)
    g = lm.shape[0]
    if not 1 <= k <= g:
        raise ParameterError(f"k={k} violates 1 <= k <= g={g}")
    out_idx = np.empty((p.shape[0], k), np.int32)
    out_dist = np.empty((p.shape[0], k), np.float32)
    _knn_base_kernel(p, lm, k, out_idx, out_dist)
    return NeighborList(indices=out_idx, sqdists=out_dist)


def knn_bitonic(points, landmarks, k: int) -> NeighborList:
    """Exact k nearest landmarks via iterated bitonic merge selection.

    Requires k to be a power of two with 4 <= k <= g.  Output is identical
    to :func:`knn_base`, tie-breaks included.
    """
    p, lm = _validate_inputs(points, landmarks)
    g = lm.shape[0]
    if k < 4 or (k & (k - 1)) != 0:
        raise ParameterError(f"bitonic backend needs a power-of-two k >= 4, got {k}")
    if k > g:
        raise ParameterError(f"k={k} violates k <= g={g}")
    out_idx = np.empty((p.shape[0], k), np.int32)
    out_dist = np.empty((p.shape[0], k), np.float32)
    _knn_bitonic_kernel(p, lm, k, out_idx, out_dist)
    return NeighborList(indices=out_idx, sqdists=out_dist)


_BACKENDS = {"base": knn_base, "bitonic": knn_bitonic}


def knn(points, landmarks, k: int, backend: str = "bitonic") -> NeighborList:
    try:
        fn = _BACKENDS[backend]
    except KeyError:
        raise ParameterError(f"unknown knn backend {backend!r}") from None
    return fn(points, landmarks, k)
