"""Graph supervision mode: online k-means keeps the high-dimensional
landmarks representative while a force layout arranges their neighborhood
graph in 2D.

The force model is Hooke springs along graph edges plus softened
inverse-square repulsion between all landmark pairs, integrated with
semi-implicit Euler and velocity damping.  Forces come in equal-and-opposite
pairs, so the net force over all landmarks is zero; pinned (dragged)
landmarks still receive forces but their position and velocity updates are
discarded.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import Dataset, LandmarkModel, ParameterError, Rng
from .knn import knn_base

REPULSION_EPS = 1e-3  # softening of the inverse-square law at zero distance
MIN_LANDMARKS = 3  # projection floor: k >= 3 needs g >= 3

DEFAULT_STIFFNESS = 1.0
DEFAULT_REPULSION = 0.05
DEFAULT_DAMPING = 0.9
DEFAULT_DT = 0.05
DEFAULT_K_G = 3
REBUILD_CADENCE = 10  # engine ticks between graph rebuilds


@dataclass(frozen=True)
class EdgeSet:
    """Undirected neighbor graph: (i, j) pairs with i < j and rest lengths."""

    pairs: np.ndarray  # e x 2 int32, each row i < j
    rest: np.ndarray  # e float32, scaled high-dimensional distances

    def __len__(self) -> int:
        return self.pairs.shape[0]

    @classmethod
    def empty(cls) -> "EdgeSet":
        return cls(pairs=np.zeros((0, 2), np.int32), rest=np.zeros(0, np.float32))


@dataclass(frozen=True)
class KmeansConfig:
    alpha_km: float = 0.05
    batch_size: int = 256

    def __post_init__(self):
        if not 0.0 < self.alpha_km <= 1.0:
            raise ParameterError(f"alpha_km must be in (0, 1], got {self.alpha_km}")
        if self.batch_size < 1:
            raise ParameterError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class LayoutState:
    """Velocities plus the force-model parameters the layouter integrates with."""

    velocities: np.ndarray  # g x 2 float64
    stiffness: float = DEFAULT_STIFFNESS
    repulsion: float = DEFAULT_REPULSION
    damping: float = DEFAULT_DAMPING
    dt: float = DEFAULT_DT

    def __post_init__(self):
        if not 0.0 < self.damping < 1.0:
            raise ParameterError(f"damping must be in (0, 1), got {self.damping}")
        if not self.dt > 0:
            raise ParameterError(f"dt must be > 0, got {self.dt}")

    @classmethod
    def for_count(cls, g: int, **params) -> "LayoutState":
        return cls(velocities=np.zeros((g, 2), np.float64), **params)

    def resized(self, g: int) -> "LayoutState":
        v = np.zeros((g, 2), np.float64)
        keep = min(g, self.velocities.shape[0])
        v[:keep] = self.velocities[:keep]
        return replace(self, velocities=v)


def kmeans_tick(dataset: Dataset, model: LandmarkModel, cfg: KmeansConfig, rng: Rng) -> np.ndarray:
    """One online k-means tick; returns the updated hi matrix.

    Each drawn sample moves only its nearest landmark, by alpha_km of the
    remaining gap; samples apply sequentially in draw order.
    """
    hi = model.hi.astype(np.float64)
    points = dataset.points
    sample_idx = rng.integers(0, dataset.n, size=cfg.batch_size)
    for s in sample_idx:
        x = points[s].astype(np.float64)
        diff = hi - x[None, :]
        d2 = np.einsum("gd,gd->g", diff, diff)
        b = int(np.argmin(d2))
        hi[b] += cfg.alpha_km * (x - hi[b])
    return hi.astype(np.float32)


def build_knn_graph(hi, k_g: int, scale: float = 1.0) -> EdgeSet:
    """Symmetrized k_g-nearest-neighbor graph over the landmarks.

    Nearest-neighbor ties resolve exactly as in the knn module; the directed
    relation is symmetrized by union, and rest lengths are the scaled
    Euclidean (not squared) high-dimensional distances.
    """
    h = np.ascontiguousarray(hi, dtype=np.float32)
    g = h.shape[0]
    if not 1 <= k_g < g:
        raise ParameterError(f"k_g={k_g} violates 1 <= k_g < g={g}")
    nbrs = knn_base(h, h, k_g + 1)
    seen: dict[tuple[int, int], float] = {}
    for i in range(g):
        taken = 0
        for t in range(k_g + 1):
            j = int(nbrs.indices[i, t])
            if j == i:
                continue
            key = (i, j) if i < j else (j, i)
            if key not in seen:
                seen[key] = float(np.sqrt(nbrs.sqdists[i, t]))
            taken += 1
            if taken == k_g:
                break
    if not seen:
        return EdgeSet.empty()
    keys = sorted(seen)
    pairs = np.array(keys, dtype=np.int32)
    rest = np.array([scale * seen[kk] for kk in keys], dtype=np.float32)
    return EdgeSet(pairs=pairs, rest=rest)


def graph_scale_for_unit_rest(hi, k_g: int) -> float:
    """Scale factor making the mean rest length 1.0 layout unit."""
    raw = build_knn_graph(hi, k_g, scale=1.0)
    mean = float(raw.rest.mean()) if len(raw) else 0.0
    return 1.0 / mean if mean > 0 else 1.0


def net_forces(lo: np.ndarray, edges: EdgeSet, st: LayoutState) -> np.ndarray:
    """Spring plus repulsion forces on every landmark (g x 2 float64)."""
    pos = np.asarray(lo, dtype=np.float64)
    g = pos.shape[0]
    forces = np.zeros((g, 2), np.float64)

    if len(edges):
        i = edges.pairs[:, 0].astype(np.int64)
        j = edges.pairs[:, 1].astype(np.int64)
        diff = pos[j] - pos[i]
        dist = np.sqrt(np.einsum("ed,ed->e", diff, diff))
        ok = dist > 0
        pull = np.zeros_like(diff)
        pull[ok] = (st.stiffness * (dist[ok] - edges.rest[ok]) / dist[ok])[:, None] * diff[ok]
        np.add.at(forces, i, pull)
        np.add.at(forces, j, -pull)

    diff = pos[:, None, :] - pos[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", diff, diff)
    inv = st.repulsion / np.power(r2 + REPULSION_EPS, 1.5)
    np.fill_diagonal(inv, 0.0)
    forces += np.einsum("ij,ijk->ik", inv, diff)
    return forces


def layout_tick(
    lo: np.ndarray,
    edges: EdgeSet,
    st: LayoutState,
    pinned_rows=(),
) -> tuple[np.ndarray, np.ndarray]:
    """One semi-implicit Euler step; returns (new lo float32, new velocities).

    v <- damping * (v + dt * F); lo <- lo + dt * v.  Pinned rows keep their
    exact previous position and get zero velocity.
    """
    pos = np.asarray(lo, dtype=np.float64)
    if st.velocities.shape != pos.shape:
        raise ParameterError("velocity matrix shape does not match layout")
    forces = net_forces(pos, edges, st)
    vel = st.damping * (st.velocities + st.dt * forces)
    new_pos = pos + st.dt * vel
    pin = np.fromiter((int(r) for r in pinned_rows), dtype=np.int64)
    new_lo = new_pos.astype(np.float32)
    if pin.size:
        vel[pin] = 0.0
        new_lo[pin] = np.asarray(lo, np.float32)[pin]
    return new_lo, vel


def duplicate_landmark(
    model: LandmarkModel, landmark_id: int, rng: Rng, dim_ranges=None
) -> LandmarkModel:
    """Clone a landmark in both spaces with a small jitter and a fresh id.

    The layout copy is offset by 1e-2 layout units in a random direction; the
    high-dimensional copy by a per-coordinate jitter of 1e-4 of each
    dimension's range.  Subsequent k-means ticks pull the pair apart.
    """
    row = model.row_of(landmark_id)
    theta = float(rng.uniform(0.0, 2.0 * np.pi))
    lo_new = model.lo[row] + np.float32(1e-2) * np.array(
        [np.cos(theta), np.sin(theta)], np.float32
    )
    if dim_ranges is None:
        ranges = model.hi.max(axis=0).astype(np.float64) - model.hi.min(axis=0)
    else:
        ranges = np.asarray(dim_ranges, dtype=np.float64).ravel()
    jitter = rng.uniform(-1.0, 1.0, size=model.d) * 1e-4 * ranges
    hi_new = model.hi[row].astype(np.float64) + jitter
    return model.append(hi_new.astype(np.float32), lo_new)


def remove_landmark(model: LandmarkModel, landmark_id: int, k_floor: int = MIN_LANDMARKS) -> LandmarkModel:
    """Drop a landmark; other ids are untouched and the removed id never returns."""
    row = model.row_of(landmark_id)
    floor = max(MIN_LANDMARKS, k_floor)
    if model.g - 1 < floor:
        raise ParameterError(
            f"cannot remove landmark: {model.g - 1} landmarks would remain, "
            f"but the projection needs at least {floor}"
        )
    return model.drop_row(row)
