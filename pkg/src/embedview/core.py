"""Shared domain types: datasets, landmark models, frames, and the session RNG.

Everything here is an immutable value.  Arrays are stored as read-only,
C-contiguous float32 buffers; anything that wants to change one builds a new
value (or works on an explicit copy inside the engine's single-writer loop).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

BITONIC_K_CHOICES = (4, 8, 16, 32, 64)


class InputError(ValueError):
    """Raised for malformed data handed to an operation (NaN/Inf, bad shapes)."""


class ParameterError(ValueError):
    """Raised for out-of-contract parameter values (k > g, non-power-of-two k, ...)."""


class ParseError(ValueError):
    """Raised by file ingestion when the input bytes violate the format."""


def _as_f32_matrix(a, name: str) -> np.ndarray:
    m = np.ascontiguousarray(a, dtype=np.float32)
    if m.ndim != 2:
        raise InputError(f"{name} must be a 2-d matrix, got shape {m.shape}")
    m.setflags(write=False)
    return m


def _check_finite(m: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(m)):
        raise InputError(f"{name} contains non-finite values")


@dataclass(frozen=True)
class DimStats:
    """Per-dimension summary of a points matrix (population sd, divisor n)."""

    min: np.ndarray
    max: np.ndarray
    mean: np.ndarray
    sd: np.ndarray


def compute_dim_stats(points) -> DimStats:
    """Column-wise (min, max, mean, sd) of an n x d matrix.

    sd is the population standard deviation (divisor n), so constant columns
    report exactly 0.  Raises ``InputError("empty dataset")`` for an empty
    matrix.
    """
    m = np.asarray(points)
    if m.size == 0 or m.ndim != 2:
        raise InputError("empty dataset")
    m64 = m.astype(np.float64, copy=False)
    return DimStats(
        min=m64.min(axis=0),
        max=m64.max(axis=0),
        mean=m64.mean(axis=0),
        sd=m64.std(axis=0),
    )


@dataclass(frozen=True)
class Dataset:
    """An n x d row-major matrix of measurements plus per-dimension metadata."""

    points: np.ndarray
    dim_names: tuple[str, ...]
    dim_stats: DimStats

    @classmethod
    def from_points(cls, points, dim_names: Sequence[str] | None = None) -> "Dataset":
        m = _as_f32_matrix(points, "points")
        if m.shape[0] < 1 or m.shape[1] < 1:
            raise InputError("empty dataset")
        _check_finite(m, "points")
        d = m.shape[1]
        if dim_names is None:
            names = tuple(f"dim{i}" for i in range(d))
        else:
            names = tuple(str(s) for s in dim_names)
            if len(names) != d:
                raise InputError(f"got {len(names)} dimension names for {d} dimensions")
        return cls(points=m, dim_names=names, dim_stats=compute_dim_stats(m))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class LandmarkModel:
    """Paired g x d high-dimensional and g x 2 low-dimensional landmarks.

    ``ids`` are stable opaque identifiers: rows may come and go, but an id is
    never reused within a session (``next_id`` only grows).  ``pinned`` holds
    ids currently dragged by the user.
    """

    hi: np.ndarray
    lo: np.ndarray
    ids: tuple[int, ...]
    pinned: frozenset[int] = frozenset()
    next_id: int = 0

    @classmethod
    def create(cls, hi, lo) -> "LandmarkModel":
        hi_m = _as_f32_matrix(hi, "hi")
        lo_m = _as_f32_matrix(lo, "lo")
        if lo_m.shape[1] != 2:
            raise InputError("lo must have exactly 2 columns")
        if hi_m.shape[0] != lo_m.shape[0]:
            raise InputError("hi and lo must have the same number of rows")
        g = hi_m.shape[0]
        return cls(hi=hi_m, lo=lo_m, ids=tuple(range(g)), next_id=g)

    @property
    def g(self) -> int:
        return self.hi.shape[0]

    @property
    def d(self) -> int:
        return self.hi.shape[1]

    def row_of(self, landmark_id: int) -> int:
        try:
            return self.ids.index(landmark_id)
        except ValueError:
            raise ParameterError(f"unknown landmark id {landmark_id}") from None

    def with_hi(self, hi) -> "LandmarkModel":
        m = _as_f32_matrix(hi, "hi")
        if m.shape != self.hi.shape:
            raise InputError("hi replacement must preserve shape")
        return replace(self, hi=m)

    def with_lo(self, lo) -> "LandmarkModel":
        m = _as_f32_matrix(lo, "lo")
        if m.shape != self.lo.shape:
            raise InputError("lo replacement must preserve shape")
        return replace(self, lo=m)

    def append(self, hi_row, lo_row) -> "LandmarkModel":
        """New model with one extra landmark carrying a fresh id."""
        hi = np.vstack([self.hi, np.asarray(hi_row, np.float32).reshape(1, -1)])
        lo = np.vstack([self.lo, np.asarray(lo_row, np.float32).reshape(1, 2)])
        return replace(
            self,
            hi=_as_f32_matrix(hi, "hi"),
            lo=_as_f32_matrix(lo, "lo"),
            ids=self.ids + (self.next_id,),
            next_id=self.next_id + 1,
        )

    def drop_row(self, row: int) -> "LandmarkModel":
        removed = self.ids[row]
        keep = np.ones(self.g, dtype=bool)
        keep[row] = False
        return replace(
            self,
            hi=_as_f32_matrix(self.hi[keep], "hi"),
            lo=_as_f32_matrix(self.lo[keep], "lo"),
            ids=self.ids[:row] + self.ids[row + 1 :],
            pinned=self.pinned - {removed},
        )


@dataclass(frozen=True)
class EmbedParams:
    """Projection parameters; only the neighbor count for now."""

    k: int = 16

    def validate(self, g: int, backend: str = "bitonic") -> None:
        if self.k < 3 or self.k > g:
            raise ParameterError(f"k={self.k} violates 3 <= k <= g={g}")
        if backend == "bitonic" and self.k not in BITONIC_K_CHOICES:
            raise ParameterError(
                f"bitonic backend needs k in {BITONIC_K_CHOICES}, got {self.k}"
            )


@dataclass(frozen=True)
class Frame:
    """One emitted snapshot of projected positions."""

    frame_id: int
    positions: np.ndarray  # n x 2 float32


class Rng:
    """Deterministic, splittable random source (counter-based Philox).

    Identical seed plus identical call sequence yields an identical stream on
    every platform.  ``split`` derives an independent child stream so that
    concurrent consumers never perturb each other's sequences.
    """

    def __init__(self, seed: int, _key: tuple[int, ...] | None = None):
        self.seed = int(seed)
        self._key = _key if _key is not None else (self.seed,)
        ss = np.random.SeedSequence(self._key)
        self._gen = np.random.Generator(np.random.Philox(ss))

    def split(self, tag: int) -> "Rng":
        child = Rng.__new__(Rng)
        child.seed = self.seed
        child._key = self._key + (int(tag),)
        ss = np.random.SeedSequence(child._key)
        child._gen = np.random.Generator(np.random.Philox(ss))
        return child

    def integers(self, low, high=None, size=None) -> np.ndarray:
        return self._gen.integers(low, high=high, size=size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size=size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size=size)

    def choice_distinct(self, n: int, count: int) -> np.ndarray:
        """`count` distinct indices from range(n); falls back to replacement when n < count."""
        if n >= count:
            return self._gen.choice(n, size=count, replace=False)
        return self._gen.integers(0, n, size=count)
