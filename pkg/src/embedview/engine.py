"""Single-writer session loop: drain commands, advance the active trainer,
re-embed, emit a frame.

All mutation funnels through :meth:`Engine.tick`; everything the engine hands
out (frames, snapshots) is safe to read concurrently.  Given the same seed,
dataset, and command script, every emitted byte is reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from . import graphmodel, io, som
from .core import (
    BITONIC_K_CHOICES,
    Dataset,
    EmbedParams,
    InputError,
    LandmarkModel,
    ParameterError,
    Rng,
)
from .graphmodel import EdgeSet, KmeansConfig, LayoutState
from .projection import embed
from .som import SomConfig

DEFAULT_CHUNK_SIZE = 131072

MODE_SOM = "som"
MODE_GRAPH = "graph"


# ---------------------------------------------------------------------------
# Commands


@dataclass(frozen=True)
class LoadDataset:
    path: str
    fmt: Optional[str] = None
    transform: Optional[str] = None


@dataclass(frozen=True)
class SetMode:
    mode: str


@dataclass(frozen=True)
class SetParams:
    k: Optional[int] = None
    sigma: Optional[float] = None
    alpha: Optional[float] = None
    alpha_km: Optional[float] = None
    k_g: Optional[int] = None
    paused: Optional[bool] = None
    color_dim: Optional[int] = None


@dataclass(frozen=True)
class MoveLandmark:
    landmark_id: int
    x: float
    y: float
    pinned: bool = False


@dataclass(frozen=True)
class AddLandmark:
    x: float
    y: float


@dataclass(frozen=True)
class DuplicateLandmark:
    landmark_id: int


@dataclass(frozen=True)
class RemoveLandmark:
    landmark_id: int


@dataclass(frozen=True)
class InitModel:
    grid: Optional[tuple[int, int]] = None
    random_g: Optional[int] = None


@dataclass(frozen=True)
class Shutdown:
    pass


Command = Union[
    LoadDataset,
    SetMode,
    SetParams,
    MoveLandmark,
    AddLandmark,
    DuplicateLandmark,
    RemoveLandmark,
    InitModel,
    Shutdown,
]


@dataclass(frozen=True)
class FramePacket:
    """Everything one tick emits: positions, landmark layout, edges, colors."""

    frame_id: int
    positions: np.ndarray  # n x 2 float32
    landmarks_lo: np.ndarray  # g x 2 float32
    landmark_ids: tuple[int, ...]
    edges: EdgeSet
    colors: np.ndarray  # n uint8


@dataclass
class SessionState:
    """The single mutable root the engine owns."""

    dataset: Dataset
    model: LandmarkModel
    mode: str = MODE_SOM
    som_cfg: SomConfig = field(default_factory=SomConfig)
    km_cfg: KmeansConfig = field(default_factory=KmeansConfig)
    layout: LayoutState = field(default_factory=lambda: LayoutState.for_count(0))
    edges: EdgeSet = field(default_factory=EdgeSet.empty)
    embed_params: EmbedParams = field(default_factory=EmbedParams)
    k_g: int = graphmodel.DEFAULT_K_G
    training_paused: bool = False
    color_dim: int = 0
    rng: Rng = field(default_factory=lambda: Rng(0))
    frame_id: int = 0
    chunk_cursor: int = 0


def color_channel(dataset: Dataset, color_dim: int) -> np.ndarray:
    """Min-max quantize one dimension to bytes; constant columns map to 128."""
    if not 0 <= color_dim < dataset.d:
        raise ParameterError(f"color_dim={color_dim} out of range for d={dataset.d}")
    vals = dataset.points[:, color_dim].astype(np.float64)
    lo = dataset.dim_stats.min[color_dim]
    span = dataset.dim_stats.max[color_dim] - lo
    if span <= 0:
        return np.full(dataset.n, 128, np.uint8)
    return np.rint((vals - lo) / span * 255.0).astype(np.uint8)


def _nearest_pow2_k(requested: int, g: int) -> int:
    valid = [c for c in BITONIC_K_CHOICES if c <= g]
    if not valid:
        raise ParameterError(f"model too small for the bitonic backend (g={g})")
    return min(valid, key=lambda c: (abs(c - requested), c))


class Engine:
    """Owns a SessionState; commands go in through a queue, frames come out."""

    def __init__(
        self,
        dataset: Dataset,
        seed: int,
        k: int = 16,
        mode: str = MODE_SOM,
        grid: tuple[int, int] | None = (16, 16),
        random_g: int | None = None,
        chunk_size: int = DEFAULT_CHUNK_SIZE,
        backend: str = "bitonic",
    ):
        if mode not in (MODE_SOM, MODE_GRAPH):
            raise ParameterError(f"unknown mode {mode!r}")
        self.backend = backend
        self.chunk_size = int(chunk_size)
        self.state = SessionState(dataset=dataset, model=LandmarkModel.create(
            np.zeros((0, dataset.d), np.float32), np.zeros((0, 2), np.float32)
        ), mode=mode, rng=Rng(seed))
        self.seed = int(seed)
        self._queue: list[Command] = []
        self._errors: list[str] = []
        self._positions = np.zeros((dataset.n, 2), np.float32)
        self._colors: np.ndarray | None = None
        self._edges_dirty = True
        self._ticks_since_rebuild = 0
        self.shutdown_requested = False
        self._init_spec = InitModel(grid=grid, random_g=random_g)
        self._init_model(self._init_spec)
        st = self.state
        st.embed_params = EmbedParams(k=_nearest_pow2_k(k, st.model.g))

    # -- command intake ----------------------------------------------------

    def submit(self, cmd: Command) -> None:
        self._queue.append(cmd)

    def drain_errors(self) -> list[str]:
        out, self._errors = self._errors, []
        return out

    # -- model management --------------------------------------------------

    def _init_model(self, spec: InitModel) -> None:
        st = self.state
        ds = st.dataset
        if spec.grid is not None:
            rows, cols = spec.grid
            if rows < 1 or cols < 1:
                raise ParameterError(f"bad grid {rows}x{cols}")
            g = rows * cols
            ys, xs = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
            lo = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float32)
        elif spec.random_g is not None:
            g = int(spec.random_g)
            if g < 4:
                raise ParameterError("need at least 4 landmarks")
            lo = st.rng.uniform(0.0, 1.0, size=(g, 2)).astype(np.float32)
        else:
            raise ParameterError("InitModel needs a grid or a landmark count")
        hi_idx = st.rng.choice_distinct(ds.n, g)
        hi = ds.points[hi_idx].astype(np.float32)
        st.model = LandmarkModel.create(hi, lo)
        st.layout = st.layout.resized(g)
        self._positions = np.zeros((ds.n, 2), np.float32)
        st.chunk_cursor = 0
        self._edges_dirty = True
        if st.embed_params.k > g:
            st.embed_params = EmbedParams(k=_nearest_pow2_k(st.embed_params.k, g))

    # -- command application -----------------------------------------------

    def apply_command(self, cmd: Command) -> None:
        st = self.state
        if isinstance(cmd, Shutdown):
            self.shutdown_requested = True
        elif isinstance(cmd, LoadDataset):
            st.dataset = io.load_dataset(cmd.path, cmd.fmt, cmd.transform)
            st.color_dim = min(st.color_dim, st.dataset.d - 1)
            self._colors = None
            self._init_model(self._init_spec)
        elif isinstance(cmd, InitModel):
            self._init_spec = cmd
            self._init_model(cmd)
        elif isinstance(cmd, SetMode):
            if cmd.mode not in (MODE_SOM, MODE_GRAPH):
                raise ParameterError(f"unknown mode {cmd.mode!r}")
            st.mode = cmd.mode  # model carries over; only the trainer changes
            self._edges_dirty = True
        elif isinstance(cmd, SetParams):
            self._apply_params(cmd)
        elif isinstance(cmd, MoveLandmark):
            row = st.model.row_of(cmd.landmark_id)
            lo = st.model.lo.copy()
            lo[row, 0] = cmd.x
            lo[row, 1] = cmd.y
            pinned = set(st.model.pinned)
            if cmd.pinned:
                pinned.add(cmd.landmark_id)
            else:
                pinned.discard(cmd.landmark_id)
            st.model = replace(st.model.with_lo(lo), pinned=frozenset(pinned))
        elif isinstance(cmd, AddLandmark):
            self._add_landmark(cmd.x, cmd.y)
        elif isinstance(cmd, DuplicateLandmark):
            ranges = st.dataset.dim_stats.max - st.dataset.dim_stats.min
            st.model = graphmodel.duplicate_landmark(
                st.model, cmd.landmark_id, st.rng, dim_ranges=ranges
            )
            st.layout = st.layout.resized(st.model.g)
            self._edges_dirty = True
        elif isinstance(cmd, RemoveLandmark):
            st.model = graphmodel.remove_landmark(
                st.model, cmd.landmark_id, k_floor=st.embed_params.k
            )
            st.layout = st.layout.resized(st.model.g)
            self._edges_dirty = True
        else:
            raise ParameterError(f"unknown command {cmd!r}")

    def _apply_params(self, cmd: SetParams) -> None:
        st = self.state
        if cmd.k is not None:
            st.embed_params = EmbedParams(k=_nearest_pow2_k(int(cmd.k), st.model.g))
        if cmd.sigma is not None:
            st.som_cfg = replace(st.som_cfg, sigma=float(cmd.sigma))
        if cmd.alpha is not None:
            st.som_cfg = replace(st.som_cfg, alpha=float(cmd.alpha))
        if cmd.alpha_km is not None:
            st.km_cfg = replace(st.km_cfg, alpha_km=float(cmd.alpha_km))
        if cmd.k_g is not None:
            if not 1 <= int(cmd.k_g) < st.model.g:
                raise ParameterError(f"k_g={cmd.k_g} violates 1 <= k_g < g")
            st.k_g = int(cmd.k_g)
            self._edges_dirty = True
        if cmd.paused is not None:
            st.training_paused = bool(cmd.paused)
        if cmd.color_dim is not None:
            if not 0 <= int(cmd.color_dim) < st.dataset.d:
                raise ParameterError(f"color_dim={cmd.color_dim} out of range")
            st.color_dim = int(cmd.color_dim)
            self._colors = None

    def _add_landmark(self, x: float, y: float) -> None:
        st = self.state
        if st.mode == MODE_SOM:
            hi_new = som.fit_hi_for_new_landmark((x, y), st.model)
            st.model = st.model.append(hi_new, np.array([x, y], np.float32))
        else:
            # graph mode: duplicate the nearest layout landmark, then move the copy
            pos = np.array([x, y], np.float64)
            diff = st.model.lo.astype(np.float64) - pos[None, :]
            d2 = np.einsum("gd,gd->g", diff, diff)
            nearest_id = st.model.ids[int(np.argmin(d2))]
            ranges = st.dataset.dim_stats.max - st.dataset.dim_stats.min
            st.model = graphmodel.duplicate_landmark(
                st.model, nearest_id, st.rng, dim_ranges=ranges
            )
            lo = st.model.lo.copy()
            lo[-1, 0] = x
            lo[-1, 1] = y
            st.model = st.model.with_lo(lo)
        st.layout = st.layout.resized(st.model.g)
        self._edges_dirty = True

    # -- the tick ----------------------------------------------------------

    def _rebuild_edges(self) -> None:
        st = self.state
        k_g = min(st.k_g, st.model.g - 1)
        if k_g < 1:
            st.edges = EdgeSet.empty()
        else:
            raw = graphmodel.build_knn_graph(st.model.hi, k_g, scale=1.0)
            mean = float(raw.rest.mean()) if len(raw) else 0.0
            if mean > 0:
                st.edges = EdgeSet(pairs=raw.pairs, rest=(raw.rest / np.float32(mean)))
            else:
                st.edges = raw
        self._edges_dirty = False
        self._ticks_since_rebuild = 0

    def tick(self) -> FramePacket:
        st = self.state
        for cmd in self._queue:
            try:
                self.apply_command(cmd)
            except (ParameterError, InputError, OSError, ValueError) as exc:
                self._errors.append(f"{type(exc).__name__}: {exc}")
        self._queue.clear()

        if not st.training_paused:
            if st.mode == MODE_SOM:
                st.model = st.model.with_hi(som.som_tick(st.dataset, st.model, st.som_cfg, st.rng))
            else:
                st.model = st.model.with_hi(
                    graphmodel.kmeans_tick(st.dataset, st.model, st.km_cfg, st.rng)
                )

        if st.mode == MODE_GRAPH:
            if self._edges_dirty or self._ticks_since_rebuild >= graphmodel.REBUILD_CADENCE:
                self._rebuild_edges()
            self._ticks_since_rebuild += 1
            pinned_rows = [st.model.ids.index(i) for i in st.model.pinned if i in st.model.ids]
            new_lo, vel = graphmodel.layout_tick(st.model.lo, st.edges, st.layout, pinned_rows)
            st.model = st.model.with_lo(new_lo)
            st.layout = replace(st.layout, velocities=vel)

        n = st.dataset.n
        if self._positions.shape[0] != n:
            self._positions = np.zeros((n, 2), np.float32)
            st.chunk_cursor = 0
        if n <= self.chunk_size:
            self._positions = embed(
                st.dataset.points, st.model, st.embed_params, backend=self.backend
            )
        else:
            start = st.chunk_cursor
            stop = min(start + self.chunk_size, n)
            self._positions[start:stop] = embed(
                st.dataset.points[start:stop], st.model, st.embed_params, backend=self.backend
            )
            st.chunk_cursor = 0 if stop >= n else stop

        st.frame_id += 1
        if self._colors is None:
            self._colors = color_channel(st.dataset, st.color_dim)
        return FramePacket(
            frame_id=st.frame_id,
            positions=self._positions,
            landmarks_lo=st.model.lo,
            landmark_ids=st.model.ids,
            edges=st.edges if st.mode == MODE_GRAPH else EdgeSet.empty(),
            colors=self._colors,
        )


# ---------------------------------------------------------------------------
# Command scripts (record / replay)

_CMD_TYPES = {
    "load_dataset": LoadDataset,
    "set_mode": SetMode,
    "set_params": SetParams,
    "move_landmark": MoveLandmark,
    "add_landmark": AddLandmark,
    "duplicate_landmark": DuplicateLandmark,
    "remove_landmark": RemoveLandmark,
    "init_model": InitModel,
    "shutdown": Shutdown,
}
_CMD_NAMES = {v: k for k, v in _CMD_TYPES.items()}


def command_to_json(cmd: Command) -> dict:
    body = {k: v for k, v in cmd.__dict__.items() if v is not None}
    if isinstance(cmd, InitModel) and cmd.grid is not None:
        body["grid"] = list(cmd.grid)
    return {"type": _CMD_NAMES[type(cmd)], **body}


def command_from_json(obj: dict) -> Command:
    kind = obj.get("type")
    if kind not in _CMD_TYPES:
        raise ParameterError(f"unknown command type {kind!r}")
    body = {k: v for k, v in obj.items() if k != "type"}
    if kind == "init_model" and body.get("grid") is not None:
        body["grid"] = tuple(body["grid"])
    return _CMD_TYPES[kind](**body)


def write_script(path, script: list[tuple[int, Command]]) -> None:
    """Command script as JSON lines: {"tick": t, "cmd": {...}}."""
    with open(path, "w", encoding="utf-8") as fh:
        for tick_idx, cmd in script:
            fh.write(json.dumps({"tick": tick_idx, "cmd": command_to_json(cmd)}) + "\n")


def read_script(path) -> list[tuple[int, Command]]:
    out: list[tuple[int, Command]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            out.append((int(obj["tick"]), command_from_json(obj["cmd"])))
    out.sort(key=lambda item: item[0])
    return out


def run_script(engine: Engine, script: list[tuple[int, Command]], ticks: int):
    """Feed a script at its tick positions and collect the emitted packets."""
    by_tick: dict[int, list[Command]] = {}
    for tick_idx, cmd in script:
        by_tick.setdefault(tick_idx, []).append(cmd)
    packets = []
    for t in range(ticks):
        for cmd in by_tick.get(t, ()):  # commands land before their tick runs
            engine.submit(cmd)
        packets.append(engine.tick())
        if engine.shutdown_requested:
            break
    return packets
