"""Kernel benchmark harness: amortized ns/point for the k-NN stage, the
projection stage, and the fused pass, over a parameter grid.

Each cell runs one warm-up pass (which also pays any JIT cost) and 10 timed
repetitions, reporting the mean and relative standard deviation.  Cells whose
relative sd exceeds the 5% variance budget are flagged in the final column.
Before any timing, both backends are checked to produce byte-identical
neighbor lists on the cell's inputs.
"""

from __future__ import annotations

import contextlib
import gc
import os
import time
from dataclasses import dataclass

import numpy as np

from . import datagen
from .core import EmbedParams, LandmarkModel
from .knn import knn
from .projection import embed, project_neighbors

CSV_HEADER = "backend,n,d,g,k,stage,mean_ns_per_point,rel_sd,over_budget"
VARIANCE_BUDGET = 0.05
STAGES = ("knn", "projection", "fused")


@dataclass(frozen=True)
class BenchRow:
    backend: str
    n: int
    d: int
    g: int
    k: int
    stage: str
    mean_ns_per_point: float
    rel_sd: float

    @property
    def over_budget(self) -> bool:
        return self.rel_sd > VARIANCE_BUDGET

    def to_csv(self) -> str:
        return (
            f"{self.backend},{self.n},{self.d},{self.g},{self.k},{self.stage},"
            f"{self.mean_ns_per_point:.2f},{self.rel_sd:.4f},{int(self.over_budget)}"
        )


@contextlib.contextmanager
def _pinned_cpu():
    """Pin the process to one core for the duration; restores affinity after.

    Kernel timings are single-threaded and latency-bound, so core migration
    is pure measurement noise.  No-op where affinity control is unavailable.
    """
    try:
        original = os.sched_getaffinity(0)
    except (AttributeError, OSError):
        yield
        return
    try:
        os.sched_setaffinity(0, {min(original)})
    except OSError:
        yield
        return
    try:
        yield
    finally:
        os.sched_setaffinity(0, original)


def _time_reps(fn, reps: int) -> tuple[float, float]:
    fn()  # warm-up (includes JIT compilation on first use)
    times = np.empty(reps, np.float64)
    gc_was_enabled = gc.isenabled()
    gc.collect()
    gc.disable()
    try:
        for r in range(reps):
            t0 = time.perf_counter()
            fn()
            times[r] = time.perf_counter() - t0
    finally:
        if gc_was_enabled:
            gc.enable()
    mean = float(times.mean())
    rel_sd = float(times.std() / mean) if mean > 0 else 0.0
    return mean, rel_sd


def bench_cell(
    backend: str, n: int, d: int, g: int, k: int, seed: int, reps: int = 10
) -> list[BenchRow]:
    points = datagen.uniform(n, d, seed)
    model = LandmarkModel.create(
        datagen.uniform(g, d, seed + 1), datagen.uniform(g, 2, seed + 2)
    )
    params = EmbedParams(k=k)
    params.validate(g, backend)

    base = knn(points, model.hi, k, backend="base")
    other = knn(points, model.hi, k, backend="bitonic")
    if not (
        np.array_equal(base.indices, other.indices)
        and np.array_equal(base.sqdists, other.sqdists)
    ):
        raise AssertionError(
            f"backend mismatch on bench inputs (n={n}, d={d}, g={g}, k={k})"
        )

    rows = []
    nbrs = knn(points, model.hi, k, backend=backend)
    stage_fns = {
        "knn": lambda: knn(points, model.hi, k, backend=backend),
        "projection": lambda: project_neighbors(points, model, nbrs),
        "fused": lambda: embed(points, model, params, backend=backend),
    }
    for stage in STAGES:
        mean, rel_sd = _time_reps(stage_fns[stage], reps)
        rows.append(
            BenchRow(
                backend=backend,
                n=n,
                d=d,
                g=g,
                k=k,
                stage=stage,
                mean_ns_per_point=mean / n * 1e9,
                rel_sd=rel_sd,
            )
        )
    return rows


def run_bench(
    backends=("base", "bitonic"),
    ns=(1 << 20,),
    ds=(4, 16, 64),
    gs=(64, 256, 1024),
    ks=(8, 16, 64),
    seed: int = 1,
    reps: int = 10,
    pin_cpu: bool = True,
) -> list[BenchRow]:
    rows: list[BenchRow] = []
    with _pinned_cpu() if pin_cpu else contextlib.nullcontext():
        for backend in backends:
            for n in ns:
                for d in ds:
                    for g in gs:
                        for k in ks:
                            if k > g:
                                continue
                            rows.extend(bench_cell(backend, n, d, g, k, seed, reps))
    return rows


def rows_to_csv(rows) -> str:
    return "\n".join([CSV_HEADER] + [r.to_csv() for r in rows]) + "\n"
