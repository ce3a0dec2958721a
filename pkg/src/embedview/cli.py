"""Command-line entry points: serve, embed, bench, demo-data."""

from __future__ import annotations

import argparse
import secrets
import sys

import numpy as np

from . import bench as bench_mod
from . import datagen, io, som
from .core import Dataset, ParameterError
from .engine import Engine, read_script, write_script
from .projection import embed

ANNEAL_SIGMA = (1.5, 0.2)
ANNEAL_ALPHA = (0.2, 0.02)


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        rows, cols = text.lower().split("x")
        return int(rows), int(cols)
    except ValueError:
        raise ParameterError(f"bad --grid value {text!r}, expected ROWSxCOLS") from None


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok]


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="dataset path")
    p.add_argument("--format", choices=("fcs", "tsv", "csv", "obj"), default=None)
    p.add_argument("--transform", choices=("none", "zscore", "minmax"), default=None)


def _resolve_seed(seed: int | None) -> int:
    if seed is None:
        seed = secrets.randbits(48)
        print(f"seed: {seed}", file=sys.stderr)
    return seed


def cmd_serve(args) -> int:
    from .server import run_server

    dataset = io.load_dataset(args.data, args.format, args.transform)
    seed = _resolve_seed(args.seed)
    engine = Engine(
        dataset,
        seed=seed,
        k=args.k,
        mode=args.mode,
        grid=_parse_grid(args.grid),
        chunk_size=args.chunk,
    )
    record: list | None = [] if args.record else None
    replay = read_script(args.replay) if args.replay else None
    try:
        run_server(
            engine, host=args.host, port=args.port, fps=args.fps,
            record=record, replay=replay,
        )
    finally:
        if args.record and record is not None:
            write_script(args.record, record)
    return 0


def anneal_schedule(epochs: int) -> list[tuple[float, float]]:
    """Per-epoch (sigma, alpha), linear between the configured endpoints."""
    out = []
    for t in range(epochs):
        frac = t / max(1, epochs - 1)
        sigma = ANNEAL_SIGMA[0] + (ANNEAL_SIGMA[1] - ANNEAL_SIGMA[0]) * frac
        alpha = ANNEAL_ALPHA[0] + (ANNEAL_ALPHA[1] - ANNEAL_ALPHA[0]) * frac
        out.append((sigma, alpha))
    return out


def batch_embed(
    dataset: Dataset,
    seed: int,
    grid: tuple[int, int],
    k: int,
    epochs: int,
    chunk: int | None = None,
) -> np.ndarray:
    """Unattended pipeline: grid SOM, annealed training, one full projection."""
    engine = Engine(dataset, seed=seed, k=k, grid=grid)
    model = engine.state.model
    rng = engine.state.rng
    for sigma, alpha in anneal_schedule(epochs):
        cfg = som.SomConfig(sigma=sigma, alpha=alpha)
        model = model.with_hi(som.som_tick(dataset, model, cfg, rng))
    params = engine.state.embed_params
    return embed(dataset.points, model, params, chunk_size=chunk)


def cmd_embed(args) -> int:
    dataset = io.load_dataset(args.data, args.format, args.transform)
    seed = _resolve_seed(args.seed)
    positions = batch_embed(
        dataset, seed, _parse_grid(args.grid), args.k, args.epochs, chunk=args.chunk
    )
    out = args.out or "-"
    if out == "-":
        io.write_delimited(positions, sys.stdout, names=("x", "y"))
    else:
        io.write_delimited(positions, out, names=("x", "y"))
    return 0


def cmd_bench(args) -> int:
    rows = bench_mod.run_bench(
        backends=tuple(args.backends.split(",")),
        ns=tuple(_int_list(args.n)),
        ds=tuple(_int_list(args.d)),
        gs=tuple(_int_list(args.g)),
        ks=tuple(_int_list(args.k)),
        seed=args.seed if args.seed is not None else 1,
        reps=args.reps,
    )
    sys.stdout.write(bench_mod.rows_to_csv(rows))
    return 0


def cmd_demo_data(args) -> int:
    seed = _resolve_seed(args.seed)
    if args.kind == "gaussians":
        points, _ = datagen.gaussians(args.clusters, args.n, args.d, seed)
    elif args.kind == "extruded_s":
        points = datagen.extruded_s(args.n, seed)
    else:
        points = datagen.uniform(args.n, args.d, seed)
    names = tuple(f"dim{i}" for i in range(points.shape[1]))
    io.write_delimited(points, args.out, names=names)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="embedview")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the interactive engine + websocket server")
    _add_data_args(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7878)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--grid", default="16x16", help="SOM grid, e.g. 16x16")
    p.add_argument("--k", type=int, default=16)
    p.add_argument("--mode", choices=("som", "graph"), default="som")
    p.add_argument("--chunk", type=int, default=131072)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--record", default=None, help="write the command script here")
    p.add_argument("--replay", default=None, help="apply a recorded command script")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("embed", help="offline batch embedding to delimited text")
    _add_data_args(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--grid", default="16x16")
    p.add_argument("--k", type=int, default=16)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--chunk", type=int, default=None)
    p.add_argument("--out", default="-", help="output path ('-' for stdout)")
    p.set_defaults(fn=cmd_embed)

    p = sub.add_parser("bench", help="kernel benchmark matrix, CSV on stdout")
    p.add_argument("--backends", default="base,bitonic")
    p.add_argument("--n", default=str(1 << 20))
    p.add_argument("--d", default="4,16,64")
    p.add_argument("--g", default="64,256,1024")
    p.add_argument("--k", default="8,16,64")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--reps", type=int, default=10)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("demo-data", help="generate a synthetic dataset")
    p.add_argument("--kind", choices=("gaussians", "extruded_s", "uniform"), required=True)
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--clusters", type=int, default=3)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_demo_data)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # single-line machine-parsable diagnostic
        print(f"embedview: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
