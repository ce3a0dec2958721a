"""Dataset ingestion: FCS list-mode files, delimited text, OBJ vertices.

FCS support is deliberately the narrow slice this tool needs: versions 3.0
and 3.1, $DATATYPE F, $MODE L, 32-bit parameters, little- or big-endian
$BYTEORD.  The format is used purely as a point-matrix carrier; spillover
matrices and ANALYSIS segments are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Dataset, InputError, ParameterError, ParseError

_FCS_VERSIONS = (b"FCS3.0", b"FCS3.1")
_BYTE_ORDERS = {"1,2,3,4": "<f4", "4,3,2,1": ">f4"}

TRANSFORM_KINDS = ("none", "minmax", "zscore")


def _header_offset(raw: bytes, start: int, end: int, label: str) -> int:
    text = raw[start:end].decode("ascii", errors="replace").strip()
    if text == "":
        return 0
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"malformed {label} offset at header bytes {start}-{end - 1}: {text!r}") from None


def _split_text_segment(raw: bytes) -> dict[str, str]:
    """Key/value pairs of a TEXT segment; a doubled delimiter is a literal."""
    if not raw:
        raise ParseError("empty TEXT segment")
    delim = raw[0:1]
    tokens: list[bytes] = []
    cur = bytearray()
    p = 1
    while p < len(raw):
        if raw[p : p + 1] == delim:
            if raw[p + 1 : p + 2] == delim:
                cur += delim
                p += 2
                continue
            tokens.append(bytes(cur))
            cur = bytearray()
            p += 1
        else:
            cur.append(raw[p])
            p += 1
    if cur:
        tokens.append(bytes(cur))
    # a trailing delimiter leaves the final token already flushed
    if tokens and tokens[-1] == b"":
        tokens.pop()
    if len(tokens) % 2 != 0:
        raise ParseError("TEXT segment has an unpaired keyword")
    out: dict[str, str] = {}
    for kk, vv in zip(tokens[::2], tokens[1::2]):
        key = kk.decode("latin-1").strip().upper()
        out[key] = vv.decode("latin-1").strip()
    return out


def _require(kw: dict[str, str], key: str) -> str:
    if key not in kw:
        raise ParseError(f"missing required keyword {key}")
    return kw[key]


def parse_fcs(data: bytes) -> Dataset:
    """Parse an FCS 3.0/3.1 list-mode byte string into a Dataset."""
    if len(data) < 42:
        raise ParseError("file shorter than the FCS header")
    version = data[0:6]
    if version not in _FCS_VERSIONS:
        raise ParseError(f"unsupported version {version!r} (need FCS3.0 or FCS3.1)")
    text_begin = _header_offset(data, 10, 18, "TEXT begin")
    text_end = _header_offset(data, 18, 26, "TEXT end")
    data_begin = _header_offset(data, 26, 34, "DATA begin")
    data_end = _header_offset(data, 34, 42, "DATA end")
    if text_begin <= 0 or text_end < text_begin or text_end >= len(data):
        raise ParseError(f"TEXT segment offsets {text_begin}-{text_end} out of range")
    kw = _split_text_segment(data[text_begin : text_end + 1])

    n = int(_require(kw, "$TOT"))
    d = int(_require(kw, "$PAR"))
    datatype = _require(kw, "$DATATYPE")
    if datatype != "F":
        raise ParseError(f"unsupported datatype $DATATYPE={datatype!r} (only F)")
    mode = _require(kw, "$MODE")
    if mode != "L":
        raise ParseError(f"unsupported $MODE={mode!r} (only list mode L)")
    byteord = _require(kw, "$BYTEORD")
    if byteord not in _BYTE_ORDERS:
        raise ParseError(f"unsupported $BYTEORD={byteord!r}")
    dtype = np.dtype(_BYTE_ORDERS[byteord])

    names: list[str] = []
    for i in range(1, d + 1):
        bits = _require(kw, f"$P{i}B")
        if bits.strip() != "32":
            raise ParseError(f"unsupported $P{i}B={bits!r} (only 32)")
        names.append(kw.get(f"$P{i}N") or kw.get(f"$P{i}S") or f"P{i}")

    if data_begin == 0 and data_end == 0:
        # FCS3.1 practice: large files put the real offsets in TEXT
        data_begin = int(_require(kw, "$BEGINDATA"))
        data_end = int(_require(kw, "$ENDDATA"))
    need = 4 * n * d
    if data_begin <= 0 or data_begin + need - 1 > len(data) - 1:
        raise ParseError(
            f"truncated DATA segment: need {need} bytes at offset {data_begin}, "
            f"file has {len(data)} bytes"
        )
    if data_end and data_end - data_begin + 1 < need:
        raise ParseError(
            f"truncated DATA segment: offsets {data_begin}-{data_end} hold fewer "
            f"than {need} bytes"
        )
    values = np.frombuffer(data, dtype=dtype, count=n * d, offset=data_begin)
    points = values.astype("<f4").reshape(n, d)
    return Dataset.from_points(points, names)


def parse_delimited(text: str, delimiter: str = "\t", has_header: bool = True) -> Dataset:
    """Parse delimited numeric text, one point per row."""
    lines = text.replace("\r\n", "\n").split("\n")
    while lines and lines[-1] == "":
        lines.pop()
    names: Sequence[str] | None = None
    if has_header and lines:
        names = [c.strip() for c in lines[0].split(delimiter)]
        lines = lines[1:]
    if not lines:
        raise InputError("empty dataset")
    rows = [line.split(delimiter) for line in lines]
    width = len(rows[0])
    for r, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"ragged row {r}: {len(row)} fields, expected {width}")
    try:
        matrix = np.array(rows, dtype=np.float64)
    except ValueError:
        for r, row in enumerate(rows):
            for c, cell in enumerate(row):
                try:
                    float(cell)
                except ValueError:
                    raise ParseError(f"non-numeric value {cell!r} at row {r}, column {c}") from None
        raise
    if names is not None and len(names) != width:
        raise ParseError(f"header has {len(names)} fields, body has {width}")
    return Dataset.from_points(matrix.astype(np.float32), names)


def write_delimited(matrix, path, delimiter: str = "\t", names: Sequence[str] | None = None) -> None:
    """Write a matrix as delimited text; %.9g keeps float32 values exact."""
    m = np.asarray(matrix)
    header = delimiter.join(names) if names else ""
    np.savetxt(path, m, fmt="%.9g", delimiter=delimiter, header=header, comments="")


def parse_obj_vertices(text: str) -> Dataset:
    """Extract the 3D point cloud from the vertex lines of an OBJ file."""
    pts: list[tuple[float, float, float]] = []
    for ln, line in enumerate(text.replace("\r\n", "\n").split("\n")):
        parts = line.split()
        if len(parts) < 1 or parts[0] != "v":
            continue
        if len(parts) < 4:
            raise ParseError(f"vertex line {ln} has fewer than 3 coordinates")
        try:
            pts.append((float(parts[1]), float(parts[2]), float(parts[3])))
        except ValueError:
            raise ParseError(f"non-numeric vertex coordinate at line {ln}") from None
    if not pts:
        raise InputError("empty dataset")
    return Dataset.from_points(np.array(pts, np.float32), ("x", "y", "z"))


@dataclass(frozen=True)
class TransformSpec:
    """Per-dimension transform: 'none' | 'minmax' | 'zscore' | ('affine', a, b)."""

    entries: tuple

    def __post_init__(self):
        for e in self.entries:
            if isinstance(e, str):
                if e not in TRANSFORM_KINDS:
                    raise ParameterError(f"unknown transform {e!r}")
            elif not (isinstance(e, tuple) and len(e) == 3 and e[0] == "affine"):
                raise ParameterError(f"unknown transform {e!r}")

    @classmethod
    def uniform(cls, kind: str, d: int) -> "TransformSpec":
        return cls(entries=tuple([kind] * d))


def apply_transform(dataset: Dataset, spec: TransformSpec) -> Dataset:
    """Apply per-dimension scaling and rebuild the dataset's statistics.

    minmax maps to [0, 1] with constant columns pinned at 0.5; zscore guards
    constant columns at 0.
    """
    if len(spec.entries) != dataset.d:
        raise ParameterError(
            f"transform has {len(spec.entries)} entries for {dataset.d} dimensions"
        )
    cols = dataset.points.astype(np.float64)
    out = np.empty_like(cols)
    st = dataset.dim_stats
    for c, entry in enumerate(spec.entries):
        x = cols[:, c]
        if entry == "none":
            out[:, c] = x
        elif entry == "minmax":
            span = st.max[c] - st.min[c]
            out[:, c] = 0.5 if span <= 0 else (x - st.min[c]) / span
        elif entry == "zscore":
            out[:, c] = 0.0 if st.sd[c] <= 0 else (x - st.mean[c]) / st.sd[c]
        else:
            _, a, b = entry
            out[:, c] = a * x + b
    return Dataset.from_points(out.astype(np.float32), dataset.dim_names)


def load_dataset(
    path: str,
    fmt: str | None = None,
    transform: str | None = None,
) -> Dataset:
    """Load a dataset file by format (fcs|tsv|csv|obj), inferring from the suffix.

    Default transforms follow the format: zscore for FCS, none otherwise.
    """
    if fmt is None:
        lower = str(path).lower()
        for suffix, kind in ((".fcs", "fcs"), (".tsv", "tsv"), (".csv", "csv"), (".obj", "obj")):
            if lower.endswith(suffix):
                fmt = kind
                break
        else:
            raise ParameterError(f"cannot infer format of {path!r}; pass fmt explicitly")
    if fmt == "fcs":
        with open(path, "rb") as fh:
            ds = parse_fcs(fh.read())
        default_tf = "zscore"
    elif fmt in ("tsv", "csv"):
        with open(path, "r", encoding="utf-8") as fh:
            ds = parse_delimited(fh.read(), delimiter="\t" if fmt == "tsv" else ",")
        default_tf = "none"
    elif fmt == "obj":
        with open(path, "r", encoding="utf-8") as fh:
            ds = parse_obj_vertices(fh.read())
        default_tf = "none"
    else:
        raise ParameterError(f"unknown format {fmt!r}")
    tf = transform if transform is not None else default_tf
    if tf != "none":
        ds = apply_transform(ds, TransformSpec.uniform(tf, ds.d))
    return ds
