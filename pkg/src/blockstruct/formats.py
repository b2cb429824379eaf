"""Readers and writers for matrices, vectors, traces, tables and bundles.

Floats are written with ``repr`` (shortest round-trip decimal), so text
formats read back bit-identical values. Matrix format is picked by
extension: ``.mtx`` coordinate Matrix Market, ``.csv`` dense text, ``.bin``
raw little-endian float64 with a 24-byte header. A directory holding
``channels.json`` is a multi-channel bundle.
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .boolmat import BoolMatrix
from .indexmaps import Embedding, Permutation, Projection
from .linalg import ChannelBundle, as_real_matrix
from .structure import TABLE_HEADER, NodeAttributeTable
from .training import ActivationTrace

BIN_MAGIC = b"BLKSTRF8"


class FormatError(ValueError):
    """A file exists but does not parse as the expected format."""


def _fmt(v: float) -> str:
    return repr(float(v))


# Matrix Market ------------------------------------------------------------

def write_mtx(path, m) -> None:
    path = Path(path)
    if isinstance(m, BoolMatrix):
        dense = m.to_dense()
        rows, cols = np.nonzero(dense)
        lines = ["%%MatrixMarket matrix coordinate pattern general",
                 f"{m.n_rows} {m.n_cols} {rows.size}"]
        lines += [f"{i + 1} {j + 1}" for i, j in zip(rows, cols)]
    else:
        a = np.asarray(m, dtype=np.float64)
        # keep negative zeros so the round trip is bitwise
        rows, cols = np.nonzero((a != 0.0) | np.signbit(a))
        lines = ["%%MatrixMarket matrix coordinate real general",
                 f"{a.shape[0]} {a.shape[1]} {rows.size}"]
        lines += [f"{i + 1} {j + 1} {_fmt(a[i, j])}" for i, j in zip(rows, cols)]
    path.write_text("\n".join(lines) + "\n")


def read_mtx(path, as_bool: bool = False):
    path = Path(path)
    text = path.read_text().splitlines()
    if not text or not text[0].startswith("%%MatrixMarket"):
        raise FormatError(f"{path}: missing %%MatrixMarket banner")
    banner = text[0].split()
    if len(banner) < 5 or banner[1] != "matrix" or banner[2] != "coordinate":
        raise FormatError(f"{path}: only 'matrix coordinate' files are supported")
    field, symmetry = banner[3], banner[4]
    if field not in ("real", "integer", "pattern") or symmetry != "general":
        raise FormatError(f"{path}: unsupported field/symmetry {field}/{symmetry}")
    body = [ln for ln in text[1:] if ln.strip() and not ln.startswith("%")]
    try:
        n_rows, n_cols, nnz = (int(t) for t in body[0].split())
        entries = [ln.split() for ln in body[1:]]
        if len(entries) != nnz:
            raise FormatError(f"{path}: header promises {nnz} entries, found {len(entries)}")
        pattern = field == "pattern"
        if as_bool or pattern:
            dense = np.zeros((n_rows, n_cols), dtype=bool)
            for e in entries:
                dense[int(e[0]) - 1, int(e[1]) - 1] = pattern or float(e[2]) != 0.0
            return BoolMatrix.from_dense(dense)
        a = np.zeros((n_rows, n_cols), dtype=np.float64)
        for e in entries:
            i, j = int(e[0]) - 1, int(e[1]) - 1
            if not (0 <= i < n_rows and 0 <= j < n_cols):
                raise FormatError(f"{path}: entry ({i + 1}, {j + 1}) outside {n_rows}x{n_cols}")
            a[i, j] = float(e[2])
    except (IndexError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{path}: malformed Matrix Market body ({exc})") from None
    return as_real_matrix(a, str(path))


# dense text and binary -------------------------------------------------------

def write_dense_csv(path, a) -> None:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    Path(path).write_text("".join(",".join(_fmt(v) for v in row) + "\n" for row in a))


def read_dense_csv(path) -> np.ndarray:
    rows = []
    for ln in Path(path).read_text().splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        try:
            rows.append([float(t) for t in ln.replace(",", " ").split()])
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise FormatError(f"{path}: expected a non-empty rectangular table of numbers")
    return np.array(rows, dtype=np.float64)


def write_bin(path, a) -> None:
    a = np.ascontiguousarray(a, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(BIN_MAGIC)
        fh.write(struct.pack("<QQ", *a.shape))
        fh.write(a.tobytes())


def read_bin(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:8] != BIN_MAGIC or len(raw) < 24:
        raise FormatError(f"{path}: bad magic or truncated header")
    n_rows, n_cols = struct.unpack("<QQ", raw[8:24])
    body = raw[24:]
    if len(body) != 8 * n_rows * n_cols:
        raise FormatError(f"{path}: payload size does not match {n_rows}x{n_cols}")
    return np.frombuffer(body, dtype="<f8").reshape(n_rows, n_cols).astype(np.float64)


# weights ---------------------------------------------------------------------

def read_matrix(path) -> np.ndarray:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".mtx":
        out = read_mtx(path)
        if isinstance(out, BoolMatrix):
            out = out.to_dense().astype(np.float64)
    elif suffix == ".csv":
        out = read_dense_csv(path)
    elif suffix == ".bin":
        out = read_bin(path)
    else:
        raise FormatError(f"{path}: unknown matrix extension {suffix!r} (use .mtx, .csv or .bin)")
    return as_real_matrix(out, str(path))


def write_matrix(path, a) -> None:
    suffix = Path(path).suffix.lower()
    if suffix == ".mtx":
        write_mtx(path, a)
    elif suffix == ".csv":
        write_dense_csv(path, a)
    elif suffix == ".bin":
        write_bin(path, a)
    else:
        raise FormatError(f"{path}: unknown matrix extension {suffix!r}")


def write_bundle_dir(path, b: ChannelBundle, ext: str = ".mtx") -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    (path / "channels.json").write_text(json.dumps({"n": b.n, "k": b.k, "ext": ext}, indent=2) + "\n")
    for g, m in enumerate(b.w1, start=1):
        write_matrix(path / f"w1_{g}{ext}", m)
    for g, m in enumerate(b.w2, start=1):
        write_matrix(path / f"w2_{g}{ext}", m)


def read_bundle_dir(path) -> ChannelBundle:
    path = Path(path)
    try:
        meta = json.loads((path / "channels.json").read_text())
        half = int(meta["k"]) // 2
        ext = meta.get("ext", ".mtx")
    except (OSError, KeyError, ValueError) as exc:
        raise FormatError(f"{path}: not a channel bundle directory ({exc})") from None
    w1 = [read_matrix(path / f"w1_{g}{ext}") for g in range(1, half + 1)]
    w2 = [read_matrix(path / f"w2_{g}{ext}") for g in range(1, half + 1)]
    return ChannelBundle(w1, w2)


def read_weights(path):
    """Scalar matrix file or channel-bundle directory."""
    path = Path(path)
    if path.is_dir():
        return read_bundle_dir(path)
    return read_matrix(path)


def write_weights(path, w) -> None:
    if isinstance(w, ChannelBundle):
        write_bundle_dir(path, w)
    else:
        write_matrix(path, w)


# vectors ----------------------------------------------------------------------

def read_vectors(path) -> np.ndarray:
    """One vector per line; returns an array of shape ``(batch, n)``."""
    return read_dense_csv(path)


def write_vectors(path, ys) -> None:
    write_dense_csv(path, np.atleast_2d(ys))


# traces ---------------------------------------------------------------------

def write_trace(path, trace: ActivationTrace) -> None:
    Path(path).write_text("".join(" ".join(str(i + 1) for i in step) + "\n" for step in trace.steps))


def read_trace(path, n: int) -> ActivationTrace:
    steps = []
    for ln in Path(path).read_text().splitlines():
        steps.append([int(t) - 1 for t in ln.split()])
    return ActivationTrace(n, steps)


# node table and permutation ---------------------------------------------------

def write_node_table(path, table: NodeAttributeTable) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        w.writerows(table.rows())


def read_node_table(path) -> NodeAttributeTable:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TABLE_HEADER:
        raise FormatError(f"{path}: header must be {','.join(TABLE_HEADER)}")
    try:
        data = np.array([[int(v) for v in r] for r in rows[1:]], dtype=np.int64)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    n = data.shape[0]
    if n == 0 or sorted(data[:, 0]) != list(range(1, n + 1)):
        raise FormatError(f"{path}: V_TAG column must be a permutation of 1..n")
    by_node = data[np.argsort(data[:, 0])]
    return NodeAttributeTable(*(by_node[:, c].copy() for c in range(1, 6)))


def write_permutation(path, p: Permutation) -> None:
    lines = ["new,old"] + [f"{o + 1},{s + 1}" for o, s in enumerate(p.src)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_permutation(path) -> Permutation:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != "new,old":
        raise FormatError(f"{path}: header must be 'new,old'")
    pairs = [tuple(int(t) for t in ln.split(",")) for ln in lines[1:] if ln.strip()]
    pairs.sort()
    if [o for o, _ in pairs] != list(range(1, len(pairs) + 1)):
        raise FormatError(f"{path}: 'new' column must be 1..n")
    try:
        return Permutation.from_one_based([s for _, s in pairs])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


# restructured-system bundle ---------------------------------------------------

def write_system(path, sys) -> None:
    """Write a restructured system as a bundle directory."""
    from .runtime import RestructuredSystem  # noqa: F401

    path = Path(path)
    blocks_dir = path / "blocks"
    blocks_dir.mkdir(parents=True, exist_ok=True)
    for stale in blocks_dir.iterdir():
        stale.unlink()
    write_permutation(path / "permutation.csv", sys.p)
    for r, b in enumerate(sys.blocks, start=1):
        stem = f"{r:03d}"
        if isinstance(b.operator, ChannelBundle):
            for tag, mats in (("w1", b.operator.w1), ("w2", b.operator.w2)):
                for g, m in enumerate(mats, start=1):
                    write_mtx(blocks_dir / f"{stem}.{tag}_{g}.mtx", m)
        else:
            write_mtx(blocks_dir / f"{stem}.mtx", b.operator)
        start, end = b.new_range
        (blocks_dir / f"{stem}.range").write_text(f"{start} {end}\n")
    (path / "dormant.txt").write_text("".join(f"{i + 1}\n" for i in sys.dormant.place))
    meta = {
        "n": sys.n,
        "block_count": len(sys.blocks),
        "channels": {"mode": "channel", "k": sys.blocks[0].operator.k} if sys.is_channel else {"mode": "scalar"},
        "updates": 0,
    }
    meta.update(sys.meta)
    meta["n"], meta["block_count"] = sys.n, len(sys.blocks)
    (path / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_system(path):
    from .runtime import Block, RestructuredSystem, _block_order

    path = Path(path)
    try:
        meta = json.loads((path / "meta.json").read_text())
        n = int(meta["n"])
        count = int(meta["block_count"])
    except (OSError, KeyError, ValueError) as exc:
        raise FormatError(f"{path}: unreadable meta.json ({exc})") from None
    p = read_permutation(path / "permutation.csv")
    if p.n != n:
        raise FormatError(f"{path}: permutation size {p.n} does not match n={n}")
    channel = meta.get("channels", {}).get("mode") == "channel"
    blocks = []
    for r in range(1, count + 1):
        stem = f"{r:03d}"
        start, end = (int(t) for t in (path / "blocks" / f"{stem}.range").read_text().split())
        idx = np.arange(start - 1, end)
        if channel:
            half = int(meta["channels"]["k"]) // 2
            op = ChannelBundle(
                [read_mtx(path / "blocks" / f"{stem}.w1_{g}.mtx") for g in range(1, half + 1)],
                [read_mtx(path / "blocks" / f"{stem}.w2_{g}.mtx") for g in range(1, half + 1)],
            )
            shape = (op.n, op.n)
        else:
            op = read_mtx(path / "blocks" / f"{stem}.mtx")
            shape = op.shape
        if shape != (idx.size, idx.size):
            raise FormatError(f"{path}: block {stem} has shape {shape}, range implies {idx.size}")
        blocks.append(Block(op, Projection(n, idx), Embedding(n, idx), _block_order(p, idx)))
    dormant = [int(t) - 1 for t in (path / "dormant.txt").read_text().split()]
    extra = {k: v for k, v in meta.items() if k not in ("n", "block_count", "channels")}
    return RestructuredSystem(n, p, blocks, Embedding(n, dormant), extra)
