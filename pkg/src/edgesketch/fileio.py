"""On-disk formats: text edge streams, binary sketch files, partitions, scores.

Sketch file layout (little-endian)::

    "ESK1"  u16 version  u8 flags  u8 reserved  u32 m  u64 salt  u64 nodes
    per node, sorted by id:
        u64 id, m x f64 minima, m x (u64 lo, u64 hi[, u64 tag])
    u64 checksum of the body

Compact files drop the tag word, so a node costs exactly ``8 + 24 m`` bytes.
"""

from __future__ import annotations

import hashlib
import io
import struct
from dataclasses import dataclass

import numpy as np

from edgesketch.exceptions import (
    CorruptFileError,
    ParseError,
    UnsupportedConfigurationError,
)
from edgesketch.sketch import MODES, SketchStore

MAGIC = b"ESK1"
VERSION = 1
_HEADER = struct.Struct("<4sHBBIQQ")
_CHECKSUM = struct.Struct("<Q")

FLAG_DIRECTED = 1
FLAG_PARALLEL = 2
FLAG_COMPACT = 4
FLAG_SELF_LOOPS = 8
_KNOWN_FLAGS = FLAG_DIRECTED | FLAG_PARALLEL | FLAG_COMPACT | FLAG_SELF_LOOPS

HEADER_SIZE = _HEADER.size


def record_size(m, compact):
    return 8 + 8 * m + (16 if compact else 24) * m


def body_checksum(body):
    return int.from_bytes(hashlib.blake2b(body, digest_size=8).digest(), "little")


# -- sketch files -------------------------------------------------------------


def sketch_bytes(store, compact=False):
    if compact and store.parallel_edges:
        raise UnsupportedConfigurationError("compact files cannot hold parallel-edge stores")
    ids, S, F, _ = store.sorted_arrays()
    if compact and len(ids) and F[:, :, 2].any():
        raise UnsupportedConfigurationError("compact files cannot hold tagged edges")
    n, m = len(ids), store.m
    words = 3 if not compact else 2
    rec = np.empty((n, 1 + m + words * m), dtype="<u8")
    rec[:, 0] = ids.astype(np.uint64)
    rec[:, 1 : 1 + m] = np.ascontiguousarray(S).view(np.uint64)
    rec[:, 1 + m :] = F[:, :, :words].reshape(n, words * m)
    body = rec.tobytes()
    flags = (
        (FLAG_DIRECTED if store.directed else 0)
        | (FLAG_PARALLEL if store.parallel_edges else 0)
        | (FLAG_COMPACT if compact else 0)
        | (FLAG_SELF_LOOPS if store.has_self_loops else 0)
    )
    header = _HEADER.pack(MAGIC, VERSION, flags, 0, m, store.salt, n)
    return header + body + _CHECKSUM.pack(body_checksum(body))


def sketch_from_bytes(data):
    if len(data) < HEADER_SIZE + _CHECKSUM.size:
        raise CorruptFileError("sketch file is truncated")
    magic, version, flags, reserved, m, salt, n = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CorruptFileError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CorruptFileError(f"unsupported sketch file version {version}")
    if reserved or flags & ~_KNOWN_FLAGS:
        raise CorruptFileError(f"unknown header flags {flags:#x}/{reserved:#x}")
    if m < 1:
        raise CorruptFileError("sketch size m is zero")
    compact = bool(flags & FLAG_COMPACT)
    size = n * record_size(m, compact)
    if len(data) != HEADER_SIZE + size + _CHECKSUM.size:
        raise CorruptFileError(
            f"expected {HEADER_SIZE + size + _CHECKSUM.size} bytes for {n} nodes, got {len(data)}"
        )
    body = data[HEADER_SIZE : HEADER_SIZE + size]
    (stored,) = _CHECKSUM.unpack_from(data, HEADER_SIZE + size)
    if stored != body_checksum(body):
        raise CorruptFileError("checksum mismatch; the file is corrupt")
    mode = MODES[0] if flags & FLAG_DIRECTED else MODES[1]
    store = SketchStore(m, salt, mode, bool(flags & FLAG_PARALLEL))
    store.has_self_loops = bool(flags & FLAG_SELF_LOOPS)
    store._pair_counts = None
    if n == 0:
        return store
    words = 2 if compact else 3
    rec = np.frombuffer(body, dtype="<u8").reshape(n, 1 + m + words * m)
    ids = rec[:, 0].astype(np.int64)
    if np.any(ids[1:] <= ids[:-1]):
        raise CorruptFileError("node records are not strictly sorted by id")
    store._reserve(n)
    store._ids[:n] = ids
    store._S[:n] = rec[:, 1 : 1 + m].copy().view(np.float64)
    F = np.zeros((n, m, 3), dtype=np.uint64)
    F[:, :, :words] = rec[:, 1 + m :].reshape(n, m, words)
    store._F[:n] = F
    store._MAX[:n] = store._S[:n].max(axis=1)
    store._n = n
    store._index = {int(v): i for i, v in enumerate(ids.tolist())}
    return store


def write_sketch(path, store, compact=False):
    with open(path, "wb") as fh:
        fh.write(sketch_bytes(store, compact))


def read_sketch(path):
    with open(path, "rb") as fh:
        return sketch_from_bytes(fh.read())


# -- edge streams -------------------------------------------------------------


@dataclass
class EdgeFile:
    mode: str
    edges: np.ndarray  # (E, 4): u, v, w, tag as float64 / int columns
    tags: np.ndarray

    def __len__(self):
        return len(self.edges)

    def stream(self):
        """(E, 4) array accepted by :func:`edgesketch.ingest_stream`."""
        return np.column_stack([self.edges, self.tags.astype(np.float64)])

    def edge_set(self):
        u = self.edges[:, 0].astype(np.int64)
        v = self.edges[:, 1].astype(np.int64)
        return {(min(a, b), max(a, b)) for a, b in zip(u.tolist(), v.tolist())}


def _parse_positive_int(tok, what, lineno):
    try:
        val = int(tok)
    except ValueError:
        raise ParseError(f"line {lineno}: {what} {tok!r} is not an integer", position=lineno) from None
    if val < 1:
        raise ParseError(f"line {lineno}: {what} must be positive, got {val}", position=lineno)
    return val


def parse_edge_lines(lines, default_mode="undirected"):
    """Parse ``u v w [tag]`` lines. Errors carry the 1-based line number."""
    mode = None
    rows = []
    tags = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith("#mode="):
                value = line[len("#mode=") :].strip()
                if value not in MODES:
                    raise ParseError(f"line {lineno}: unknown mode {value!r}", position=lineno)
                if mode is not None and value != mode:
                    raise ParseError(f"line {lineno}: conflicting mode header", position=lineno)
                mode = value
            continue
        parts = line.split()
        if len(parts) not in (3, 4):
            raise ParseError(
                f"line {lineno}: expected 'u v w [tag]', got {len(parts)} fields", position=lineno
            )
        u = _parse_positive_int(parts[0], "node id", lineno)
        v = _parse_positive_int(parts[1], "node id", lineno)
        try:
            w = float(parts[2])
        except ValueError:
            raise ParseError(f"line {lineno}: weight {parts[2]!r} is not a number", position=lineno) from None
        if not (w > 0 and np.isfinite(w)):
            raise ParseError(f"line {lineno}: weight must be positive, got {parts[2]}", position=lineno)
        tag = 0
        if len(parts) == 4:
            try:
                tag = int(parts[3])
            except ValueError:
                raise ParseError(f"line {lineno}: tag {parts[3]!r} is not an integer", position=lineno) from None
            if tag < 0:
                raise ParseError(f"line {lineno}: tag must be non-negative", position=lineno)
        rows.append((u, v, w))
        tags.append(tag)
    edges = np.array(rows, dtype=np.float64).reshape(-1, 3)
    return EdgeFile(mode or default_mode, edges, np.array(tags, dtype=np.int64))


def read_edges(path, default_mode="undirected"):
    with open(path, encoding="utf-8") as fh:
        return parse_edge_lines(fh, default_mode)


def format_edges(edges, mode="undirected"):
    out = io.StringIO()
    out.write(f"#mode={mode}\n")
    for e in edges:
        u, v, w = int(e[0]), int(e[1]), float(e[2])
        tag = int(e[3]) if len(e) > 3 else 0
        if tag:
            out.write(f"{u} {v} {w!r} {tag}\n")
        else:
            out.write(f"{u} {v} {w!r}\n")
    return out.getvalue()


def write_edges(path, edges, mode="undirected"):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_edges(edges, mode))


# -- partitions, labels, scores -------------------------------------------------


def format_partition(partition, estimate=None):
    lines = [f"{v}\t{c}" for v, c in sorted(partition.assignment.items())]
    if estimate is not None:
        lines.append(f"#modularity_estimate={float(estimate)!r}")
    return "\n".join(lines) + "\n"


def parse_partition(text):
    """Returns ``(assignment, modularity estimate or None)``."""
    assignment = {}
    estimate = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#modularity_estimate="):
            estimate = float(line.split("=", 1)[1])
            continue
        if line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(f"line {lineno}: expected 'node<TAB>community'", position=lineno)
        node = _parse_positive_int(parts[0], "node id", lineno)
        if node in assignment:
            raise ParseError(f"line {lineno}: node {node} listed twice", position=lineno)
        assignment[node] = int(parts[1])
    return assignment, estimate


def format_labels(labels):
    return "".join(f"{v}\t{b}\n" for v, b in sorted(labels.items()))


def format_scores(scored):
    return "".join(f"{p.u}\t{p.v}\t{p.score!r}\n" for p in scored)


def format_precision(rows):
    """``rows`` of (label, Precision) as ``key=value`` lines."""
    out = []
    for label, prec in rows:
        line = f"P@{label}={prec.value!r}\tt={prec.t}"
        if prec.truncated:
            line += "\ttruncated=1"
        out.append(line)
    return "\n".join(out) + "\n"
