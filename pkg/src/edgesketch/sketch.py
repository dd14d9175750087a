"""Per-node sketches and the sketch store built from a weighted edge stream."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from edgesketch import _kernel
from edgesketch.core import MASK64
from edgesketch.exceptions import (
    IncompatibleSketchError,
    InvalidWeightError,
    MissingNodeError,
    ReservedIdError,
    StreamError,
)

MODES = ("directed", "undirected")
_CHUNK = 1 << 16


class EdgeKey(NamedTuple):
    """Canonical edge identity with ``lo <= hi``; ``(0, 0, 0)`` means empty."""

    lo: int
    hi: int
    tag: int = 0

    @classmethod
    def canonical(cls, u, v, tag=0):
        return cls(min(u, v), max(u, v), tag)

    @property
    def is_sentinel(self):
        return self.lo == 0 and self.hi == 0 and self.tag == 0

    def other(self, node):
        """Endpoint opposite ``node`` (``node`` itself for a self-loop)."""
        return self.hi if self.lo == node else self.lo


SENTINEL = EdgeKey(0, 0, 0)


class WeightedEdge(NamedTuple):
    u: int
    v: int
    weight: float = 1.0
    tag: int = 0


@dataclass(frozen=True)
class IngestReport:
    edges_seen: int = 0
    nodes_created: int = 0


@dataclass(eq=False)
class Sketch:
    """Exponential minima ``s`` paired with the coordinated edge sample ``f``.

    ``f`` has shape (m, 3) with rows ``(lo, hi, tag)``; a cell is empty when
    ``s`` is infinite and ``f`` holds the zero sentinel.
    """

    s: np.ndarray
    f: np.ndarray
    max_cache: float = math.inf
    salt: int = 0

    @classmethod
    def empty(cls, m, salt=0):
        return cls(np.full(m, np.inf), np.zeros((m, 3), dtype=np.uint64), math.inf, salt)

    @property
    def m(self):
        return self.s.shape[0]

    @property
    def is_empty(self):
        return bool(np.isinf(self.s).all())

    def copy(self):
        return Sketch(self.s.copy(), self.f.copy(), float(self.max_cache), self.salt)

    def edge_at(self, k):
        lo, hi, tag = (int(x) for x in self.f[k])
        return EdgeKey(lo, hi, tag)

    def edges(self):
        """Sampled edge keys, one per cell (sentinels included)."""
        return [self.edge_at(k) for k in range(self.m)]

    def bit_equal(self, other):
        return (
            self.m == other.m
            and self.salt == other.salt
            and np.array_equal(self.s.view(np.uint64), other.s.view(np.uint64))
            and np.array_equal(self.f, other.f)
            and _same_float(self.max_cache, other.max_cache)
        )

    def check_invariants(self):
        """Raise AssertionError if the sketch violates its type invariants."""
        assert self.s.shape == (self.m,) and self.f.shape == (self.m, 3)
        assert _same_float(self.max_cache, float(self.s.max()))
        empty_s = np.isinf(self.s)
        empty_f = ~self.f.any(axis=1)
        assert np.array_equal(empty_s, empty_f), "s/f sentinel pairing broken"
        assert (self.s > 0).all()


def _same_float(a, b):
    return np.float64(a).view(np.uint64) == np.float64(b).view(np.uint64)


def check_compatible(a, b):
    if a.m != b.m:
        raise IncompatibleSketchError(f"sketch sizes differ: {a.m} != {b.m}")
    if a.salt != b.salt:
        raise IncompatibleSketchError("sketches were built with different hash salts")


def _merge_arrays(sa, fa, sb, fb):
    take_a = sa < sb
    tie = (sa == sb) & np.isfinite(sa)
    if tie.any():
        # Coordinated sketches only tie on the same edge.
        mismatch = tie[..., None] & (fa != fb)
        if mismatch.any():
            raise IncompatibleSketchError(
                "equal minima with different sampled edges; sketches are not coordinated"
            )
    s = np.where(take_a, sa, sb)
    f = np.where(take_a[..., None], fa, fb)
    return s, f


def merge_sketches(a, b):
    """Position-wise union of two coordinated sketches.

    Keeps the smaller value at every position and the edge sampled with it;
    on equal values the entry of ``b`` is kept.
    """
    check_compatible(a, b)
    s, f = _merge_arrays(a.s, a.f, b.s, b.f)
    return Sketch(s, f, float(s.max()), a.salt)


class SketchStore:
    """All node sketches of one graph stream, sharing ``m`` and the salt.

    Sketch data lives in contiguous row-major arrays (``S``, ``F``, ``MAX``)
    indexed by an internal row number; ``store[node]`` returns a view.

    Args:
        m: number of cells per sketch (at least 3).
        salt: 64-bit hash key; stores with equal salts are coordinated.
        mode: ``"undirected"`` updates both endpoints, ``"directed"`` only
            the source.
        parallel_edges: distinguish repeated edges between the same pair
            by a tag instead of collapsing them.
    """

    def __init__(self, m, salt=0, mode="undirected", parallel_edges=False):
        m = int(m)
        if m < 3:
            raise ValueError(f"sketch size m must be at least 3, got {m}")
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        self.m = m
        self.salt = int(salt) & MASK64
        self.mode = mode
        self.parallel_edges = bool(parallel_edges)
        self.has_self_loops = False
        self._index = {}
        self._n = 0
        self._ids = np.zeros(0, dtype=np.int64)
        self._S = np.zeros((0, m))
        self._F = np.zeros((0, m, 3), dtype=np.uint64)
        self._MAX = np.zeros(0)
        self._pair_counts = {}

    # -- container protocol -------------------------------------------------

    def __len__(self):
        return self._n

    def __contains__(self, node):
        return node in self._index

    def __getitem__(self, node):
        return self.sketch(node)

    def __iter__(self):
        return iter(self.nodes())

    def __repr__(self):
        return (
            f"SketchStore(m={self.m}, salt={self.salt}, mode={self.mode!r}, "
            f"nodes={self._n})"
        )

    @property
    def directed(self):
        return self.mode == "directed"

    @property
    def node_ids(self):
        """Node ids in row order."""
        return self._ids[: self._n]

    @property
    def S(self):
        return self._S[: self._n]

    @property
    def F(self):
        return self._F[: self._n]

    @property
    def MAX(self):
        return self._MAX[: self._n]

    def nodes(self):
        return sorted(self._index)

    def row(self, node):
        try:
            return self._index[node]
        except KeyError:
            raise MissingNodeError(f"node {node} has no sketch") from None

    def rows(self, nodes):
        return np.fromiter((self.row(v) for v in nodes), dtype=np.int64)

    def sketch(self, node):
        r = self.row(node)
        return Sketch(self._S[r], self._F[r], float(self._MAX[r]), self.salt)

    def params(self):
        return (self.m, self.salt, self.mode, self.parallel_edges)

    # -- growth -------------------------------------------------------------

    def _reserve(self, extra):
        need = self._n + extra
        cap = self._S.shape[0]
        if need <= cap:
            return
        cap = max(need, 2 * cap, 16)
        ids = np.zeros(cap, dtype=np.int64)
        S = np.full((cap, self.m), np.inf)
        F = np.zeros((cap, self.m, 3), dtype=np.uint64)
        MAX = np.full(cap, np.inf)
        ids[: self._n] = self.node_ids
        S[: self._n] = self.S
        F[: self._n] = self.F
        MAX[: self._n] = self.MAX
        self._ids, self._S, self._F, self._MAX = ids, S, F, MAX

    def _add_node(self, node):
        self._reserve(1)
        r = self._n
        self._index[node] = r
        self._ids[r] = node
        self._S[r] = np.inf
        self._F[r] = 0
        self._MAX[r] = np.inf
        self._n += 1
        return r

    def _row_for(self, node):
        r = self._index.get(node)
        if r is None:
            r = self._add_node(node)
        return r

    def set_sketch(self, node, sketch):
        """Insert or replace the sketch of ``node`` (used by deserialisation)."""
        check_compatible(sketch, Sketch.empty(self.m, self.salt))
        r = self._row_for(node)
        self._S[r] = sketch.s
        self._F[r] = sketch.f
        self._MAX[r] = sketch.max_cache

    # -- ingestion ----------------------------------------------------------

    def ingest_edge(self, edge):
        ingest_edge(self, edge)

    def ingest(self, stream):
        return ingest_stream(self, stream)

    def _apply(self, u, v, w, tag):
        """Apply validated edge arrays; returns number of nodes created."""
        before = self._n
        lo = np.minimum(u, v).astype(np.uint64)
        hi = np.maximum(u, v).astype(np.uint64)
        tag = tag.astype(np.uint64)
        if self.parallel_edges:
            tag = self._assign_tags(lo, hi, tag)
        ids = u if self.directed else np.concatenate([u, v])
        uniq, first = np.unique(ids, return_index=True)
        fresh = [int(x) for x in uniq[np.argsort(first, kind="stable")] if int(x) not in self._index]
        self._reserve(len(fresh))
        for node in fresh:
            self._add_node(node)
        lookup = np.fromiter((self._index[int(x)] for x in uniq), dtype=np.int64, count=len(uniq))
        row_u = lookup[np.searchsorted(uniq, u)]
        if self.directed:
            rows, elo, ehi, etag, ew = row_u, lo, hi, tag, w
        else:
            row_v = lookup[np.searchsorted(uniq, v)]
            loop = u == v
            if loop.any():
                self.has_self_loops = True
            keep_v = ~loop
            rows = np.concatenate([row_u, row_v[keep_v]])
            elo = np.concatenate([lo, lo[keep_v]])
            ehi = np.concatenate([hi, hi[keep_v]])
            etag = np.concatenate([tag, tag[keep_v]])
            ew = np.concatenate([w, w[keep_v]])
        if self.directed and (u == v).any():
            self.has_self_loops = True
        _kernel.ingest_rows(self._S, self._F, self._MAX, rows, elo, ehi, etag, ew, np.uint64(self.salt))
        return self._n - before

    def _assign_tags(self, lo, hi, tag):
        tag = tag.copy()
        if self._pair_counts is None and (tag == 0).any():
            raise StreamError(
                "automatic parallel-edge tags are unavailable for a store loaded from disk; "
                "give every edge an explicit tag"
            )
        for i in np.flatnonzero(tag == 0):
            key = (int(lo[i]), int(hi[i]))
            c = self._pair_counts.get(key, 0) + 1
            self._pair_counts[key] = c
            tag[i] = c
        return tag

    # -- comparison / copying -------------------------------------------------

    def copy(self):
        out = SketchStore(self.m, self.salt, self.mode, self.parallel_edges)
        out.has_self_loops = self.has_self_loops
        out._reserve(self._n)
        out._ids[: self._n] = self.node_ids
        out._S[: self._n] = self.S
        out._F[: self._n] = self.F
        out._MAX[: self._n] = self.MAX
        out._n = self._n
        out._index = dict(self._index)
        out._pair_counts = None if self._pair_counts is None else dict(self._pair_counts)
        return out

    def sorted_arrays(self):
        """``(ids, S, F, MAX)`` ordered by node id (canonical layout)."""
        order = np.argsort(self.node_ids, kind="stable")
        return self.node_ids[order], self.S[order], self.F[order], self.MAX[order]

    def bit_equal(self, other):
        if self.params() != other.params() or len(self) != len(other):
            return False
        a = self.sorted_arrays()
        b = other.sorted_arrays()
        return (
            np.array_equal(a[0], b[0])
            and np.array_equal(a[1].view(np.uint64), b[1].view(np.uint64))
            and np.array_equal(a[2], b[2])
            and np.array_equal(a[3].view(np.uint64), b[3].view(np.uint64))
        )

    def check_invariants(self):
        for node in self._index:
            self.sketch(node).check_invariants()


def _coerce_edge(e):
    if isinstance(e, WeightedEdge):
        return e
    e = tuple(e)
    if len(e) == 2:
        return WeightedEdge(int(e[0]), int(e[1]))
    if len(e) == 3:
        return WeightedEdge(int(e[0]), int(e[1]), float(e[2]))
    if len(e) == 4:
        return WeightedEdge(int(e[0]), int(e[1]), float(e[2]), int(e[3]))
    raise ValueError(f"cannot interpret {e!r} as an edge")


def _validate_arrays(store, u, v, w, tag, offset=0):
    bad_id = (u < 1) | (v < 1)
    bad_w = ~((w > 0) & np.isfinite(w))
    bad_tag = tag < 0 if store.parallel_edges else tag != 0
    bad = bad_id | bad_w | bad_tag
    if not bad.any():
        return
    i = int(np.flatnonzero(bad)[0])
    pos = offset + i
    if bad_id[i]:
        err = ReservedIdError(f"node ids must be >= 1 (edge {pos}: {u[i]}, {v[i]})")
    elif bad_w[i]:
        err = InvalidWeightError(f"edge {pos} has invalid weight {w[i]!r}")
    elif tag[i] < 0:
        err = StreamError(f"edge {pos} has negative tag {tag[i]}", position=pos)
    else:
        err = StreamError(
            f"edge {pos} carries tag {tag[i]} but parallel-edge mode is off", position=pos
        )
    err.position = pos
    raise err


def ingest_edge(store, edge):
    """Update the sketches touched by a single edge."""
    e = _coerce_edge(edge)
    u = np.array([e.u], dtype=np.int64)
    v = np.array([e.v], dtype=np.int64)
    w = np.array([float(e.weight)])
    tag = np.array([e.tag], dtype=np.int64)
    _validate_arrays(store, u, v, w, tag)
    store._apply(u, v, w, tag)


def _edge_arrays(chunk):
    n = len(chunk)
    u = np.empty(n, dtype=np.int64)
    v = np.empty(n, dtype=np.int64)
    w = np.empty(n)
    tag = np.zeros(n, dtype=np.int64)
    for i, e in enumerate(chunk):
        e = _coerce_edge(e)
        u[i], v[i], w[i], tag[i] = e.u, e.v, e.weight, e.tag
    return u, v, w, tag


def as_edge_arrays(edges):
    """Columns ``(u, v, w, tag)`` from an (E, 2|3|4) array or edge iterable."""
    if isinstance(edges, np.ndarray):
        if edges.ndim != 2 or edges.shape[1] not in (2, 3, 4):
            raise ValueError(f"edge array must have shape (E, 2..4), got {edges.shape}")
        n = edges.shape[0]
        u = edges[:, 0].astype(np.int64)
        v = edges[:, 1].astype(np.int64)
        w = edges[:, 2].astype(np.float64) if edges.shape[1] > 2 else np.ones(n)
        tag = edges[:, 3].astype(np.int64) if edges.shape[1] > 3 else np.zeros(n, dtype=np.int64)
        return u, v, w, tag
    return _edge_arrays(list(edges))


def ingest_stream(store, stream):
    """Fold a stream of edges into ``store`` in a single pass.

    ``stream`` may be an iterable of :class:`WeightedEdge` / tuples or an
    (E, 2..4) numpy array of ``u, v[, w[, tag]]`` rows. Edges are consumed
    in bounded chunks. Errors carry the zero-based stream position.
    """
    seen = 0
    created = 0
    if isinstance(stream, np.ndarray):
        chunks = (stream[i : i + _CHUNK] for i in range(0, len(stream), _CHUNK))
    else:
        it = iter(stream)
        chunks = iter(lambda: list(itertools.islice(it, _CHUNK)), [])
    for chunk in chunks:
        try:
            u, v, w, tag = as_edge_arrays(chunk)
        except (TypeError, ValueError) as exc:
            raise StreamError(f"malformed edge near position {seen}: {exc}", position=seen) from exc
        _validate_arrays(store, u, v, w, tag, offset=seen)
        created += store._apply(u, v, w, tag)
        seen += len(u)
    return IngestReport(seen, created)


def merge_stores(a, b):
    """Node-wise merge of two stores built with identical parameters."""
    if a.m != b.m or a.salt != b.salt or a.mode != b.mode:
        raise IncompatibleSketchError(
            f"cannot merge stores with parameters (m={a.m}, salt={a.salt}, mode={a.mode}) "
            f"and (m={b.m}, salt={b.salt}, mode={b.mode})"
        )
    out = a.copy()
    out.parallel_edges = a.parallel_edges or b.parallel_edges
    out.has_self_loops = a.has_self_loops or b.has_self_loops
    if b._pair_counts is None or b._pair_counts:
        out._pair_counts = None
    shared = [v for v in b.node_ids.tolist() if v in a._index]
    fresh = [v for v in b.node_ids.tolist() if v not in a._index]
    if shared:
        ra = out.rows(shared)
        rb = b.rows(shared)
        s, f = _merge_arrays(out._S[ra], out._F[ra], b._S[rb], b._F[rb])
        out._S[ra] = s
        out._F[ra] = f
        out._MAX[ra] = s.max(axis=1)
    if fresh:
        rb = b.rows(fresh)
        out._reserve(len(fresh))
        for node, r in zip(fresh, rb):
            dst = out._add_node(node)
            out._S[dst] = b._S[r]
            out._F[dst] = b._F[r]
            out._MAX[dst] = b._MAX[r]
    return out


def build_store(edges, m, salt=0, mode="undirected", parallel_edges=False):
    """Convenience: create a store and ingest ``edges`` into it."""
    store = SketchStore(m, salt=salt, mode=mode, parallel_edges=parallel_edges)
    ingest_stream(store, edges)
    return store
