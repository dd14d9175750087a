"""Graph reconstruction from sketches via multi-hop weighted Jaccard scores.

Hop distances come from the graph of sampled edges. The radius-d
neighbourhood sketch of a node is the merge of the sketches of all nodes
within d hops, which is computed for every node at once by repeated
min-folding over closed neighbourhoods.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from edgesketch.estimators import SuperNodeSketch, fold_rows
from edgesketch.exceptions import MissingNodeError, UnsupportedConfigurationError
from edgesketch.sketch import Sketch, check_compatible

POLICIES = ("khop", "all")


@dataclass(frozen=True)
class ScoredPair:
    u: int
    v: int
    score: float
    pinned: bool = False


@dataclass
class SampledGraph:
    """Deduplicated sampled edges as a CSR adjacency over store rows."""

    ids: np.ndarray
    edges: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray

    @property
    def num_edges(self):
        return len(self.edges)

    def edge_set(self):
        return {(int(a), int(b)) for a, b in self.edges}

    def neighbors(self, row):
        return self.indices[self.indptr[row] : self.indptr[row + 1]]

    def coverage(self, true_edge_count):
        return self.num_edges / true_edge_count if true_edge_count else 0.0


def sampled_edge_graph(store):
    """Union of the sampled edges of every node, without duplicates.

    Self-loops and parallel copies collapse to one node pair.
    """
    F = store.F.reshape(-1, 3)
    F = F[~((F[:, 0] == 0) & (F[:, 1] == 0))]
    pairs = np.unique(F[:, :2], axis=0)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    ids = store.node_ids.astype(np.uint64)
    order = np.argsort(ids)
    rows_of = lambda x: order[np.searchsorted(ids[order], x)]
    n = len(ids)
    if len(pairs):
        a = rows_of(pairs[:, 0])
        b = rows_of(pairs[:, 1])
        src = np.concatenate([a, b])
        dst = np.concatenate([b, a])
        srt = np.lexsort((dst, src))
        src, dst = src[srt], dst[srt]
        indptr = np.concatenate([[0], np.cumsum(np.bincount(src, minlength=n))])
        indices = dst
    else:
        indptr = np.zeros(n + 1, dtype=np.int64)
        indices = np.zeros(0, dtype=np.int64)
    return SampledGraph(ids, pairs.astype(np.uint64), indptr, indices)


def _ball(graph, row, d):
    seen = {row}
    frontier = [row]
    for _ in range(d):
        nxt = []
        for x in frontier:
            for y in graph.neighbors(x).tolist():
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        if not nxt:
            break
        frontier = nxt
    return seen


@dataclass
class NeighborhoodSketch:
    center: int
    radius: int
    sketch: SuperNodeSketch


def neighborhood_sketch(store, u, d, graph=None):
    """Merged sketch of every node within ``d`` sampled-edge hops of ``u``."""
    if u not in store:
        raise MissingNodeError(f"node {u} is not in the store")
    if d < 0:
        raise ValueError(f"radius must be non-negative, got {d}")
    graph = graph if graph is not None else sampled_edge_graph(store)
    rows = sorted(_ball(graph, store._index[u], d))
    s, f = fold_rows(store.S[rows], store.F[rows])
    members = frozenset(store.node_ids[rows].tolist())
    sk = Sketch(s.copy(), f.copy(), float(s.max()), store.salt)
    return NeighborhoodSketch(u, d, SuperNodeSketch(sk, members, store.has_self_loops))


def jaccard_estimate(a, b):
    """Fraction of positions where the two sketches hold bit-identical minima."""
    sa = a.sketch.sketch if isinstance(a, NeighborhoodSketch) else a
    sb = b.sketch.sketch if isinstance(b, NeighborhoodSketch) else b
    check_compatible(sa, sb)
    both = isinstance(a, NeighborhoodSketch) and isinstance(b, NeighborhoodSketch)
    if both and a.radius != b.radius:
        raise ValueError("neighbourhood sketches must share a radius")
    match = np.isfinite(sa.s) & (sa.s.view(np.uint64) == sb.s.view(np.uint64))
    return float(match.mean())


def neighborhood_minima(store, graph, k):
    """``[N_0, ..., N_k]``: per-row minima of the radius-d neighbourhoods."""
    layers = [np.ascontiguousarray(store.S)]
    counts = np.diff(graph.indptr)
    has = counts > 0
    for _ in range(k):
        prev = layers[-1]
        cur = prev.copy()
        if graph.indices.size:
            gathered = prev[graph.indices]
            starts = graph.indptr[:-1][has]
            cur[has] = np.minimum(prev[has], np.minimum.reduceat(gathered, starts, axis=0))
        layers.append(cur)
    return layers


def _khop_targets(graph, row, k):
    ball = _ball(graph, row, k)
    return np.array(sorted(x for x in ball if x > row), dtype=np.int64)


def score_pairs(store, k=4, alpha=0.2, policy="khop", pin=True, workers=1):
    """Rank candidate node pairs by combined multi-hop similarity.

    Args:
        k: largest neighbourhood radius.
        alpha: decay applied per hop, must be positive.
        policy: ``"khop"`` scores pairs within ``k`` sampled hops,
            ``"all"`` scores every pair.
        pin: give sampled edges score 1.0 and rank them first.
        workers: threads used for scoring.

    Returns:
        list of :class:`ScoredPair`, pinned pairs first, then by score
        descending, ties broken by ``(u, v)``.
    """
    if not alpha > 0:
        raise UnsupportedConfigurationError(f"alpha must be positive, got {alpha}")
    if policy not in POLICIES:
        raise UnsupportedConfigurationError(f"unknown candidate policy {policy!r}")
    if k < 0:
        raise UnsupportedConfigurationError(f"k must be non-negative, got {k}")
    graph = sampled_edge_graph(store)
    layers = [L.view(np.uint64) for L in neighborhood_minima(store, graph, k)]
    finite = [np.isfinite(L.view(np.float64)) for L in layers]
    weights = alpha ** np.arange(k + 1)
    ids = store.node_ids
    m = store.m
    n = len(store)
    pinned = {(int(a), int(b)) for a, b in graph.edges} if pin else set()

    def score_row(row):
        if policy == "all":
            targets = np.arange(row + 1, n)
        else:
            targets = _khop_targets(graph, row, k)
        if targets.size == 0:
            return []
        total = np.zeros(len(targets))
        for d in range(k + 1):
            L = layers[d]
            match = (L[targets] == L[row]) & finite[d][row]
            total += weights[d] * match.sum(axis=1) / m
        out = []
        u = int(ids[row])
        for t, sc in zip(targets.tolist(), total.tolist()):
            v = int(ids[t])
            a, b = (u, v) if u < v else (v, u)
            if (a, b) in pinned:
                out.append(ScoredPair(a, b, 1.0, True))
            else:
                out.append(ScoredPair(a, b, sc))
        return out

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            chunks = list(pool.map(score_row, range(n)))
    else:
        chunks = [score_row(r) for r in range(n)]
    scored = [p for chunk in chunks for p in chunk]
    scored.sort(key=lambda p: (not p.pinned, -p.score, p.u, p.v))
    return scored


@dataclass(frozen=True)
class Precision:
    value: float
    t: int
    truncated: bool = False


def precision_at(scored, truth, t):
    """Share of the top-``t`` pairs that are true edges."""
    if t < 1:
        raise ValueError(f"t must be at least 1, got {t}")
    truncated = t > len(scored)
    t_eff = min(t, len(scored))
    if t_eff == 0:
        return Precision(0.0, 0, True)
    hits = sum(1 for p in scored[:t_eff] if (p.u, p.v) in truth)
    return Precision(hits / t_eff, t_eff, truncated)


def precision_curve(scored, truth, ts):
    """Precision at each ``t`` in one pass over the ranking."""
    flags = np.fromiter(((p.u, p.v) in truth for p in scored), dtype=bool, count=len(scored))
    cum = np.cumsum(flags)
    out = []
    for t in ts:
        t_eff = min(int(t), len(scored))
        out.append(Precision(float(cum[t_eff - 1] / t_eff) if t_eff else 0.0, t_eff, t > len(scored)))
    return out


def s_only_scores(store, k=4, alpha=0.2, policy="khop", workers=1):
    """Baseline ranking that ignores sampled edges when scoring.

    Sampled edges still define hop distances, but no pair is pinned, so
    every score is a pure sum of Jaccard estimates. Under a fixed memory
    budget the store passed here is built with three times the cells.
    """
    return score_pairs(store, k, alpha, policy, pin=False, workers=workers)


def truth_set(edges):
    return {(min(int(u), int(v)), max(int(u), int(v))) for u, v, *_ in edges}


def memory_budget_cells(m):
    """Cells granted to an S-only sketch under the memory of an m-cell sketch."""
    return 3 * m


def ranking_ok(scored):
    return all(p.u < p.v and p.score >= 0 and not math.isnan(p.score) for p in scored)
