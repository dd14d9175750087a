"""Louvain community detection and modularity estimation on sketches.

Node moves follow sampled edges: a node only considers the communities of
the far endpoints of the edges in its sample. Gains are estimated from
degree, volume and community-restricted degree estimates; the total edge
weight is estimated once per run and frozen.

After phase 1 converges each community becomes a super-node whose sketch is
the position-wise merge of its members' sketches. Sampled edges keep their
original endpoints, so membership tests at coarse levels go through a
node -> super-node lookup.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from edgesketch.estimators import (
    degree_estimates,
    estimate_degree,
    fold_rows,
    internal_weight,
    other_endpoints,
    super_node,
)
from edgesketch.exceptions import (
    NoDataError,
    StaleCacheError,
    UnsupportedConfigurationError,
)
from edgesketch.sketch import SketchStore

logger = logging.getLogger(__name__)


@dataclass
class LouvainConfig:
    max_levels: int = 20
    sweep_cap: int = 100
    seed: int = 0


class Partition:
    """Assignment of nodes to integer community ids.

    Cached per-community volume estimates are kept alongside the member
    sets; ``version`` increases on every move so stale gain caches can be
    detected.
    """

    def __init__(self, assignment, level=0):
        self.assignment = dict(assignment)
        self.level = level
        self.version = 0
        self.volumes = {}
        self._members = None

    @classmethod
    def singletons(cls, nodes):
        return cls({v: i for i, v in enumerate(sorted(nodes))})

    @classmethod
    def from_communities(cls, communities):
        assignment = {}
        for cid, members in enumerate(communities):
            for v in members:
                if v in assignment:
                    raise ValueError(f"node {v} appears in more than one community")
                assignment[v] = cid
        return cls(assignment)

    def __len__(self):
        return len(self.assignment)

    def __getitem__(self, node):
        return self.assignment[node]

    def communities(self):
        """``{community id: set of nodes}``."""
        if self._members is None:
            members = {}
            for v, c in self.assignment.items():
                members.setdefault(c, set()).add(v)
            self._members = members
        return self._members

    def community_list(self):
        """Member sets ordered by their smallest node."""
        return sorted((frozenset(c) for c in self.communities().values()), key=min)

    def move(self, node, target):
        source = self.assignment[node]
        if source == target:
            return
        self.assignment[node] = target
        if self._members is not None:
            self._members[source].discard(node)
            if not self._members[source]:
                del self._members[source]
            self._members.setdefault(target, set()).add(node)
        self.version += 1

    def refresh_volumes(self, store):
        deg = dict(zip(store.node_ids.tolist(), degree_estimates(store).tolist()))
        self.volumes = {c: sum(deg[v] for v in vs) for c, vs in self.communities().items()}
        return self.volumes

    def canonical(self):
        """Copy with community ids renumbered by smallest member."""
        return Partition.from_communities(self.community_list())

    def same_as(self, other):
        return self.community_list() == other.community_list()


@dataclass
class ModularityEstimate:
    """Sketch-based modularity with the per-community terms it came from."""

    value: float
    per_community_terms: list
    e_V_hat: float
    vol_V_hat: float = 0.0
    cross_evaluations: tuple = ()

    def recompute(self):
        return sum(
            e / self.e_V_hat - (vol * vol) / (self.vol_V_hat * self.vol_V_hat)
            for e, vol in self.per_community_terms
        )


def exact_modularity_oracle(graph, partition):
    """Exact modularity of ``partition`` on an :class:`OracleGraph`.

    ``partition`` may be a :class:`Partition`, a node -> community mapping,
    or an iterable of node sets. Graph nodes not covered are singletons.
    """
    if isinstance(partition, Partition):
        assignment = partition.assignment
    elif isinstance(partition, dict):
        assignment = partition
    else:
        assignment = {}
        for cid, members in enumerate(partition):
            for v in members:
                assignment[v] = cid
    e_total = 0.0
    internal = {}
    vol = {}
    fresh = ("singleton",)
    for u, v, w in graph.edges():
        cu = assignment.get(u, fresh + (u,))
        cv = assignment.get(v, fresh + (v,))
        e_total += w
        vol[cu] = vol.get(cu, 0.0) + w
        vol[cv] = vol.get(cv, 0.0) + w
        if cu == cv:
            internal[cu] = internal.get(cu, 0.0) + w
    if e_total == 0.0:
        raise NoDataError("modularity is undefined for a graph without edges")
    vol_total = sum(vol.values())
    return sum(internal.get(c, 0.0) / e_total - (x / vol_total) ** 2 for c, x in vol.items())


# -- estimators ---------------------------------------------------------------


def _require_undirected(store):
    if store.directed:
        raise UnsupportedConfigurationError("community detection needs an undirected store")


def _check_covers(store, partition):
    missing = [v for v in store.node_ids.tolist() if v not in partition.assignment]
    if missing:
        raise ValueError(f"partition does not cover {len(missing)} store nodes, e.g. {missing[0]}")


def estimate_modularity(store, partition):
    """Modularity of ``partition`` estimated from the sketches only.

    Each community contributes ``e(C)/e(V) - vol(C)^2/vol(V)^2`` with
    ``e(C)`` from its merged sketch (union weight times internal fraction),
    ``vol`` from summed degree estimates, and ``e(V) = vol(V) / 2``.
    """
    _require_undirected(store)
    _check_covers(store, partition)
    deg = dict(zip(store.node_ids.tolist(), degree_estimates(store).tolist()))
    vol_V = float(sum(deg.values()))
    if not vol_V > 0:
        raise NoDataError("store has no edges")
    e_V = vol_V / 2.0
    terms = []
    for members in partition.community_list():
        members = [v for v in members if v in store]
        if not members:
            continue
        e_C = internal_weight(super_node(store, members)).value
        vol_C = sum(deg[v] for v in members)
        terms.append((e_C, vol_C))
    value = sum(e / e_V - (vol / vol_V) ** 2 for e, vol in terms)
    return ModularityEstimate(value, terms, e_V, vol_V)


@dataclass(frozen=True)
class GainCache:
    e_V: float
    vol_C: float
    deg_v: float
    version: int


def gain_cache(store, partition, node, community, e_V=None):
    """Snapshot of the aggregates ``estimate_gain`` needs."""
    if e_V is None:
        e_V = float(degree_estimates(store).sum()) / 2.0
    deg = dict(zip(store.node_ids.tolist(), degree_estimates(store).tolist()))
    vol_C = sum(deg[v] for v in community if v != node)
    return GainCache(e_V, vol_C, deg[node], partition.version)


def estimate_gain(store, partition, node, community, cache):
    """Numerator of the modularity change from adding ``node`` to ``community``.

    ``4 e(V) deg_{v|C} - 2 vol(C) deg_v - deg_v^2`` with every quantity
    replaced by its sketch estimate. The positive denominator
    ``4 e(V)^2`` is dropped; only the sign and ordering matter.
    """
    if cache.version != partition.version:
        raise StaleCacheError(
            f"gain cache built at partition version {cache.version}, now {partition.version}"
        )
    sk = store.sketch(node)
    members = set(community) - {node}
    frac = 0.0
    if members:
        far = other_endpoints(sk, node)
        frac = float(np.isin(far, np.fromiter(members, dtype=np.uint64)).mean())
    deg_v = cache.deg_v
    d_vC = estimate_degree(sk).value * frac
    return 4.0 * cache.e_V * d_vC - 2.0 * cache.vol_C * deg_v - deg_v * deg_v


# -- Louvain ------------------------------------------------------------------


class _Level:
    """Super-node view of the store for one Louvain level."""

    def __init__(self, S, F, vol, unit_of_row, sorted_ids, id_rows):
        self.S = S
        self.F = F
        self.m = S.shape[1]
        self.vol = vol
        self.w = (self.m - 1) / S.sum(axis=1)
        self.unit_of_row = unit_of_row
        self.n_units = S.shape[0]
        lo_row = id_rows[np.searchsorted(sorted_ids, F[:, :, 0])]
        hi_row = id_rows[np.searchsorted(sorted_ids, F[:, :, 1])]
        lo_unit = unit_of_row[lo_row]
        hi_unit = unit_of_row[hi_row]
        own = np.arange(self.n_units)[:, None]
        far = np.where(lo_unit == own, hi_unit, lo_unit)
        far[(lo_unit == own) & (hi_unit == own)] = -1
        self.far = far

    def coarsen(self, comm, sorted_ids, id_rows):
        k = int(comm.max()) + 1
        S = np.empty((k, self.m))
        F = np.empty((k, self.m, 3), dtype=np.uint64)
        for c in range(k):
            S[c], F[c] = fold_rows(self.S[comm == c], self.F[comm == c])
        vol = np.bincount(comm, weights=self.vol, minlength=k)
        return _Level(S, F, vol, comm[self.unit_of_row], sorted_ids, id_rows)


def _phase1(level, e_V, rng, sweep_cap, comm=None):
    """Greedy local moves; returns (community per unit, moves, sweeps)."""
    n = level.n_units
    if comm is None:
        comm = np.arange(n)
        comm_vol = level.vol.copy()
    else:
        comm = np.array(comm, dtype=np.int64)
        comm_vol = np.bincount(comm, weights=level.vol, minlength=n)
    m = level.m
    moves = 0
    sweeps = 0
    four_e = 4.0 * e_V
    for _ in range(sweep_cap):
        sweeps += 1
        moved = 0
        for x in rng.permutation(n):
            far = level.far[x]
            far = far[far >= 0]
            if far.size == 0:
                continue
            cands, counts = np.unique(comm[far], return_counts=True)
            own = comm[x]
            vol_x = level.vol[x]
            scale = level.w[x] / m
            mask = cands == own
            own_count = counts[mask][0] if mask.any() else 0
            gain_own = four_e * scale * own_count - 2.0 * (comm_vol[own] - vol_x) * vol_x
            others = ~mask
            if not others.any():
                continue
            t = cands[others]
            gains = four_e * scale * counts[others] - 2.0 * comm_vol[t] * vol_x
            best = int(np.argmax(gains))  # cands are sorted: first max = lowest id
            if gains[best] - gain_own > 0.0:
                target = t[best]
                comm_vol[own] -= vol_x
                comm_vol[target] += vol_x
                comm[x] = target
                moved += 1
        moves += moved
        if moved == 0:
            break
    return comm, moves, sweeps


def _relabel(comm):
    _, first = np.unique(comm, return_index=True)
    uniq = comm[np.sort(first)]
    mapping = np.empty(comm.max() + 1, dtype=np.int64)
    mapping[uniq] = np.arange(len(uniq))
    return mapping[comm]


@dataclass
class LouvainResult:
    partition: Partition
    modularity: ModularityEstimate
    level_moves: list = field(default_factory=list)
    seconds: float = 0.0


def louvain(store, config=None):
    """Two-phase Louvain on the sketch store.

    Returns:
        ``(partition, modularity_estimate)`` with the partition over the
        original nodes (community ids renumbered by smallest member).
    """
    result = louvain_run(store, config)
    return result.partition, result.modularity


def louvain_run(store, config=None):
    """Like :func:`louvain` but also reports per-level move counts and time."""
    config = config or LouvainConfig()
    _require_undirected(store)
    start = time.perf_counter()
    n = len(store)
    if n == 0:
        raise NoDataError("store has no nodes")
    level, deg = _base_level(store)
    e_V = float(deg.sum()) / 2.0
    if not e_V > 0:
        raise NoDataError("store has no edges")
    ids = store.node_ids
    order = np.argsort(ids)
    sorted_ids, id_rows = ids[order].astype(np.uint64), order
    rng = np.random.default_rng(config.seed)
    level_moves = []
    for lvl in range(config.max_levels):
        comm, moves, sweeps = _phase1(level, e_V, rng, config.sweep_cap)
        level_moves.append(moves)
        logger.info("level %d: %d moves in %d sweeps", lvl, moves, sweeps)
        if moves == 0:
            break
        comm = _relabel(comm)
        level = level.coarsen(comm, sorted_ids, id_rows)
    assignment = dict(zip(ids.tolist(), level.unit_of_row.tolist()))
    partition = Partition(assignment, level=len(level_moves)).canonical()
    estimate = estimate_modularity(store, partition)
    return LouvainResult(partition, estimate, level_moves, time.perf_counter() - start)


def _base_level(store):
    ids = store.node_ids
    order = np.argsort(ids)
    sorted_ids = ids[order].astype(np.uint64)
    deg = degree_estimates(store)
    return _Level(store.S, store.F, deg.copy(), np.arange(len(store)), sorted_ids, order), deg


def louvain_phase1(store, partition, rng, sweep_cap=100, e_V=None):
    """Local-move phase starting from ``partition``.

    Returns:
        ``(new partition, number of moves)``; community ids of the input are
        kept, so a node that never moves keeps its label.
    """
    _require_undirected(store)
    _check_covers(store, partition)
    level, deg = _base_level(store)
    if e_V is None:
        e_V = float(deg.sum()) / 2.0
    if not e_V > 0:
        raise NoDataError("store has no edges")
    labels = sorted(set(partition.assignment.values()))
    code = {c: i for i, c in enumerate(labels)}
    ids = store.node_ids.tolist()
    comm0 = np.array([code[partition.assignment[v]] for v in ids], dtype=np.int64)
    comm, moves, _ = _phase1(level, e_V, rng, sweep_cap, comm0)
    out = dict(partition.assignment)
    out.update(zip(ids, (labels[c] for c in comm.tolist())))
    return Partition(out, partition.level), moves


def estimate_move_gain(store, partition, node, target, e_V=None):
    """Estimated gain numerator for moving ``node`` into community ``target``.

    Computed as the gain of joining ``target`` minus the gain of rejoining
    its own community without itself; positive means the move helps.
    """
    members = partition.communities()
    own = members[partition[node]] - {node}
    into = members.get(target, set()) - {node}
    cache_t = gain_cache(store, partition, node, into, e_V)
    cache_r = gain_cache(store, partition, node, own, cache_t.e_V)
    return estimate_gain(store, partition, node, into, cache_t) - estimate_gain(
        store, partition, node, own, cache_r
    )


def candidate_moves(store, partition, e_V=None):
    """``{(node, target): estimated move gain}`` over sampled-edge candidates."""
    out = {}
    for v in store.node_ids.tolist():
        far = other_endpoints(store.sketch(v), v).tolist()
        for t in sorted({partition[int(x)] for x in far if int(x) != v} - {partition[v]}):
            out[(v, t)] = estimate_move_gain(store, partition, v, t, e_V)
    return out


def coarsen(store, partition):
    """One super-node per community.

    Returns:
        ``(super_store, lookup)``: a store whose node ids are community ids
        (1-based, ordered by smallest member) holding merged sketches, and
        the ``original node -> super node`` table needed to interpret the
        original endpoints still present in the sampled edges.
    """
    _check_covers(store, partition)
    out = SketchStore(store.m, store.salt, store.mode, store.parallel_edges)
    out.has_self_loops = True
    lookup = {}
    for sid, members in enumerate(partition.community_list(), start=1):
        members = [v for v in members if v in store]
        if not members:
            continue
        out.set_sketch(sid, super_node(store, members).sketch)
        for v in members:
            lookup[v] = sid
    return out, lookup


def restrict_positions(store, positions):
    """Store using only the given sketch positions (an m' = len(positions) sketch)."""
    positions = np.asarray(positions)
    out = SketchStore(len(positions), store.salt, store.mode, store.parallel_edges)
    out.has_self_loops = store.has_self_loops
    out._reserve(len(store))
    n = len(store)
    out._ids[:n] = store.node_ids
    out._S[:n] = store.S[:, positions]
    out._F[:n] = store.F[:, positions]
    out._MAX[:n] = out._S[:n].max(axis=1)
    out._n = n
    out._index = dict(store._index)
    return out


def split_half_modularity(store, config=None):
    """Modularity estimate free of the selection bias of reusing one sketch.

    Positions are split into halves A and B; a partition found on A is
    scored on B and vice versa, and the two scores are averaged.

    Returns:
        ``(partition found on A, averaged estimate)``.
    """
    m = store.m
    if m % 2 or m < 6:
        raise UnsupportedConfigurationError(f"split-half needs an even m >= 6, got {m}")
    half = m // 2
    a = restrict_positions(store, np.arange(half))
    b = restrict_positions(store, np.arange(half, m))
    part_a, _ = louvain(a, config)
    part_b, _ = louvain(b, config)
    on_b = estimate_modularity(b, part_a)
    on_a = estimate_modularity(a, part_b)
    value = 0.5 * (on_b.value + on_a.value)
    est = ModularityEstimate(
        value,
        on_b.per_community_terms,
        on_b.e_V_hat,
        on_b.vol_V_hat,
        cross_evaluations=(on_b.value, on_a.value),
    )
    return part_a, est


def modularity_gain_exact(graph, partition, node, target):
    """Exact modularity change of moving ``node`` into community ``target``."""
    before = exact_modularity_oracle(graph, partition)
    moved = dict(partition.assignment if isinstance(partition, Partition) else partition)
    moved[node] = target
    return exact_modularity_oracle(graph, moved) - before
