"""Reference data: SBM graphs, co-rating streams and exact adjacency oracles."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from edgesketch.exceptions import StreamError
from edgesketch.sketch import WeightedEdge

WEIGHT_LAWS = ("exp", "unit")


@dataclass(frozen=True)
class SbmConfig:
    """Stochastic block model parameters.

    Node ``i`` (1-based) belongs to block ``(i - 1) % b``, so block sizes
    differ by at most one and the remainder is spread round-robin.
    """

    n: int
    b: int
    p: float
    q: float
    weights: str = "exp"
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.b < 1 or self.b > self.n:
            raise ValueError(f"need 1 <= b <= n, got n={self.n}, b={self.b}")
        if not 0.0 <= self.q <= self.p <= 1.0:
            raise ValueError(f"need 0 <= q <= p <= 1, got p={self.p}, q={self.q}")
        if self.weights not in WEIGHT_LAWS:
            raise ValueError(f"weights must be one of {WEIGHT_LAWS}")

    def block_of(self, node):
        return (node - 1) % self.b

    def block_sizes(self):
        base, extra = divmod(self.n, self.b)
        return [base + (1 if i < extra else 0) for i in range(self.b)]

    def blocks(self):
        return [list(range(i + 1, self.n + 1, self.b)) for i in range(self.b)]


class OracleGraph:
    """Exact weighted adjacency list used as ground truth at desk scale.

    Self-loops are stored once and contribute their weight once to the
    degree, matching how a sketch sees them.
    """

    def __init__(self, n=0, directed=False, labels=None):
        self.adj = defaultdict(dict)
        self.n = n
        self.directed = directed
        self.labels = labels

    @classmethod
    def from_edges(cls, edges, n=None, directed=False, labels=None, combine="error"):
        g = cls(0, directed, labels)
        for e in edges:
            u, v, w = int(e[0]), int(e[1]), float(e[2]) if len(e) > 2 else 1.0
            g.add_edge(u, v, w, combine)
        g.n = n if n is not None else max(g.adj, default=0)
        return g

    def add_edge(self, u, v, w=1.0, combine="error"):
        if w <= 0:
            raise ValueError(f"edge weight must be positive, got {w}")
        old = self.adj[u].get(v)
        if old is not None:
            if combine == "sum":
                w = old + w
            elif combine == "max":
                w = max(old, w)
            else:
                raise ValueError(f"duplicate edge ({u}, {v})")
        self.adj[u][v] = w
        if not self.directed:
            self.adj[v][u] = w

    def nodes(self):
        return sorted(self.adj)

    def edges(self):
        """Edges ``(u, v, w)``, each undirected edge once with ``u <= v``."""
        out = []
        for u, nbrs in self.adj.items():
            for v, w in nbrs.items():
                if self.directed or u <= v:
                    out.append((u, v, w))
        out.sort()
        return out

    def edge_set(self):
        return {(min(u, v), max(u, v)) for u, v, _ in self.edges()}

    @property
    def num_edges(self):
        return len(self.edges())

    def degree(self, v):
        return float(sum(self.adj.get(v, {}).values()))

    def weight(self, u, v):
        return self.adj.get(u, {}).get(v, 0.0)

    def total_weight(self):
        """e(V): total edge weight, each edge counted once."""
        return float(sum(w for _, _, w in self.edges()))

    def memory_words(self):
        """64-bit words needed by an undirected adjacency list: |V| + 4|E|."""
        return len(self.adj) + 4 * self.num_edges


def oracle_degree(g, v):
    return g.degree(v)


def oracle_volume(g, nodes):
    return float(sum(g.degree(v) for v in nodes))


def oracle_internal(g, nodes):
    """Exact ``(e(C), w(C))``: internal weight and weight incident to C."""
    members = set(nodes)
    e = 0.0
    w = 0.0
    for u, v, wt in g.edges():
        inside_u, inside_v = u in members, v in members
        if inside_u and inside_v:
            e += wt
        if inside_u or inside_v:
            w += wt
    return e, w


def oracle_degree_in(g, v, nodes):
    members = set(nodes)
    return float(sum(w for u, w in g.adj.get(v, {}).items() if u in members))


def sbm_generate(cfg):
    """Sample an SBM graph.

    Returns:
        ``(graph, stream)``: the oracle graph (with block labels) and an
        (E, 3) array of ``u, v, w`` rows in shuffled order.

    Topology, weights and stream order use separate generators derived
    from ``cfg.seed``.
    """
    topo = np.random.default_rng([cfg.seed, 0])
    wrng = np.random.default_rng([cfg.seed, 1])
    order_rng = np.random.default_rng([cfg.seed, 2])
    blocks = [np.array(b, dtype=np.int64) for b in cfg.blocks()]
    us, vs = [], []
    for i, bi in enumerate(blocks):
        for j in range(i, len(blocks)):
            bj = blocks[j]
            prob = cfg.p if i == j else cfg.q
            if prob == 0.0 or len(bi) == 0 or len(bj) == 0:
                continue
            hits = topo.random((len(bi), len(bj))) < prob
            if i == j:
                hits = np.triu(hits, k=1)
            a, c = np.nonzero(hits)
            us.append(bi[a])
            vs.append(bj[c])
    if us:
        u = np.concatenate(us)
        v = np.concatenate(vs)
    else:
        u = v = np.zeros(0, dtype=np.int64)
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    order = np.lexsort((hi, lo))
    lo, hi = lo[order], hi[order]
    if cfg.weights == "exp":
        w = wrng.exponential(1.0, size=len(lo))
    else:
        w = np.ones(len(lo))
    labels = {node: cfg.block_of(node) for node in range(1, cfg.n + 1)}
    g = OracleGraph(cfg.n, False, labels)
    for a, c, wt in zip(lo.tolist(), hi.tolist(), w.tolist()):
        g.adj[a][c] = wt
        g.adj[c][a] = wt
    stream = np.column_stack([lo, hi, w]).astype(np.float64) if len(lo) else np.zeros((0, 3))
    stream = stream[order_rng.permutation(len(stream))]
    return g, stream


def expected_sbm_edges(cfg):
    """Exact expected edge count from the block sizes."""
    sizes = cfg.block_sizes()
    within = sum(s * (s - 1) / 2 for s in sizes) * cfg.p
    total_pairs = cfg.n * (cfg.n - 1) / 2
    cross = (total_pairs - sum(s * (s - 1) / 2 for s in sizes)) * cfg.q
    return within + cross


def _group_by_user(pairs):
    seen = set()
    current = None
    items = []
    for pos, (user, item) in enumerate(pairs):
        user, item = int(user), int(item)
        if user != current:
            if current is not None:
                yield current, items
            if user in seen:
                raise StreamError(
                    f"user {user} reappears at position {pos}; input must be grouped by user",
                    position=pos,
                )
            seen.add(user)
            current, items = user, []
        items.append(item)
    if current is not None:
        yield current, items


def corate_stream(pairs, tag_with_user=True):
    """Unit co-rating edges between items rated by the same user.

    Args:
        pairs: iterable of ``(user, item)`` grouped by user.
        tag_with_user: tag each edge with the user id so a parallel-edge
            store counts every co-rating separately.

    Yields:
        :class:`WeightedEdge` ``(i, j, 1.0, tag)`` with ``i < j``.
    """
    for user, items in _group_by_user(pairs):
        if tag_with_user and user < 1:
            raise StreamError(f"user id {user} cannot be used as an edge tag (must be >= 1)")
        uniq = sorted(set(items))
        tag = user if tag_with_user else 0
        for a in range(len(uniq)):
            for c in range(a + 1, len(uniq)):
                yield WeightedEdge(uniq[a], uniq[c], 1.0, tag)


def corate_aggregate(pairs):
    """Exact co-rating weights ``{(i, j): users who rated both}``."""
    weights = defaultdict(int)
    for e in corate_stream(pairs, tag_with_user=False):
        weights[(e.u, e.v)] += 1
    return dict(weights)


def erdos_renyi(n, p, seed=0, weights="unit"):
    """Convenience G(n, p) via a one-block SBM."""
    return sbm_generate(SbmConfig(n, 1, p, p, weights, seed))


def binomial_sd(cfg):
    """Standard deviation of the SBM edge count."""
    sizes = cfg.block_sizes()
    within_pairs = sum(s * (s - 1) / 2 for s in sizes)
    cross_pairs = cfg.n * (cfg.n - 1) / 2 - within_pairs
    var = within_pairs * cfg.p * (1 - cfg.p) + cross_pairs * cfg.q * (1 - cfg.q)
    return math.sqrt(var)
