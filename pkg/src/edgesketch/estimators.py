"""Graph statistics estimated from sketches alone.

Degrees, volumes, edge counts and density come from the exponential minima;
set expressions compare coordinated minima position by position; internal
edge statistics and community-restricted degrees combine the minima with
the sampled edges.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from edgesketch.exceptions import (
    NoDataError,
    UnsupportedConfigurationError,
)
from edgesketch.sketch import Sketch, check_compatible

VARIANCE_WARNING = "m < 3: variance of the estimator is undefined"


@dataclass(frozen=True)
class Estimate:
    """A point estimate with its relative standard-error bound.

    Attributes:
        value: the estimate.
        std_error_bound: relative standard error (SE / true value) implied
            by the closed-form variance, evaluated at the estimate when the
            closed form depends on the unknown.
        m_effective: number of positions that contributed (``m'`` for set
            expressions, ``m`` otherwise).
        warning: set when the bound is not meaningful.
    """

    value: float
    std_error_bound: float
    m_effective: int
    warning: str | None = None

    @property
    def std_error(self):
        """Absolute standard error implied by the relative bound."""
        if self.value == 0.0:
            return 0.0
        return abs(self.value) * self.std_error_bound

    def __float__(self):
        return float(self.value)


def cardinality_se(m):
    """Relative standard error ``1/sqrt(m-2)`` of the weight estimator."""
    return 1.0 / math.sqrt(m - 2) if m >= 3 else math.inf


def _require_data(s):
    if not np.isfinite(s).all():
        raise NoDataError("sketch has empty cells; the node has no incident edges")


def estimate_degree(sk):
    """Unbiased weighted-degree estimate ``(m - 1) / sum(s)``.

    On a directed store this is the out-degree.
    """
    _require_data(sk.s)
    m = sk.m
    warning = VARIANCE_WARNING if m < 3 else None
    return Estimate((m - 1) / float(sk.s.sum()), cardinality_se(m), m, warning)


def degree_estimates(store):
    """Vector of degree estimates for every store row (row order)."""
    return (store.m - 1) / store.S.sum(axis=1)


def _require_undirected(store, what):
    if store.directed:
        raise UnsupportedConfigurationError(f"{what} is only defined for undirected stores")


def estimate_volume(store, nodes):
    """Sum of degree estimates over ``nodes``.

    The relative SE bound ``1/sqrt(m-2)`` follows from Minkowski's
    inequality and holds whatever the correlation between node estimates.
    """
    _require_undirected(store, "volume")
    nodes = list(nodes)
    if not nodes:
        return Estimate(0.0, cardinality_se(store.m), store.m)
    rows = store.rows(nodes)
    S = store.S[rows]
    _require_data(S)
    value = float(((store.m - 1) / S.sum(axis=1)).sum())
    return Estimate(value, cardinality_se(store.m), store.m)


def estimate_edge_count(store):
    """Total edge weight as half the estimated volume of all nodes."""
    _require_undirected(store, "edge count")
    if store.has_self_loops:
        raise UnsupportedConfigurationError(
            "edge count from volume assumes no self-loops, but the store has some"
        )
    vol = estimate_volume(store, store.node_ids.tolist())
    return Estimate(vol.value / 2.0, vol.std_error_bound, vol.m_effective)


def estimate_density(store, n):
    """Weighted density ``vol(V) / (n (n - 1))`` for a node universe of size n."""
    if n < 2:
        raise ValueError(f"node universe must have at least 2 nodes, got {n}")
    e = estimate_edge_count(store)
    return Estimate(2.0 * e.value / (n * (n - 1)), e.std_error_bound, e.m_effective)


# -- set expressions ---------------------------------------------------------


@dataclass(frozen=True)
class Conjunct:
    """Indices of sketches that must contain (positives) or exclude
    (negatives) an element."""

    positives: tuple
    negatives: tuple = ()


class SetExpression:
    """A set built from sketched sets, written as disjoint conjuncts.

    Args:
        sketches: the referenced sketches; all must be coordinated.
        conjuncts: iterable of ``(positives, negatives)`` index tuples.

    Use the ``from_predicate`` / ``union`` / ``intersection`` /
    ``difference`` constructors to get a full disjunctive normal form.
    """

    def __init__(self, sketches, conjuncts):
        self.sketches = list(sketches)
        if not self.sketches:
            raise ValueError("a set expression needs at least one sketch")
        for other in self.sketches[1:]:
            check_compatible(self.sketches[0], other)
        d = len(self.sketches)
        dnf = []
        for c in conjuncts:
            pos, neg = (c.positives, c.negatives) if isinstance(c, Conjunct) else c
            pos, neg = tuple(pos), tuple(neg)
            if not pos:
                raise ValueError("every conjunct needs at least one positive set")
            if set(pos) & set(neg):
                raise ValueError(f"conjunct {pos} / {neg} is contradictory")
            if any(not 0 <= i < d for i in pos + neg):
                raise IndexError("conjunct references an unknown sketch")
            dnf.append(Conjunct(pos, neg))
        for a, b in itertools.combinations(dnf, 2):
            if not (set(a.positives) & set(b.negatives) or set(a.negatives) & set(b.positives)):
                raise ValueError(f"conjuncts {a} and {b} are not disjoint")
        self.dnf = dnf

    @classmethod
    def from_predicate(cls, sketches, predicate: Callable[[tuple], bool]):
        """Full DNF of the set ``{x : predicate(x in A_1, ..., x in A_d)}``."""
        sketches = list(sketches)
        d = len(sketches)
        conjuncts = []
        for bits in itertools.product((True, False), repeat=d):
            if any(bits) and predicate(bits):
                pos = tuple(i for i in range(d) if bits[i])
                neg = tuple(i for i in range(d) if not bits[i])
                conjuncts.append(Conjunct(pos, neg))
        return cls(sketches, conjuncts)

    @classmethod
    def single(cls, sketch):
        return cls([sketch], [Conjunct((0,))])

    @classmethod
    def union(cls, *sketches):
        return cls.from_predicate(sketches, any)

    @classmethod
    def intersection(cls, *sketches):
        return cls.from_predicate(sketches, all)

    @classmethod
    def difference(cls, a, b):
        return cls.from_predicate([a, b], lambda x: x[0] and not x[1])


def _bits(a):
    return np.ascontiguousarray(a).view(np.uint64)


def estimate_set_expression(expr):
    """Weight of the set described by ``expr``.

    Counts positions where a conjunct's positive sketches hold bit-identical
    finite values strictly below all of its negative sketches, then scales
    the union-weight estimate over every referenced sketch by the matching
    fraction ``m'/m``.
    """
    S = np.stack([sk.s for sk in expr.sketches])
    m = S.shape[1]
    mins = S.min(axis=0)
    _require_data(mins)
    bits = _bits(S)
    m_prime = 0
    for c in expr.dnf:
        pos = list(c.positives)
        match = np.isfinite(S[pos[0]]) & (bits[pos] == bits[pos[0]]).all(axis=0)
        if c.negatives:
            match &= S[pos[0]] < S[list(c.negatives)].min(axis=0)
        m_prime += int(match.sum())
    omega = (m - 1) / float(mins.sum())
    value = m_prime / m * omega
    bound = math.sqrt(value * omega / m) / value if value > 0 else math.inf
    warning = VARIANCE_WARNING if m < 3 else None
    return Estimate(value, bound, m_prime, warning)


def subset_witness(a, b):
    """First position proving the edge set of ``a`` is not inside that of ``b``.

    Returns an index ``k`` with ``b.s[k] > a.s[k]``, or ``None``. When the
    edge set of ``a`` is contained in that of ``b`` no witness exists.
    """
    check_compatible(a, b)
    hits = np.flatnonzero(b.s > a.s)
    return int(hits[0]) if hits.size else None


def witness_probability(weight_b, weight_union, m):
    """Chance that a non-subset is detected: ``1 - (|B| / |A u B|)^m``."""
    return 1.0 - (weight_b / weight_union) ** m


# -- super nodes and internal edges ------------------------------------------


@dataclass(eq=False)
class SuperNodeSketch:
    """Merged sketch of a node set ``members``."""

    sketch: Sketch
    members: frozenset
    self_loops: bool = False


def fold_rows(S, F):
    """Position-wise minimum over sketch rows with the matching samples."""
    idx = S.argmin(axis=0)
    cols = np.arange(S.shape[1])
    return S[idx, cols], F[idx, cols]


def super_node(store, nodes):
    """Union sketch of all edges incident to ``nodes``."""
    members = frozenset(nodes)
    if not members:
        return SuperNodeSketch(Sketch.empty(store.m, store.salt), members, store.has_self_loops)
    rows = store.rows(sorted(members))
    s, f = fold_rows(store.S[rows], store.F[rows])
    sk = Sketch(s.copy(), f.copy(), float(s.max()), store.salt)
    return SuperNodeSketch(sk, members, store.has_self_loops)


def _member_mask(values, members):
    if not members:
        return np.zeros(values.shape, dtype=bool)
    return np.isin(values, np.fromiter(members, dtype=np.uint64, count=len(members)))


def internal_indicators(sketch, members):
    f = sketch.f
    return _member_mask(f[:, 0], members) & _member_mask(f[:, 1], members)


def internal_fraction(snk):
    """Fraction of sampled edges with both endpoints inside the node set."""
    sk = snk.sketch
    _require_data(sk.s)
    p = float(internal_indicators(sk, snk.members).mean())
    bound = math.sqrt((1.0 - p) / (p * sk.m)) if p > 0 else math.inf
    return Estimate(p, bound, sk.m)


def internal_weight(snk):
    """Total weight of edges internal to the node set.

    Product of the union-weight estimate and the internal fraction; the two
    factors are independent, so the product is unbiased with variance
    ``p w^2 (m + p - 1) / (m (m - 2))``.
    """
    sk = snk.sketch
    w = estimate_degree(sk)
    p = internal_fraction(snk)
    m = sk.m
    value = w.value * p.value
    if p.value > 0 and m >= 3:
        bound = math.sqrt((m + p.value - 1) / (p.value * m * (m - 2)))
    else:
        bound = math.inf
    warning = w.warning
    if snk.self_loops:
        warning = "store contains self-loops; their weight is counted once in e(C)"
    return Estimate(value, bound, m, warning)


def internal_weight_variance(p, w, m):
    """Closed-form variance of the internal-weight estimator."""
    return p * w * w * (m + p - 1) / (m * (m - 2))


def other_endpoints(sketch, node):
    """For each cell, the endpoint of the sampled edge opposite ``node``."""
    lo = sketch.f[:, 0]
    hi = sketch.f[:, 1]
    return np.where(lo == np.uint64(node), hi, lo)


def degree_in_community(sk, node, community):
    """Weight of edges from ``node`` into the node set ``community``."""
    deg = estimate_degree(sk)
    frac = float(_member_mask(other_endpoints(sk, node), frozenset(community)).mean())
    value = deg.value * frac
    bound = math.sqrt(1.0 / (frac * sk.m)) if frac > 0 else math.inf
    return Estimate(value, bound, sk.m, deg.warning)


def random_neighbor(sk, node, rng):
    """Neighbour reached through a uniformly chosen sampled edge.

    ``rng`` is a caller-owned :class:`numpy.random.Generator`; sketch hashing
    and walk randomness stay independent.
    """
    _require_data(sk.s)
    k = int(rng.integers(sk.m))
    lo, hi = int(sk.f[k, 0]), int(sk.f[k, 1])
    return hi if lo == node else lo


def random_walk(store, start, length, rng):
    """Walk of ``length`` steps over sampled edges; returns visited nodes."""
    path = [start]
    node = start
    for _ in range(length):
        node = random_neighbor(store.sketch(node), node, rng)
        path.append(node)
    return path
