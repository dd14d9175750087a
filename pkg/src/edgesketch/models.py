"""scikit-learn style wrappers around the sketch store and its analyses.

``X`` is always an edge array with columns ``u, v[, w[, tag]]`` or an
already built :class:`SketchStore`.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from edgesketch import community, reconstruction
from edgesketch.estimators import degree_estimates
from edgesketch.sketch import SketchStore, ingest_stream
from edgesketch.validation import check_edges, check_nodes, check_pairs, check_store


class EdgeSketcher(TransformerMixin, BaseEstimator):
    """Builds a sketch store from edges; ``transform`` returns node minima."""

    def __init__(self, m=64, salt=0, mode="undirected", parallel_edges=False):
        self.m = m
        self.salt = salt
        self.mode = mode
        self.parallel_edges = parallel_edges

    def fit(self, X, y=None):
        self.store_ = SketchStore(self.m, self.salt, self.mode, self.parallel_edges)
        return self.partial_fit(X)

    def partial_fit(self, X, y=None):
        if not hasattr(self, "store_"):
            self.store_ = SketchStore(self.m, self.salt, self.mode, self.parallel_edges)
        ingest_stream(self.store_, check_edges(X))
        self.n_nodes_ = len(self.store_)
        return self

    def transform(self, X):
        """Rows of exponential minima for the node ids in ``X``."""
        check_is_fitted(self, "store_")
        rows = self.store_.rows(check_nodes(X).tolist())
        return self.store_.S[rows].copy()

    def degrees(self, nodes=None):
        check_is_fitted(self, "store_")
        deg = degree_estimates(self.store_)
        if nodes is None:
            return dict(zip(self.store_.node_ids.tolist(), deg.tolist()))
        return deg[self.store_.rows(check_nodes(nodes).tolist())]


def _as_store(X, m, salt):
    if isinstance(X, SketchStore):
        return check_store(X)
    store = SketchStore(m, salt)
    ingest_stream(store, check_edges(X))
    return store


class SketchLouvain(ClusterMixin, BaseEstimator):
    """Louvain communities computed from sketches only.

    After ``fit``: ``labels_`` aligned with ``nodes_`` (sorted node ids),
    ``partition_`` and ``modularity_`` (the sketch estimate).
    """

    def __init__(self, m=128, salt=0, seed=0, split_half=False, max_levels=20, sweep_cap=100):
        self.m = m
        self.salt = salt
        self.seed = seed
        self.split_half = split_half
        self.max_levels = max_levels
        self.sweep_cap = sweep_cap

    def fit(self, X, y=None):
        store = _as_store(X, self.m, self.salt)
        check_store(store, undirected=True)
        config = community.LouvainConfig(self.max_levels, self.sweep_cap, self.seed)
        if self.split_half:
            partition, estimate = community.split_half_modularity(store, config)
        else:
            partition, estimate = community.louvain(store, config)
        self.store_ = store
        self.partition_ = partition
        self.modularity_ = estimate.value
        self.nodes_ = np.array(sorted(partition.assignment), dtype=np.int64)
        self.labels_ = np.array([partition.assignment[v] for v in self.nodes_.tolist()])
        return self

    def predict(self, X):
        """Community of each node id in ``X``."""
        check_is_fitted(self, "partition_")
        return np.array([self.partition_.assignment[v] for v in check_nodes(X).tolist()])


class SketchLinkPredictor(BaseEstimator):
    """Ranks node pairs by multi-hop sketch similarity."""

    def __init__(self, m=64, salt=0, k=4, alpha=0.2, policy="khop"):
        self.m = m
        self.salt = salt
        self.k = k
        self.alpha = alpha
        self.policy = policy

    def fit(self, X, y=None):
        self.store_ = _as_store(X, self.m, self.salt)
        self.ranking_ = reconstruction.score_pairs(self.store_, self.k, self.alpha, self.policy)
        self.scores_ = {(p.u, p.v): p.score for p in self.ranking_}
        return self

    def predict(self, X):
        """Score of each pair in ``X``; pairs never ranked score 0."""
        check_is_fitted(self, "scores_")
        pairs = check_pairs(X)
        lo, hi = np.minimum(pairs[:, 0], pairs[:, 1]), np.maximum(pairs[:, 0], pairs[:, 1])
        return np.array([self.scores_.get((a, b), 0.0) for a, b in zip(lo.tolist(), hi.tolist())])

    def top(self, t):
        check_is_fitted(self, "ranking_")
        return [(p.u, p.v) for p in self.ranking_[:t]]

    def score(self, X, y=None, t=None):
        """Precision of the top ``t`` pairs (default ``|X|``) against true edges ``X``."""
        check_is_fitted(self, "ranking_")
        truth = reconstruction.truth_set(check_edges(X)[:, :2].astype(np.int64))
        return reconstruction.precision_at(self.ranking_, truth, t or len(truth)).value
