"""Input validation shared by the estimator wrappers."""

import numpy as np
from sklearn.utils.validation import check_array

from edgesketch.exceptions import (
    InvalidWeightError,
    ReservedIdError,
    UnsupportedConfigurationError,
)
from edgesketch.sketch import SketchStore


def check_edges(X):
    """Return an (E, 4) float array ``u, v, w, tag`` from 2 to 4 columns.

    Missing weights default to 1 and missing tags to 0.
    """
    X = check_array(X, dtype=np.float64, ensure_min_samples=0)
    if X.shape[1] not in (2, 3, 4):
        raise ValueError(f"edge arrays need 2 to 4 columns, got {X.shape[1]}")
    out = np.zeros((X.shape[0], 4))
    out[:, 2] = 1.0
    out[:, : X.shape[1]] = X
    ids = out[:, :2]
    if np.any(ids != np.floor(ids)):
        raise ValueError("node ids must be integers")
    if np.any(ids < 1):
        raise ReservedIdError("node ids must be positive; 0 is reserved")
    if np.any(~(out[:, 2] > 0)):
        raise InvalidWeightError("edge weights must be positive")
    return out


def check_nodes(nodes):
    nodes = np.asarray(nodes).ravel()
    fractional = nodes.size and not np.issubdtype(nodes.dtype, np.integer) and np.any(nodes != np.floor(nodes))
    if fractional:
        raise ValueError("node ids must be integers")
    return nodes.astype(np.int64)


def check_pairs(pairs):
    pairs = check_array(pairs, dtype=np.int64, ensure_min_samples=0)
    if pairs.shape[1] != 2:
        raise ValueError(f"pairs need exactly 2 columns, got {pairs.shape[1]}")
    return pairs


def check_store(store, undirected=False):
    if not isinstance(store, SketchStore):
        raise TypeError(f"expected a SketchStore, got {type(store).__name__}")
    if undirected and store.directed:
        raise UnsupportedConfigurationError("this operation needs an undirected store")
    return store
