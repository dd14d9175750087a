"""Hashing, exponential transforms and the shared sketch update kernel.

The functions here are thin, checked wrappers around the compiled routines
in :mod:`edgesketch._kernel`. Both the fast streaming path and any slow
reference computation go through the same scalar primitives, so results are
bit-identical between them.
"""

import math
import struct

import numpy as np

from edgesketch import _kernel
from edgesketch.exceptions import ContractViolationError, InvalidWeightError

_SEED_FORMAT = "<4Q"
SEED_SIZE = struct.calcsize(_SEED_FORMAT)
MASK64 = (1 << 64) - 1


def encode_seed(lo, hi, tag=0, position=0):
    """Canonical byte encoding of a (lo, hi, tag, position) tuple.

    Fixed-width little-endian words, so the encoding is injective.
    """
    return struct.pack(_SEED_FORMAT, lo, hi, tag, position)


def decode_seed(seed):
    if len(seed) != SEED_SIZE:
        raise ValueError(f"hash seed must be {SEED_SIZE} bytes, got {len(seed)}")
    return struct.unpack(_SEED_FORMAT, seed)


def hash_unit(seed, salt=0):
    """Map a hash seed to a uniform value strictly inside (0, 1).

    Args:
        seed: bytes from :func:`encode_seed`.
        salt: 64-bit key selecting an independent hash family.
    """
    lo, hi, tag, pos = decode_seed(seed)
    return float(
        _kernel.unit_value(
            np.uint64(salt & MASK64), np.uint64(lo), np.uint64(hi), np.uint64(tag), np.uint64(pos)
        )
    )


def hash_units(lo, hi, tag, position, salt=0):
    """Vectorised :func:`hash_unit` over arrays of seed words."""
    cast = lambda a: np.ascontiguousarray(a, dtype=np.uint64)
    lo, hi, tag = cast(lo), cast(hi), cast(tag)
    position = np.ascontiguousarray(position, dtype=np.int64)
    return _kernel.unit_values(np.uint64(salt & MASK64), lo, hi, tag, position)


def check_rate(rate):
    rate = float(rate)
    if not (rate > 0.0 and math.isfinite(rate)):
        raise InvalidWeightError(f"weight must be a finite positive number, got {rate!r}")
    return rate


def exp_draw(u, rate):
    """Inverse-CDF exponential variate ``-ln(u) / rate``."""
    return float(_kernel.exp_value(float(u), check_rate(rate)))


def next_order_stat(prev_sum, e, k, m):
    """Advance the running order statistic by one exponential spacing.

    Returns ``prev_sum + e / (m - k + 1)``; ``k`` is 1-based.
    """
    if not 1 <= k <= m:
        raise IndexError(f"order statistic index {k} outside 1..{m}")
    return float(_kernel.order_stat_step(float(prev_sum), float(e), k, m))


class LazyPermutation:
    """Lazily materialised Fisher-Yates shuffle of positions ``1..m``.

    Only swapped entries are stored, so consuming ``k`` positions costs
    O(k) time and memory regardless of ``m``.

    >>> perm = LazyPermutation(1, lo=1, hi=2)
    >>> perm.next_position(1)
    1
    """

    def __init__(self, m, lo, hi, tag=0, salt=0):
        self.m = m
        self.cursor = 0
        self._key = (np.uint64(salt & MASK64), np.uint64(lo), np.uint64(hi), np.uint64(tag))
        self._swapped = {}

    def next_position(self, k):
        """Return the 1-based position settled at step ``k``."""
        if k != self.cursor + 1:
            raise ContractViolationError(
                f"positions must be consumed in order: expected {self.cursor + 1}, got {k}"
            )
        if k > self.m:
            raise IndexError(f"permutation of size {self.m} exhausted")
        salt, lo, hi, tag = self._key
        r = k - 1 + int(_kernel.bounded_draw(salt, lo, hi, tag, k, self.m - k + 1))
        a = self._swapped.get(k - 1, k - 1)
        b = self._swapped.get(r, r)
        self._swapped[k - 1] = b
        self._swapped[r] = a
        self.cursor = k
        return b + 1

    @property
    def settled(self):
        return [self._swapped.get(i, i) + 1 for i in range(self.cursor)]


def permuted_position(perm, k):
    return perm.next_position(k)


def kernel_update(s, f, max_cache, edge, rate, salt=0, early_break=True):
    """Apply one edge to a sketch in place.

    Args:
        s: float64 array of m exponential minima (``inf`` when empty).
        f: uint64 array of shape (m, 3) holding sampled ``(lo, hi, tag)`` keys.
        max_cache: current ``max(s)``.
        edge: canonical ``(lo, hi, tag)`` identity.
        rate: positive edge weight.
        salt: hash key.
        early_break: stop once the running order statistic reaches
            ``max_cache``. Disabling it never changes the result.

    Returns:
        ``(s, f, max_cache, touched)`` where ``s`` and ``f`` are the same
        (mutated) arrays.
    """
    rate = check_rate(rate)
    lo, hi, tag = edge
    m = s.shape[0]
    perm = np.arange(m)
    draws = np.empty(m, dtype=np.int64)
    new_max, touched, _ = _kernel.update_row(
        s,
        f,
        float(max_cache),
        np.uint64(lo),
        np.uint64(hi),
        np.uint64(tag),
        rate,
        np.uint64(salt & MASK64),
        perm,
        draws,
        early_break,
    )
    return s, f, float(new_max), bool(touched)
