"""Compiled hot paths: hashing, position draws and the sketch update loop.

Everything here operates on plain numpy arrays so it can be jitted with
numba in nopython mode. Public wrappers with argument checking live in
:mod:`edgesketch.core`.
"""

import numpy as np
from numba import njit

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S32 = np.uint64(32)
_S12 = np.uint64(12)

# Domain separation keys for the two independent streams derived per edge.
VALUE_DOMAIN = np.uint64(0x243F6A8885A308D3)
POSITION_DOMAIN = np.uint64(0x13198A2E03707344)

_TWO_M52 = 2.0 ** -52


@njit(cache=True, nogil=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def hash_words(key, w0, w1, w2, w3):
    """Keyed 64-bit hash of four 64-bit words (a sponge over splitmix64)."""
    h = mix64(key + _GOLDEN)
    h = mix64((h ^ w0) + _GOLDEN)
    h = mix64((h ^ w1) + _GOLDEN)
    h = mix64((h ^ w2) + _GOLDEN)
    h = mix64((h ^ w3) + _GOLDEN)
    return h


@njit(cache=True, nogil=True)
def unit_from_hash(h):
    # 52 high bits centred in their bucket: strictly inside (0, 1).
    return (np.float64(h >> _S12) + 0.5) * _TWO_M52


@njit(cache=True, nogil=True)
def unit_value(salt, lo, hi, tag, k):
    return unit_from_hash(hash_words(salt ^ VALUE_DOMAIN, lo, hi, tag, np.uint64(k)))


@njit(cache=True, nogil=True)
def unit_values(salt, lo, hi, tag, k):
    out = np.empty(lo.shape[0])
    for i in range(lo.shape[0]):
        out[i] = unit_value(salt, lo[i], hi[i], tag[i], k[i])
    return out


@njit(cache=True, nogil=True)
def bounded_draw(salt, lo, hi, tag, k, n):
    """Integer in [0, n) from the position stream of step ``k``."""
    h = hash_words(salt ^ POSITION_DOMAIN, lo, hi, tag, np.uint64(k))
    return np.int64(((h >> _S32) * np.uint64(n)) >> _S32)


@njit(cache=True, nogil=True)
def exp_value(u, rate):
    return -np.log(u) / rate


@njit(cache=True, nogil=True)
def order_stat_step(prev_sum, e, k, m):
    return prev_sum + e / (m - k + 1)


@njit(cache=True, nogil=True)
def update_row(s, f, max_cache, lo, hi, tag, rate, salt, perm, draws, early_break):
    """Apply one edge to a single sketch row in place.

    ``perm`` must hold the identity permutation on entry and is restored
    before returning; ``draws`` is scratch space of length m.

    Returns:
        (new max_cache, touched, steps taken)
    """
    m = s.shape[0]
    total = 0.0
    update_max = False
    touched = False
    steps = 0
    for k in range(1, m + 1):
        u = unit_value(salt, lo, hi, tag, k)
        total = order_stat_step(total, exp_value(u, rate), k, m)
        if early_break and total >= max_cache:
            break
        r = k - 1 + bounded_draw(salt, lo, hi, tag, k, m - k + 1)
        draws[k - 1] = r
        tmp = perm[k - 1]
        perm[k - 1] = perm[r]
        perm[r] = tmp
        steps = k
        pos = perm[k - 1]
        if total < s[pos]:
            if s[pos] == max_cache:
                update_max = True
            s[pos] = total
            f[pos, 0] = lo
            f[pos, 1] = hi
            f[pos, 2] = tag
            touched = True
    for k in range(steps - 1, -1, -1):
        r = draws[k]
        tmp = perm[k]
        perm[k] = perm[r]
        perm[r] = tmp
    if update_max:
        max_cache = s.max()
    return max_cache, touched, steps


@njit(cache=True, nogil=True)
def ingest_rows(S, F, MAX, rows, lo, hi, tag, rate, salt):
    """Sequentially apply edge ``i`` to sketch row ``rows[i]``.

    Returns the number of edges that modified their target row.
    """
    m = S.shape[1]
    perm = np.arange(m)
    draws = np.empty(m, dtype=np.int64)
    n_touched = 0
    for i in range(rows.shape[0]):
        row = rows[i]
        new_max, touched, _ = update_row(
            S[row], F[row], MAX[row], lo[i], hi[i], tag[i], rate[i], salt, perm, draws, True
        )
        MAX[row] = new_max
        if touched:
            n_touched += 1
    return n_touched
