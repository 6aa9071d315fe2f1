"""Reproducible input generators built on the KISS pseudorandom generator.

The generator is Marsaglia's 64-bit KISS: a multiply-with-carry, an
xorshift and a linear congruential sequence added together, period about
2^250.  Everything here is a pure function of (parameters, seed), so any
fixture can be regenerated bit-identically from its seed.
"""

from collections import namedtuple

import numpy as np
from numba import njit

from .core import EdgeGraph, SuccessorList

MASK64 = (1 << 64) - 1

# Marsaglia's published starting state for the 64-bit generator.
DEFAULT_X = 1234567890987654321
DEFAULT_Y = 362436362436362436
DEFAULT_Z = 1066149217761810
DEFAULT_C = 123456123456123456


KissState = namedtuple("KissState", ["x", "y", "z", "c"])

DEFAULT_STATE = KissState(DEFAULT_X, DEFAULT_Y, DEFAULT_Z, DEFAULT_C)


def kiss_next(state):
    """One step of the KISS recurrence: returns (value, new state).

    Plain-integer reference implementation; the batch path below must agree
    with it word for word.
    """
    x, y, z, c = state
    # multiply-with-carry
    t = ((x << 58) + c) & MASK64
    c = x >> 6
    x = (x + t) & MASK64
    c += x < t
    # xorshift
    y ^= (y << 13) & MASK64
    y ^= y >> 17
    y ^= (y << 43) & MASK64
    # congruential
    z = (6906969069 * z + 1234567) & MASK64
    return (x + y + z) & MASK64, KissState(x, y, z, c)


@njit(cache=True)
def _kiss_batch(x, y, z, c, out):
    for i in range(out.shape[0]):
        t = (x << np.uint64(58)) + c
        c = x >> np.uint64(6)
        x = x + t
        if x < t:
            c = c + np.uint64(1)
        y ^= y << np.uint64(13)
        y ^= y >> np.uint64(17)
        y ^= y << np.uint64(43)
        z = np.uint64(6906969069) * z + np.uint64(1234567)
        out[i] = x + y + z
    return x, y, z, c


def kiss_batch(state, n):
    """Draw n values at once; returns (uint64 array, new state)."""
    out = np.empty(n, dtype=np.uint64)
    x, y, z, c = _kiss_batch(np.uint64(state.x), np.uint64(state.y),
                             np.uint64(state.z), np.uint64(state.c), out)
    return out, KissState(int(x), int(y), int(z), int(c))


def _splitmix64(s):
    s = (s + 0x9E3779B97F4A7C15) & MASK64
    z = s
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return s, z ^ (z >> 31)


def kiss_seed(seed):
    """Expand one integer seed into a full KissState.

    A forbidden all-zero component would make its sub-recurrence stick, so
    such states are deterministically replaced with the published defaults.
    """
    s = seed & MASK64
    s, x = _splitmix64(s)
    s, y = _splitmix64(s)
    s, z = _splitmix64(s)
    s, c = _splitmix64(s)
    c &= (1 << 58) - 1          # keep the carry inside the MWC range
    if y == 0:
        y = DEFAULT_Y           # xorshift must not start at zero
    if x == 0 and c == 0:
        x = DEFAULT_X           # ... nor the MWC pair
    return KissState(x, y, z, c)


def kiss_split(seed, stream):
    """Independent state for (seed, stream) pairs, e.g. per-thread streams."""
    return kiss_seed((seed ^ ((stream + 1) * 0xD1B54A32D192ED03)) & MASK64)


# ---------------------------------------------------------------------------
# input generators

def gen_list(n, seed=0):
    """Uniformly shuffled chain over n nodes.

    Head at index 0, tail self-looped; the memory order of the interior
    nodes is a uniform permutation (random sort keys, one KISS draw each).
    """
    assert n >= 1
    succ = np.empty(n, dtype=np.int64)
    if n == 1:
        succ[0] = 0
        return SuccessorList(succ)
    keys, _ = kiss_batch(kiss_seed(seed), n - 1)
    order = np.empty(n, dtype=np.int64)
    order[0] = 0
    order[1:] = 1 + np.argsort(keys, kind="stable")
    succ[order[:-1]] = order[1:]
    succ[order[-1]] = order[-1]
    return SuccessorList(succ)


TREE_SIZE_TARGET = 10_000       # one tree per this many vertices


@njit(cache=True)
def _build_forest(n, t, k, draws, edges):
    base = n // t
    rem = n - base * t
    slots = np.empty(base + 2, np.int64)
    child_count = np.empty(base + 2, np.int64)
    offset = 0
    e = 0
    for ti in range(t):
        size = base + (1 if ti < rem else 0)
        for j in range(size):
            child_count[j] = 0
        slots[0] = 0
        nslots = 1
        for j in range(1, size):
            idx = np.int64(draws[offset + j] % np.uint64(nslots))
            p = slots[idx]
            edges[e, 0] = offset + p
            edges[e, 1] = offset + j
            e += 1
            child_count[p] += 1
            if child_count[p] == k:
                slots[idx] = slots[nslots - 1]   # parent is full, retire its slot
                nslots -= 1
            slots[nslots] = j
            nslots += 1
        offset += size


def gen_tree_graph(n, k, seed=0):
    """Forest of random trees where no vertex gets more than k children.

    Each new vertex attaches to a uniformly chosen vertex that still has
    a free child slot; k=1 therefore degenerates to a collection of paths.
    Tree count is max(1, n // 10^4), sizes as even as possible.
    """
    assert n >= 1 and k >= 1
    t = max(1, n // TREE_SIZE_TARGET)
    draws, state = kiss_batch(kiss_seed(seed), n)
    edges = np.empty((n - t, 2), dtype=np.int64)
    _build_forest(n, t, k, draws, edges)
    # attachment order alone would label every parent below its children,
    # which is a heavily biased labeling; scramble ids the same way the
    # list generator scrambles its chains so the trees are random over
    # the whole vertex set (k=1 then really is the list-graph case)
    keys, _ = kiss_batch(state, n)
    perm = np.argsort(keys, kind="stable")
    return EdgeGraph(n, perm[edges])


def gen_random_graph(n, d, seed=0):
    """m = round(d * n(n-1)/2) distinct undirected non-loop edges.

    Rejection sampling in batches: draw endpoint pairs, drop loops and
    repeats (keeping first occurrences in draw order), top up until m
    distinct edges exist.  Output rows are sorted (u < v).
    """
    assert n >= 1
    if not 0 < d <= 1:
        raise ValueError(f"density must be in (0, 1], got {d}")
    capacity = n * (n - 1) // 2
    m = int(round(d * capacity))
    if m > capacity:
        raise ValueError(f"density {d} asks for {m} edges but only {capacity} exist")
    state = kiss_seed(seed)
    un = np.uint64(n)
    seen = np.empty(0, dtype=np.uint64)
    while seen.size < m:
        need = m - seen.size
        draws, state = kiss_batch(state, 2 * (need + need // 4 + 16))
        u = draws[0::2] % un
        v = draws[1::2] % un
        ok = u != v
        u, v = u[ok], v[ok]
        lo = np.minimum(u, v)
        hi = np.maximum(u, v)
        keys = lo * un + hi
        # dedup within the batch, preserving draw order
        _, first = np.unique(keys, return_index=True)
        keys = keys[np.sort(first)]
        keys = keys[~np.isin(keys, seen)]
        seen = np.concatenate([seen, keys[:need]])
    keys = np.sort(seen)
    edges = np.stack([(keys // un).astype(np.int64),
                      (keys % un).astype(np.int64)], axis=1)
    return EdgeGraph(n, edges)
