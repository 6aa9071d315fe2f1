"""Shared types for the machine model and the graph algorithms.

Holds the input containers (successor lists, edge graphs), the 48/64-bit
word packing used by the ranking kernels, the execution statistics that the
virtual machine fills in, the two sequential reference algorithms that every
parallel result is checked against, and the plain-text fixture formats.
"""

import enum
from dataclasses import dataclass, field

import numpy as np
from numba import njit


class InvalidListError(ValueError):
    pass


class InvalidGraphError(ValueError):
    pass


class PackingError(ValueError):
    pass


class CapabilityError(ValueError):
    """Raised when a configuration exceeds a hard capability limit."""


# ---------------------------------------------------------------------------
# word packing

class Packing(enum.Enum):
    """Node-record layout used by the random-splitter ranking kernels.

    P64 packs a 32-bit mark and a 32-bit rank into one 8-byte word that is
    read and written as a single memory operation.  P48 keeps a 16-bit mark
    and a 32-bit rank in two separate arrays (12 bytes of traffic per node
    per pass instead of 20) at the price of a 16,384-thread ceiling.
    """

    P48 = "p48"
    P64 = "p64"


MARK_BITS = {Packing.P48: 16, Packing.P64: 32}
RANK_BITS = 32

# Largest thread count the 16-bit-mark layout may be invoked with.
P48_MAX_THREADS = 16384


def pack(mark, rank, packing):
    """Combine a mark and a rank into one integer word."""
    bits = MARK_BITS[packing]
    if not 0 <= mark < (1 << bits):
        raise PackingError(f"mark {mark} does not fit in {bits} bits")
    if not 0 <= rank < (1 << RANK_BITS):
        raise PackingError(f"rank {rank} does not fit in {RANK_BITS} bits")
    return (int(mark) << RANK_BITS) | int(rank)


def unpack(word, packing):
    """Inverse of pack(); returns (mark, rank)."""
    bits = MARK_BITS[packing]
    word = int(word)
    if not 0 <= word < (1 << (bits + RANK_BITS)):
        raise PackingError(f"word {word} out of range for {packing.value}")
    return word >> RANK_BITS, word & ((1 << RANK_BITS) - 1)


# ---------------------------------------------------------------------------
# input containers

class SuccessorList:
    """A linked list stored as a successor array.

    Node indices are array positions.  The head always sits at index 0 and
    the tail points at itself (succ[tail] == tail), so a valid list over n
    nodes is a single chain from 0 that covers every index.
    """

    def __init__(self, succ):
        self.succ = np.ascontiguousarray(succ, dtype=np.int64)
        assert self.succ.ndim == 1 and self.succ.size > 0
        self.n = self.succ.shape[0]

    def __len__(self):
        return self.n

    def copy(self):
        return SuccessorList(self.succ.copy())


class EdgeGraph:
    """Undirected graph as a vertex count plus an (m, 2) edge array.

    Each undirected edge is stored once; algorithms that need both
    orientations build them explicitly.
    """

    def __init__(self, n, edges):
        self.n = int(n)
        e = np.asarray(edges, dtype=np.int64)
        if e.size == 0:
            e = np.empty((0, 2), dtype=np.int64)
        self.edges = np.ascontiguousarray(e.reshape(-1, 2))
        self.m = self.edges.shape[0]


@dataclass
class ListViolation:
    kind: str       # "out-of-range" | "no-tail" | "multiple-self-loops" | "unreachable"
    index: int

    def __str__(self):
        return f"{self.kind} at index {self.index}"


@njit(cache=True)
def _chain_positions(succ):
    """Walk the chain from index 0, returning (ok, bad_index, positions).

    positions[i] is the number of hops from the head to node i; -1 marks a
    node the walk never reached.  ok is False when the walk re-enters a
    visited node or stops before covering everything; bad_index then names
    the first unreached node.
    """
    n = succ.shape[0]
    pos = np.full(n, -1, np.int64)
    cur = 0
    for step in range(n):
        if pos[cur] >= 0:               # re-entered a visited node: not a chain
            break
        pos[cur] = step
        nxt = succ[cur]
        if nxt == cur:
            break
        cur = nxt
    for i in range(n):
        if pos[i] < 0:
            return False, i, pos
    return True, -1, pos


def validate_list(sl):
    """Check the successor-list invariants; return None or the first violation.

    Violations are reported in a fixed order: out-of-range index, tail
    count (no tail / multiple self-loops), then reachability.
    """
    succ = sl.succ
    n = sl.n
    bad = np.flatnonzero((succ < 0) | (succ >= n))
    if bad.size:
        return ListViolation("out-of-range", int(bad[0]))
    loops = np.flatnonzero(succ == np.arange(n))
    if loops.size == 0:
        return ListViolation("no-tail", -1)
    if loops.size > 1:
        return ListViolation("multiple-self-loops", int(loops[1]))
    ok, bad_index, _ = _chain_positions(succ)
    if not ok:
        return ListViolation("unreachable", int(bad_index))
    return None


def chain_positions(sl):
    """Hop count from the head for every node, validating on the way."""
    v = validate_list(sl)
    if v is not None:
        raise InvalidListError(str(v))
    _, _, pos = _chain_positions(sl.succ)
    return pos


def seq_rank(sl):
    """Sequential list ranking: rank = number of links to the tail.

    The tail gets 0 and the head n-1; ranks are a permutation of 0..n-1.
    This is the oracle the parallel implementations are verified against.
    """
    pos = chain_positions(sl)
    return (sl.n - 1) - pos


def list_to_graph(sl):
    """View a successor list as a path graph (the tail self-loop dropped)."""
    i = np.arange(sl.n, dtype=np.int64)
    keep = sl.succ != i
    return EdgeGraph(sl.n, np.column_stack([i[keep], sl.succ[keep]]))


def validate_graph(g):
    if g.n <= 0:
        raise InvalidGraphError("graph needs at least one vertex")
    if g.m:
        e = g.edges
        bad = np.flatnonzero((e < 0) | (e >= g.n))
        if bad.size:
            raise InvalidGraphError(f"edge endpoint out of range at row {bad[0] // 2}")
        self_loops = np.flatnonzero(e[:, 0] == e[:, 1])
        if self_loops.size:
            raise InvalidGraphError(f"self-loop at edge {self_loops[0]}")


@njit(cache=True)
def _uf_min_labels(n, edges):
    parent = np.arange(n)
    for k in range(edges.shape[0]):
        a = edges[k, 0]
        b = edges[k, 1]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a < b:
            parent[b] = a
        elif b < a:
            parent[a] = b
    label = np.empty(n, np.int64)
    for i in range(n):
        r = i
        while parent[r] != r:
            r = parent[r]
        label[i] = r
        # path compression for the nodes walked over
        j = i
        while parent[j] != r:
            nxt = parent[j]
            parent[j] = r
            j = nxt
    return label


def seq_components(g):
    """Sequential connected components via union-find.

    Returns one label per vertex, canonicalized to the smallest vertex
    index in each component (unioning always keeps the smaller root, so the
    find root is already the component minimum).
    """
    validate_graph(g)
    return _uf_min_labels(g.n, g.edges)


def canonical_labels(labels):
    """Relabel an arbitrary component labelling to min-vertex-per-component."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    smallest = np.full(n, n, dtype=np.int64)
    np.minimum.at(smallest, labels, np.arange(n))
    return smallest[labels]


def compare_arrays(expected, got):
    """Index of the first mismatch between two arrays, or -1 if equal."""
    expected = np.asarray(expected)
    got = np.asarray(got)
    if expected.shape != got.shape:
        return 0
    neq = np.flatnonzero(expected != got)
    return int(neq[0]) if neq.size else -1


# ---------------------------------------------------------------------------
# execution statistics

@dataclass
class KernelCounters:
    """Counters for one kernel launch (or an aggregate of launches)."""
    launches: int = 0
    reads: int = 0
    writes: int = 0
    payload_bytes: int = 0     # sum of access sizes, independent of coalescing
    transactions: int = 0      # memory transactions (simulated full accounting)
    bytes_moved: int = 0       # sum of transaction sizes
    divergence_events: int = 0
    syncs: int = 0             # in-kernel block barriers
    items: int = 0             # work items processed
    steps: int = 0             # lock-step vector steps
    array_bytes: dict = field(default_factory=dict)   # per-array payload bytes

    def add(self, other):
        self.launches += other.launches
        self.reads += other.reads
        self.writes += other.writes
        self.payload_bytes += other.payload_bytes
        self.transactions += other.transactions
        self.bytes_moved += other.bytes_moved
        self.divergence_events += other.divergence_events
        self.syncs += other.syncs
        self.items += other.items
        self.steps += other.steps
        for k, v in other.array_bytes.items():
            self.array_bytes[k] = self.array_bytes.get(k, 0) + v


@dataclass
class LaunchRecord:
    kernel: str
    counters: KernelCounters
    round: int = 0
    blocks: int = 1


# Number of multiprocessors the simulated device schedules blocks onto
# (27 SMs of 8 scalar cores, as on the device the model is calibrated to).
SM_COUNT = 27
CORES_PER_SM = 8


class ExecStats:
    """Everything one algorithm run did, kept per kernel launch.

    Totals and per-kernel aggregates are derived from the launch log, so
    the per-kernel counters always sum to the totals by construction.
    """

    def __init__(self, backend="simulated"):
        self.backend = backend
        self.launch_log = []        # LaunchRecord, in launch order
        self.barriers = 0           # barriers between consecutive kernels
        self.rounds = 0             # algorithm-level rounds (set by the algorithm)
        self.wall_time = None       # seconds; threaded backend only
        self.warnings = []
        self.meta = {}

    @property
    def kernel_launches(self):
        return sum(rec.counters.launches for rec in self.launch_log)

    def per_kernel(self):
        out = {}
        for rec in self.launch_log:
            out.setdefault(rec.kernel, KernelCounters()).add(rec.counters)
        return out

    def totals(self):
        t = KernelCounters()
        for rec in self.launch_log:
            t.add(rec.counters)
        return t

    @property
    def global_reads(self):
        return self.totals().reads

    @property
    def global_writes(self):
        return self.totals().writes

    @property
    def transactions(self):
        return self.totals().transactions

    @property
    def bytes_moved(self):
        return self.totals().bytes_moved

    @property
    def divergence_events(self):
        return self.totals().divergence_events

    def sm_steps(self, sm_count=SM_COUNT):
        """Scheduling proxy: lock-step steps serialized over the simulated SMs.

        Each launch keeps every block busy for its step count; blocks beyond
        the SM count queue up, so adding blocks past it stops helping.
        """
        total = 0
        for rec in self.launch_log:
            waves = -(-rec.blocks // sm_count)
            total += rec.counters.steps * waves
        return total

    def merge_from(self, other):
        self.launch_log.extend(other.launch_log)
        self.barriers += other.barriers
        self.warnings.extend(other.warnings)
        self.meta.update(other.meta)

    def csv_rows(self, run_id):
        """Per-kernel rows plus a total row, matching the bench CSV schema."""
        rows = []
        wall = "" if self.wall_time is None else f"{self.wall_time:.6f}"
        for name, c in sorted(self.per_kernel().items()):
            rows.append({
                "run_id": run_id, "kernel": name, "launches": c.launches,
                "reads": c.reads, "writes": c.writes,
                "transactions": c.transactions, "bytes": c.bytes_moved,
                "divergence": c.divergence_events, "wall_time": "",
            })
        t = self.totals()
        rows.append({
            "run_id": run_id, "kernel": "total", "launches": t.launches,
            "reads": t.reads, "writes": t.writes,
            "transactions": t.transactions, "bytes": t.bytes_moved,
            "divergence": t.divergence_events, "wall_time": wall,
        })
        return rows


# ---------------------------------------------------------------------------
# text fixture formats

def save_list(sl, path):
    """Write a successor list: first line n, then one successor per line."""
    with open(path, "w") as f:
        f.write(f"{sl.n}\n")
        np.savetxt(f, sl.succ, fmt="%d")


def load_list(path):
    with open(path) as f:
        n = int(f.readline())
        succ = np.loadtxt(f, dtype=np.int64, ndmin=1)
    if succ.shape[0] != n:
        raise InvalidListError(f"expected {n} successors, file has {succ.shape[0]}")
    return SuccessorList(succ)


def save_graph(g, path):
    """Write a graph: first line "n m", then one "u v" line per edge."""
    with open(path, "w") as f:
        f.write(f"{g.n} {g.m}\n")
        np.savetxt(f, g.edges, fmt="%d")


def load_graph(path):
    with open(path) as f:
        first = f.readline().split()
        n, m = int(first[0]), int(first[1])
        if m:
            edges = np.loadtxt(f, dtype=np.int64, ndmin=2)
        else:
            edges = np.empty((0, 2), dtype=np.int64)
    if edges.shape[0] != m:
        raise InvalidGraphError(f"expected {m} edges, file has {edges.shape[0]}")
    return EdgeGraph(n, edges)
