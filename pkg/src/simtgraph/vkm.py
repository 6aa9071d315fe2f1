"""Virtual kernel machine: a deterministic model of SIMT kernel execution.

Algorithms are expressed as sequences of kernels with an implicit global
barrier between consecutive launches.  Within a kernel, virtual threads
("lanes") run in lockstep over vectorized steps; the machine accounts
global-memory traffic the way the modeled hardware coalesces it: accesses
of a half-warp (16 consecutive lanes) that fall into one aligned segment
merge into a single memory transaction.

Two backends share every kernel body:

* simulated -- single OS thread, full determinism, optional per-half-warp
  transaction and warp-divergence accounting plus a read-after-write race
  detector ("full" accounting) or cheap fused read/write counting
  ("counts" accounting).
* threaded  -- real worker threads over lane slices with a barrier between
  kernels, producing bit-identical arrays and identical read/write counts,
  plus wall-clock time.  No transaction model.

Concurrent writes to the same location must go through arb_write, which
buffers all attempts and commits one winner per location at the kernel-end
barrier, chosen by a seeded hash so both backends agree bit for bit.
"""

import os
import threading
import time
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import (
    SM_COUNT, CORES_PER_SM, CapabilityError, ExecStats, KernelCounters,
    LaunchRecord,
)

WARP_SIZE = 32
HALF_WARP = 16
MAX_BLOCK_SIZE = 768

# access size -> (minimum transaction size, segment size), in bytes
SEGMENT_TABLE = {1: (16, 32), 2: (32, 64), 4: (64, 128), 8: (64, 128)}

# default thread count: a small factor times the simulated core count
DEFAULT_P = 4 * SM_COUNT * CORES_PER_SM


class MachineError(RuntimeError):
    pass


class RaceError(MachineError):
    """A kernel read a location another lane wrote in the same kernel."""


class GridConfig:
    def __init__(self, p, block_size=256):
        if p < 1:
            raise ValueError("need at least one thread")
        if not 1 <= block_size <= MAX_BLOCK_SIZE:
            raise ValueError(f"block size must be in [1, {MAX_BLOCK_SIZE}]")
        self.p = int(p)
        self.block_size = int(block_size)
        self.blocks = -(-self.p // self.block_size)
        self.warp_size = WARP_SIZE
        self.half_warp = HALF_WARP


@dataclass
class MemoryAccess:
    thread: int
    address: int
    size: int
    kind: str           # "read" | "write"

    def __post_init__(self):
        if self.size not in SEGMENT_TABLE:
            raise ValueError(f"unsupported access size {self.size}")
        if self.address < 0:
            raise ValueError("negative address")


def count_transactions(accesses):
    """Coalesce one half-warp's accesses; returns (transactions, bytes moved).

    All accesses must share kind and size, at most 16 of them.  One
    transaction is issued per touched aligned segment; when every access
    fits a single aligned window of the minimum transaction size, the
    transaction shrinks to that minimum.
    """
    accesses = list(accesses)
    if not accesses:
        return 0, 0
    if len(accesses) > HALF_WARP:
        raise ValueError("more than one half-warp of accesses")
    if len({a.kind for a in accesses}) > 1 or len({a.size for a in accesses}) > 1:
        raise ValueError("mixed kinds or sizes cannot coalesce")
    size = accesses[0].size
    min_size, seg_size = SEGMENT_TABLE[size]
    lo = min(a.address for a in accesses) // min_size
    hi = max(a.address + size - 1 for a in accesses) // min_size
    if lo == hi:
        return 1, min_size
    segs = set()
    for a in accesses:
        segs.update(range(a.address // seg_size, (a.address + size - 1) // seg_size + 1))
    return len(segs), len(segs) * seg_size


@njit(cache=True)
def _txn_halfwarps(lanes, addr, size, min_size, seg_size):
    """Transaction count/bytes for one lockstep access, grouped by half-warp.

    lanes must be ascending; each half-warp contributes at most 16 accesses.
    """
    n = lanes.shape[0]
    txns = 0
    bts = 0
    segbuf = np.empty(32, np.int64)
    i = 0
    while i < n:
        hw = lanes[i] // 16
        j = i
        lo = addr[i] // min_size
        hi = lo
        while j < n and lanes[j] // 16 == hw:
            w0 = addr[j] // min_size
            w1 = (addr[j] + size - 1) // min_size
            if w0 < lo:
                lo = w0
            if w1 > hi:
                hi = w1
            j += 1
        if lo == hi:
            txns += 1
            bts += min_size
        else:
            nseg = 0
            for k in range(i, j):
                s0 = addr[k] // seg_size
                s1 = (addr[k] + size - 1) // seg_size
                for s in range(s0, s1 + 1):
                    seen = False
                    for q in range(nseg):
                        if segbuf[q] == s:
                            seen = True
                            break
                    if not seen:
                        segbuf[nseg] = s
                        nseg += 1
            txns += nseg
            bts += nseg * seg_size
        i = j
    return txns, bts


# ---------------------------------------------------------------------------
# access patterns

def stride_indices(i, p, N):
    """Items of thread i under striding: i, i+p, i+2p, ... below N."""
    if not 0 <= i < p:
        raise ValueError(f"thread index {i} outside [0, {p})")
    return np.arange(i, N, p, dtype=np.int64)


def partition_indices(i, p, N):
    """Items of thread i under contiguous partitioning (chunks of ceil(N/p))."""
    if not 0 <= i < p:
        raise ValueError(f"thread index {i} outside [0, {p})")
    chunk = -(-N // p)
    return np.arange(i * chunk, min((i + 1) * chunk, N), dtype=np.int64)


# ---------------------------------------------------------------------------
# arbitrary concurrent writes

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_K_IDX = np.uint64(0x9E3779B97F4A7C15)
_K_VAL = np.uint64(0xC2B2AE3D27D4EB4F)
_K_LANE = np.uint64(0x165667B19E3779F9)


def _mix_u64(v):
    """Vectorized 64-bit finalizer; wraps on overflow by construction."""
    with np.errstate(over="ignore"):
        v = np.asarray(v, dtype=np.uint64)
        v = (v ^ (v >> np.uint64(30))) * _M1
        v = (v ^ (v >> np.uint64(27))) * _M2
        return v ^ (v >> np.uint64(31))


def _arb_keys(salt, idx, val, lane):
    with np.errstate(over="ignore"):
        h = (np.uint64(salt)
             + idx.astype(np.uint64) * _K_IDX
             + val.astype(np.uint64) * _K_VAL
             + lane.astype(np.uint64) * _K_LANE)
    return _mix_u64(h)


class ArbitraryCell:
    """A memory cell with arbitrary-order concurrent-write semantics.

    Writes during a kernel step pile up in `pending`; commit picks one of
    them.  Which one is unspecified by the contract, but the choice is a
    seeded deterministic function of the pending set so runs reproduce.
    """

    def __init__(self, value=0):
        self.value = value
        self.pending = []

    def write(self, value, lane=0):
        self.pending.append((int(value), int(lane)))


def arbitrary_commit(cell, seed=0):
    """Resolve a cell's pending writes; returns the committed value."""
    if cell.pending:
        vals = np.array([v for v, _ in cell.pending], dtype=np.int64)
        lanes = np.array([l for _, l in cell.pending], dtype=np.int64)
        keys = _arb_keys(_mix_u64(np.uint64(seed)), np.zeros_like(vals), vals, lanes)
        cell.value = int(vals[int(np.argmin(keys))])
        cell.pending.clear()
    return cell.value


def synthetic_or(flags, cell=None, seed=0):
    """Parallel OR: every true lane concurrently writes a sentinel to one cell."""
    cell = cell if cell is not None else ArbitraryCell(0)
    for lane, f in enumerate(np.asarray(flags, dtype=bool)):
        if f:
            cell.write(1, lane)
    return arbitrary_commit(cell, seed) == 1


# ---------------------------------------------------------------------------
# machine

class VArray:
    """A named device allocation; `.a` is the backing numpy array."""

    def __init__(self, name, a, const=False):
        self.name = name
        self.a = a
        self.const = const

    @property
    def itemsize(self):
        return self.a.itemsize

    def __len__(self):
        return len(self.a)


class Ctx:
    """Per-kernel (per-worker) view handed to kernel bodies.

    All addressing is element indices into VArrays; lanes identify the
    virtual threads an index vector belongs to (for coalescing grouping
    and the race detector).  Index vectors align with ctx.lanes unless an
    explicit lanes argument says otherwise.
    """

    def __init__(self, machine, counters, lanes, worker=0, barrier=None, blocks=1):
        self.m = machine
        self.c = counters
        self.lanes = lanes
        self.p = machine._active
        self.worker = worker
        self._barrier = barrier
        self._blocks = blocks
        self._arb = []          # buffered (array, idx, val, lanes) writes

    # -- access patterns ----------------------------------------------------

    def strided(self, N):
        """Yield (lanes, idx) covering items congruent to each lane mod p.

        Full accounting walks stride by stride so each lockstep step's
        coalescing is modeled; otherwise all strides fuse into one step.
        """
        p = self.p
        steps = -(-N // p) if N else 0
        if self.m._per_step:
            for s in range(steps):
                idx = self.lanes + s * p
                ok = idx < N
                lanes, idx = self.lanes[ok], idx[ok]
                if idx.size:
                    self.c.items += idx.size
                    yield lanes, idx
        elif steps:
            mat = self.lanes[None, :] + p * np.arange(steps, dtype=np.int64)[:, None]
            lanes = np.broadcast_to(self.lanes, mat.shape).ravel()
            idx = mat.ravel()
            ok = idx < N
            lanes, idx = lanes[ok], idx[ok]
            if idx.size:
                self.c.items += idx.size
                yield lanes, idx

    def partitioned(self, N):
        """Like strided(), but each lane owns a contiguous chunk of items."""
        p = self.p
        chunk = -(-N // p) if N else 0
        if self.m._per_step:
            for s in range(chunk):
                idx = self.lanes * chunk + s
                ok = idx < N
                lanes, idx = self.lanes[ok], idx[ok]
                if idx.size:
                    self.c.items += idx.size
                    yield lanes, idx
        elif chunk:
            mat = self.lanes[:, None] * chunk + np.arange(chunk, dtype=np.int64)[None, :]
            lanes = np.broadcast_to(self.lanes[:, None], mat.shape).ravel()
            idx = mat.ravel()
            ok = idx < N
            lanes, idx = lanes[ok], idx[ok]
            if idx.size:
                self.c.items += idx.size
                yield lanes, idx

    # -- memory -------------------------------------------------------------

    def _lane_vec(self, lanes, size):
        lanes = self.lanes if lanes is None else np.asarray(lanes, dtype=np.int64)
        assert lanes.size == size, \
            "index vector does not align with ctx.lanes; pass the lanes the " \
            "access-pattern generator yielded"
        return lanes

    def read(self, arr, idx, snap=False, lanes=None):
        """Read arr at idx; snap=True reads the kernel-entry snapshot."""
        idx = np.asarray(idx, dtype=np.int64)
        lanes = self._lane_vec(lanes, idx.size)
        self.c.reads += idx.size
        nbytes = idx.size * arr.itemsize
        self.c.payload_bytes += nbytes
        self.c.array_bytes[arr.name] = self.c.array_bytes.get(arr.name, 0) + nbytes
        if snap:
            src = self.m._snaps[arr.name]
        else:
            src = arr.a
            self.m._check_read_race(arr, idx, lanes)
        if self.m._per_step:
            t, b = _txn_halfwarps(lanes, idx * arr.itemsize, arr.itemsize,
                                  *SEGMENT_TABLE[arr.itemsize])
            self.c.transactions += t
            self.c.bytes_moved += b
            self.c.steps += 1
        return src[idx]

    def const_read(self, arr, idx):
        """Read a host-managed constant buffer; not global-memory traffic."""
        assert arr.const, f"{arr.name} is not a constant buffer"
        return arr.a[np.asarray(idx, dtype=np.int64)]

    def write(self, arr, idx, values, lanes=None):
        """Plain store; lanes must write disjoint locations within a kernel."""
        idx = np.asarray(idx, dtype=np.int64)
        lanes = self._lane_vec(lanes, idx.size)
        self.c.writes += idx.size
        nbytes = idx.size * arr.itemsize
        self.c.payload_bytes += nbytes
        self.c.array_bytes[arr.name] = self.c.array_bytes.get(arr.name, 0) + nbytes
        self.m._note_write(arr, idx, values, lanes)
        arr.a[idx] = values
        if self.m._per_step:
            t, b = _txn_halfwarps(lanes, idx * arr.itemsize, arr.itemsize,
                                  *SEGMENT_TABLE[arr.itemsize])
            self.c.transactions += t
            self.c.bytes_moved += b
            self.c.steps += 1

    def arb_write(self, arr, idx, values, lanes=None):
        """Concurrent store with arbitrary-winner semantics.

        Attempts buffer up and one winner per location commits at the
        kernel-end barrier; only committed writes count as writes.
        """
        idx = np.asarray(idx, dtype=np.int64)
        lanes = self._lane_vec(lanes, idx.size)
        values = np.broadcast_to(np.asarray(values), idx.shape)
        if self.m._per_step:
            t, b = _txn_halfwarps(lanes, idx * arr.itemsize, arr.itemsize,
                                  *SEGMENT_TABLE[arr.itemsize])
            self.c.transactions += t
            self.c.bytes_moved += b
            self.c.steps += 1
        if idx.size:
            self._arb.append((arr, idx.copy(), np.array(values, dtype=np.int64),
                              np.asarray(lanes, dtype=np.int64).copy()))

    # -- control ------------------------------------------------------------

    def branch(self, cond, lanes=None):
        """Record a data-dependent branch; counts warps whose lanes split."""
        if not self.m._per_step:
            return
        cond = np.asarray(cond, dtype=bool)
        lanes = self._lane_vec(lanes, cond.size)
        if lanes.size:
            w = lanes // WARP_SIZE
            w = w - w.min()
            total = np.bincount(w)
            hot = np.bincount(w, weights=cond)
            self.c.divergence_events += int(np.sum((hot > 0) & (hot < total)))
        self.c.steps += 1

    def sync(self):
        """Block-wide barrier; only legal for single-block launches."""
        if self._blocks != 1:
            raise MachineError("sync inside a multi-block kernel")
        if self.worker == 0:
            self.c.syncs += 1
            self.c.steps += 1
        if self._barrier is not None:
            self._barrier.wait()
        else:
            self.m._clear_races()

    def note_items(self, count):
        self.c.items += int(count)


class Machine:
    """Allocates arrays and launches kernels under one grid configuration."""

    def __init__(self, p, block_size=256, backend="simulated", accounting="full",
                 seed=0, workers=None):
        if backend not in ("simulated", "threaded"):
            raise ValueError(f"unknown backend {backend!r}")
        if accounting not in ("full", "counts"):
            raise ValueError(f"unknown accounting mode {accounting!r}")
        self.grid = GridConfig(p, block_size)
        self.backend = backend
        self.accounting = accounting
        self.seed = seed
        self.workers = workers if workers else (os.cpu_count() or 1)
        self.stats = ExecStats(backend=backend)
        self.arrays = {}
        self._snaps = {}
        self._dirty = {}
        self._writer = {}
        self._active = self.grid.p
        # per-step transaction/divergence modeling and the race detector
        # only run on the simulated backend
        self._per_step = backend == "simulated" and accounting == "full"
        self._detect = backend == "simulated"

    def alloc(self, name, n, dtype):
        assert name not in self.arrays, f"array {name} already allocated"
        arr = VArray(name, np.zeros(n, dtype=dtype))
        self.arrays[name] = arr
        return arr

    def const_alloc(self, name, n, dtype):
        """Host-managed constant buffer: kernel reads are not counted."""
        assert name not in self.arrays
        arr = VArray(name, np.zeros(n, dtype=dtype), const=True)
        self.arrays[name] = arr
        return arr

    # -- race detector ------------------------------------------------------

    def _note_write(self, arr, idx, values, lanes):
        if not self._detect:
            return
        name = arr.name
        if name not in self._dirty:
            self._dirty[name] = np.zeros(len(arr), dtype=bool)
            self._writer[name] = np.full(len(arr), -1, dtype=np.int64)
        cur = arr.a[idx]
        d = self._dirty[name][idx]
        if d.any():
            clash = d & (self._writer[name][idx] != lanes) & (cur != values)
            if clash.any():
                where = int(idx[np.flatnonzero(clash)[0]])
                raise RaceError(f"write-write conflict on {name}[{where}]")
        changed = cur != values
        if np.any(changed):
            self._dirty[name][idx[changed]] = True
            self._writer[name][idx[changed]] = np.asarray(lanes)[changed]

    def _check_read_race(self, arr, idx, lanes):
        if not self._detect or arr.const:
            return
        d = self._dirty.get(arr.name)
        if d is None:
            return
        hit = d[idx]
        if hit.any():
            bad = hit & (self._writer[arr.name][idx] != lanes)
            if bad.any():
                where = int(idx[np.flatnonzero(bad)[0]])
                raise RaceError(f"read of freshly written {arr.name}[{where}]")

    def _clear_races(self):
        self._dirty.clear()
        self._writer.clear()

    # -- launching ----------------------------------------------------------

    def launch(self, name, body, *, round=0, active=None, single_block=False,
               snapshots=()):
        """Run one kernel to completion (implicit barrier at both ends)."""
        active = self.grid.p if active is None else int(active)
        if single_block:
            if active > self.grid.block_size:
                raise CapabilityError(
                    f"single block limited to {self.grid.block_size} threads, got {active}")
            blocks = 1
        else:
            blocks = -(-active // self.grid.block_size)
        self._active = active
        if self.stats.launch_log:
            self.stats.barriers += 1
        self._snaps = {a.name: a.a.copy() for a in snapshots}
        counters = KernelCounters(launches=1)
        lanes_all = np.arange(active, dtype=np.int64)
        salt = int(_mix_u64(np.uint64((self.seed << 8) ^ len(self.stats.launch_log))))

        if self.backend == "simulated":
            ctx = Ctx(self, counters, lanes_all, blocks=blocks)
            body(ctx)
            buffers = ctx._arb
        else:
            buffers = self._run_threaded(body, lanes_all, blocks, counters)

        self._commit_arb(buffers, salt, counters)
        self._clear_races()
        self._snaps = {}
        self.stats.launch_log.append(LaunchRecord(name, counters, round, blocks))

    def _run_threaded(self, body, lanes_all, blocks, counters):
        nw = min(self.workers, lanes_all.size)
        slices = np.array_split(lanes_all, nw)
        barrier = threading.Barrier(nw)
        ctxs = [Ctx(self, KernelCounters(), sl, worker=w, barrier=barrier, blocks=blocks)
                for w, sl in enumerate(slices)]
        errors = []

        def run(ctx):
            try:
                body(ctx)
            except BaseException as e:        # propagate to the launcher
                errors.append(e)
                ctx._barrier.abort()

        threads = [threading.Thread(target=run, args=(c,)) for c in ctxs]
        t0 = time.perf_counter()
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        dt = time.perf_counter() - t0
        if errors:
            raise errors[0]
        self.stats.wall_time = (self.stats.wall_time or 0.0) + dt
        for c in ctxs:
            counters.add(c.c)
        counters.launches = 1
        buffers = []
        for c in ctxs:
            buffers.extend(c._arb)
        return buffers

    def _commit_arb(self, buffers, salt, counters):
        by_arr = {}
        for arr, idx, val, lanes in buffers:
            by_arr.setdefault(arr.name, (arr, [], [], []))
            by_arr[arr.name][1].append(idx)
            by_arr[arr.name][2].append(val)
            by_arr[arr.name][3].append(lanes)
        for name in sorted(by_arr):
            arr, idxs, vals, lanes = by_arr[name]
            idx = np.concatenate(idxs)
            val = np.concatenate(vals)
            lane = np.concatenate(lanes)
            keys = _arb_keys(salt, idx, val, lane)
            order = np.lexsort((keys, idx))
            idx_s = idx[order]
            first = np.ones(idx_s.size, dtype=bool)
            first[1:] = idx_s[1:] != idx_s[:-1]
            win = order[first]
            arr.a[idx[win]] = val[win]
            self.stats.meta["arb_attempts"] = \
                self.stats.meta.get("arb_attempts", 0) + idx.size
            counters.writes += win.size
            nbytes = win.size * arr.itemsize
            counters.payload_bytes += nbytes
            counters.array_bytes[name] = counters.array_bytes.get(name, 0) + nbytes


@dataclass
class KernelRun:
    """One kernel in a sequence: a name plus a body over a Ctx."""
    name: str
    body: object
    round: int = 0
    single_block: bool = False
    snapshots: tuple = ()


def run_kernel_sequence(machine, kernels):
    """Launch kernels in order with barriers between them; returns the stats."""
    for k in kernels:
        machine.launch(k.name, k.body, round=k.round,
                       single_block=k.single_block, snapshots=tuple(k.snapshots))
    return machine.stats
