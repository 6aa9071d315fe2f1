"""Parallel list ranking on the virtual kernel machine.

Two algorithm families:

* wyllie_rank -- pointer jumping over packed (rank, successor) 64-bit words,
  either as an init kernel plus ceil(log2 n) jump kernel launches, or as a
  single-block kernel that replaces the kernel-boundary barriers with
  in-block syncs.

* rs_rank -- the work-efficient random-splitter algorithm: p splitters cut
  the list into sub-lists (RS2), each thread walks its sub-list writing
  owner marks and local ranks (RS3), the reduced splitter list is ranked by
  weighted single-block pointer jumping (RS4), and a final fully strided
  pass combines splitter rank and local rank into the answer (RS5).  Node
  records are either one packed 64-bit word per node (P64) or a 16-bit mark
  plus a 32-bit local rank in two arrays (P48, limited to 16,384 threads).
"""

import math
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from .core import (
    CapabilityError, Packing, P48_MAX_THREADS, InvalidListError, validate_list,
    chain_positions,
)
from .gen import kiss_batch, kiss_seed
from .vkm import Machine

MASK32 = np.uint64(0xFFFFFFFF)
SENT16 = 0xFFFF            # "no owner yet" in the 16-bit mark layout
SENT32 = 0xFFFFFFFF        # same for the 32-bit mark of the packed layout
SENT64_WORD = np.uint64(SENT32) << np.uint64(32)


def _jump_rounds(n):
    """Pointer-jumping rounds so every node reaches the tail: ceil(log2 n)."""
    return max(0, int(n - 1).bit_length()) if n > 1 else 0


@dataclass
class SplitterSet:
    """Everything known about the r splitters after the walk phase."""
    r: int
    splitter_node: np.ndarray
    sublist_len: np.ndarray = None
    splitter_succ: np.ndarray = None      # reduced-list links (splitter ids)
    splitter_rank: np.ndarray = None


@dataclass
class OwnerMarks:
    """Per-node owner/local-rank storage; layout depends on the packing."""
    packing: Packing
    mark: object = None       # P48: uint16 VArray
    local: object = None      # P48: uint32 VArray
    words: object = None      # P64: packed uint64 VArray


SublistStats = namedtuple("SublistStats", ["max_len", "mean_len", "histogram"])


def sublist_stats(splitters):
    """Max/mean/histogram of sub-list lengths; mean is n/r by conservation."""
    lens = np.asarray(splitters.sublist_len, dtype=np.int64)
    hist = np.bincount(lens)
    return SublistStats(int(lens.max()), lens.sum() / lens.size, hist)


# ---------------------------------------------------------------------------
# Wyllie

def wyllie_rank(sl, p, variant="multi_kernel", backend="simulated",
                accounting="full", block_size=256, seed=0, workers=None):
    """Rank a list by pointer jumping; returns (rank array, ExecStats).

    variant "multi_kernel" barriers between jump rounds by launching one
    kernel per round; "single_block" runs everything in one launch with
    block-level syncs and therefore requires p <= block_size.
    """
    v = validate_list(sl)
    if v is not None:
        raise InvalidListError(str(v))
    n = sl.n
    m = Machine(p, block_size=block_size, backend=backend,
                accounting=accounting, seed=seed, workers=workers)
    succ_d = m.alloc("succ", n, np.uint32)
    succ_d.a[:] = sl.succ
    rounds = _jump_rounds(n)
    m.stats.meta.update(n=n, p=p, variant=variant, rounds=rounds)
    m.stats.rounds = rounds

    if variant == "multi_kernel":
        words = m.alloc("words", n, np.uint64)

        def init(ctx):
            for lanes, idx in ctx.strided(n):
                s = ctx.read(succ_d, idx, lanes=lanes).astype(np.uint64)
                live = (s != idx).astype(np.uint64)
                ctx.write(words, idx, (live << np.uint64(32)) | s, lanes=lanes)

        def jump(ctx):
            for lanes, idx in ctx.strided(n):
                w = ctx.read(words, idx, snap=True, lanes=lanes)
                s = w & MASK32
                rk = w >> np.uint64(32)
                w2 = ctx.read(words, s.astype(np.int64), snap=True, lanes=lanes)
                live = s != idx.astype(np.uint64)
                rk2 = (w2 >> np.uint64(32)) * live
                s2 = np.where(live, w2 & MASK32, s)
                ctx.write(words, idx, ((rk + rk2) << np.uint64(32)) | s2, lanes=lanes)

        m.launch("wy_init", init)
        for k in range(rounds):
            m.launch("wy_jump", jump, round=k + 1, snapshots=(words,))
        rank = (words.a >> np.uint64(32)).astype(np.int64)

    elif variant == "single_block":
        if p > block_size:
            raise CapabilityError(
                f"single-block variant limited to {block_size} threads, got {p}")
        buf_a = m.alloc("words_a", n, np.uint64)
        buf_b = m.alloc("words_b", n, np.uint64)

        def body(ctx):
            for lanes, idx in ctx.strided(n):
                s = ctx.read(succ_d, idx, lanes=lanes).astype(np.uint64)
                live = (s != idx).astype(np.uint64)
                ctx.write(buf_a, idx, (live << np.uint64(32)) | s, lanes=lanes)
            ctx.sync()
            cur, nxt = buf_a, buf_b
            for _ in range(rounds):
                for lanes, idx in ctx.strided(n):
                    w = ctx.read(cur, idx, lanes=lanes)
                    s = w & MASK32
                    rk = w >> np.uint64(32)
                    w2 = ctx.read(cur, s.astype(np.int64), lanes=lanes)
                    live = s != idx.astype(np.uint64)
                    rk2 = (w2 >> np.uint64(32)) * live
                    s2 = np.where(live, w2 & MASK32, s)
                    ctx.write(nxt, idx, ((rk + rk2) << np.uint64(32)) | s2,
                              lanes=lanes)
                ctx.sync()
                cur, nxt = nxt, cur

        m.launch("wy_single", body, single_block=True)
        final = buf_a if rounds % 2 == 0 else buf_b
        rank = (final.a >> np.uint64(32)).astype(np.int64)

    else:
        raise ValueError(f"unknown variant {variant!r}")

    return rank, m.stats


# ---------------------------------------------------------------------------
# random-splitter ranking

class RsState:
    """Device arrays and parameters shared by the RS1..RS5 kernels."""

    def __init__(self, machine, sl, packing, reuse_succ=False):
        self.m = machine
        self.n = sl.n
        self.p = machine.grid.p
        self.packing = packing
        self.succ_d = machine.alloc("succ", self.n, np.uint32)
        self.succ_d.a[:] = sl.succ
        marks = OwnerMarks(packing)
        if packing is Packing.P48:
            marks.mark = machine.alloc("mark", self.n, np.uint16)
            marks.local = machine.alloc("local", self.n, np.uint32)
        else:
            marks.words = machine.alloc("words", self.n, np.uint64)
        self.marks = marks
        r = self.p
        self.splitter_node = machine.alloc("spl_node", r, np.uint32)
        self.sub_len = machine.alloc("sub_len", r, np.uint32)
        self.red_succ = machine.alloc("red_succ", r, np.uint32)
        self.red_a = machine.alloc("red_words_a", r, np.uint64)
        self.red_b = machine.alloc("red_words_b", r, np.uint64)
        self.sr_const = machine.const_alloc("splitter_rank", r, np.uint32)
        # final ranks optionally overwrite the successor array in place
        self.rank_out = self.succ_d if reuse_succ else machine.alloc(
            "rank", self.n, np.uint32)

    @property
    def node_array_names(self):
        """Arrays whose traffic makes up the per-node payload of a pass."""
        if self.packing is Packing.P48:
            return ("mark", "local", "succ")
        return ("words", "succ")


def rs1_init(st):
    """Mark every node unowned; branch-free strided writes."""
    n = st.n

    def body(ctx):
        for lanes, idx in ctx.strided(n):
            if st.packing is Packing.P48:
                ctx.write(st.marks.mark, idx, SENT16, lanes=lanes)
            else:
                ctx.write(st.marks.words, idx, SENT64_WORD, lanes=lanes)

    st.m.launch("rs1_init", body)


def _draw_splitters(n, r, seed):
    """Head plus r-1 distinct random interior nodes, reproducible by seed."""
    if r == 1:
        return np.zeros(1, dtype=np.int64)
    state = kiss_seed(seed)
    if r - 1 > (n - 1) // 2:
        # dense selection: rejection would thrash, order by random keys instead
        keys, _ = kiss_batch(state, n - 1)
        picks = 1 + np.argsort(keys, kind="stable")[: r - 1]
    else:
        chosen = np.empty(0, dtype=np.int64)
        while chosen.size < r - 1:
            need = (r - 1) - chosen.size
            draws, state = kiss_batch(state, need + need // 3 + 16)
            cand = 1 + (draws % np.uint64(n - 1)).astype(np.int64)
            _, first = np.unique(cand, return_index=True)
            cand = cand[np.sort(first)]
            cand = cand[~np.isin(cand, chosen)]
            chosen = np.concatenate([chosen, cand[:need]])
        picks = chosen
    return np.concatenate([[0], picks])


def rs2_select(st, splitter_node_host):
    """Install the splitter set: each of the r threads marks its splitter."""
    r = st.p
    st.splitter_node.a[:] = splitter_node_host

    def body(ctx):
        lanes = ctx.lanes
        s = ctx.read(st.splitter_node, lanes).astype(np.int64)
        if st.packing is Packing.P48:
            ctx.write(st.marks.mark, s, lanes)
        else:
            ctx.write(st.marks.words, s,
                      lanes.astype(np.uint64) << np.uint64(32))

    st.m.launch("rs2_select", body)
    return SplitterSet(r, splitter_node_host.copy())


def rs3_walk(st, splitters):
    """Each thread claims its sub-list: marks owners and local ranks until it
    reads a node someone else owns.

    Per claimed node the kernel touches global memory exactly as the packing
    dictates: P48 = 16-bit mark write + 32-bit local write + 32-bit succ
    read + 16-bit mark read (96 bits); P64 = 64-bit packed write + 32-bit
    succ read + 64-bit packed read (160 bits).
    """
    r = st.p

    def body(ctx):
        lanes = ctx.lanes
        cur = ctx.read(st.splitter_node, lanes).astype(np.int64)
        ell = np.zeros(lanes.size, dtype=np.int64)
        live_pos = np.arange(lanes.size)
        while live_pos.size:
            L = lanes[live_pos]
            C = cur[live_pos]
            E = ell[live_pos]
            if st.packing is Packing.P48:
                ctx.write(st.marks.mark, C, L, lanes=L)
                ctx.write(st.marks.local, C, E, lanes=L)
                nxt = ctx.read(st.succ_d, C, lanes=L).astype(np.int64)
                owner_next = ctx.read(st.marks.mark, nxt, lanes=L).astype(np.int64)
                stop = owner_next != SENT16
            else:
                w = (L.astype(np.uint64) << np.uint64(32)) | E.astype(np.uint64)
                ctx.write(st.marks.words, C, w, lanes=L)
                nxt = ctx.read(st.succ_d, C, lanes=L).astype(np.int64)
                wn = ctx.read(st.marks.words, nxt, lanes=L)
                owner_next = (wn >> np.uint64(32)).astype(np.int64)
                stop = owner_next != SENT32
            ctx.note_items(L.size)
            if stop.any():
                done = L[stop]
                ctx.write(st.sub_len, done, E[stop] + 1, lanes=done)
                ctx.write(st.red_succ, done, owner_next[stop], lanes=done)
            cur[live_pos] = nxt
            ell[live_pos] += 1
            live_pos = live_pos[~stop]

    st.m.launch("rs3_walk", body)
    splitters.sublist_len = st.sub_len.a.astype(np.int64).copy()
    splitters.splitter_succ = st.red_succ.a.astype(np.int64).copy()
    if splitters.sublist_len.sum() != st.n:
        raise RuntimeError("sub-list walk did not claim every node exactly once")
    return splitters


def rs4_rank_splitters(st, splitters):
    """Rank the reduced splitter list by weighted pointer jumping.

    Initial value of splitter i is the length of its successor's sub-list;
    after the jumps, rank(splitter) = jumped sum + own length - 1.  Runs as
    one single-block kernel when r fits a block, else falls back to one
    kernel launch per jump round (flagged in stats.meta).
    """
    r = st.p
    rounds = _jump_rounds(r)

    def init(ctx):
        lanes = ctx.lanes
        s = ctx.read(st.red_succ, lanes).astype(np.int64)
        ln = ctx.read(st.sub_len, s, lanes=lanes).astype(np.uint64)
        live = (s != lanes).astype(np.uint64)
        ctx.write(st.red_a, lanes, ((ln * live) << np.uint64(32))
                  | s.astype(np.uint64))

    st.m.launch("rs4_init", init)

    def jump_step(ctx, cur, nxt, lanes, snap=False):
        w = ctx.read(cur, lanes, snap=snap)
        s = w & MASK32
        val = w >> np.uint64(32)
        w2 = ctx.read(cur, s.astype(np.int64), snap=snap, lanes=lanes)
        live = s != lanes.astype(np.uint64)
        val2 = (w2 >> np.uint64(32)) * live
        s2 = np.where(live, w2 & MASK32, s)
        ctx.write(nxt, lanes, ((val + val2) << np.uint64(32)) | s2, lanes=lanes)

    if r <= st.m.grid.block_size:
        def body(ctx):
            cur, nxt = st.red_a, st.red_b
            for _ in range(rounds):
                jump_step(ctx, cur, nxt, ctx.lanes)
                ctx.sync()
                cur, nxt = nxt, cur

        st.m.launch("rs4_rank", body, single_block=True)
        final = st.red_a if rounds % 2 == 0 else st.red_b
    else:
        # reduced list wider than a block: no in-block barrier can cover it,
        # so each jump round becomes its own launch over a snapshot
        st.m.stats.meta["rs4_fallback"] = True

        def multi(ctx):
            jump_step(ctx, st.red_a, st.red_a, ctx.lanes, snap=True)

        for k in range(rounds):
            st.m.launch("rs4_jump", multi, round=k + 1, snapshots=(st.red_a,))
        final = st.red_a

    jumped = (final.a >> np.uint64(32)).astype(np.int64)
    splitters.splitter_rank = jumped + splitters.sublist_len - 1
    return splitters


def rs5_expand(st, splitters):
    """Final rank of node i: its splitter's rank minus its local rank.

    Splitter ranks travel in a host-loaded constant buffer, so the kernel
    touches global memory fully strided and branch-free.
    """
    n = st.n
    st.sr_const.a[:] = splitters.splitter_rank

    def body(ctx):
        for lanes, idx in ctx.strided(n):
            if st.packing is Packing.P48:
                o = ctx.read(st.marks.mark, idx, lanes=lanes).astype(np.int64)
                ell = ctx.read(st.marks.local, idx, lanes=lanes).astype(np.int64)
            else:
                w = ctx.read(st.marks.words, idx, lanes=lanes)
                o = (w >> np.uint64(32)).astype(np.int64)
                ell = (w & MASK32).astype(np.int64)
            sr = ctx.const_read(st.sr_const, o).astype(np.int64)
            ctx.write(st.rank_out, idx, sr - ell, lanes=lanes)

    st.m.launch("rs5_expand", body)
    return st.rank_out.a.astype(np.int64)


def _rs_pipeline(sl, p, packing, splitter_node_host, backend, accounting,
                 block_size, seed, workers, reuse_succ):
    n = sl.n
    if packing is Packing.P48 and p > P48_MAX_THREADS:
        raise CapabilityError(
            f"48-bit packing cannot be invoked with more than "
            f"{P48_MAX_THREADS} threads (got {p})")
    if p > n:
        raise ValueError(f"more threads ({p}) than nodes ({n})")
    m = Machine(p, block_size=block_size, backend=backend,
                accounting=accounting, seed=seed, workers=workers)
    st = RsState(m, sl, packing, reuse_succ=reuse_succ)
    if p > 1 and p * math.log2(p) > n:
        m.stats.warnings.append("super-linear work regime: p*lg(p) > n")
        m.stats.meta["superlinear"] = True
    rs1_init(st)
    splitters = rs2_select(st, splitter_node_host)
    rs3_walk(st, splitters)
    rs4_rank_splitters(st, splitters)
    rank = rs5_expand(st, splitters)
    m.stats.meta.update(n=n, p=p, packing=packing.value,
                        splitter_set=splitters,
                        max_sublist=int(splitters.sublist_len.max()))
    return rank, m.stats


def rs_rank(sl, p, packing=Packing.P64, seed=0, backend="simulated",
            accounting="full", block_size=256, workers=None, reuse_succ=False):
    """Random-splitter list ranking; returns (rank array, ExecStats)."""
    v = validate_list(sl)
    if v is not None:
        raise InvalidListError(str(v))
    splitter_node = _draw_splitters(sl.n, p, seed)
    return _rs_pipeline(sl, p, packing, splitter_node, backend, accounting,
                        block_size, seed, workers, reuse_succ)


def rs_rank_even(sl, p, packing=Packing.P64, seed=0, backend="simulated",
                 accounting="full", block_size=256, workers=None,
                 reuse_succ=False):
    """As rs_rank, but with perfect splitters every n/p chain positions.

    Placement needs the true chain order, so a sequential oracle pre-walk
    (outside the machine, uncounted) finds the nodes.
    """
    n = sl.n
    if n % p != 0:
        raise ValueError(f"even splitters need p | n (p={p}, n={n})")
    pos = chain_positions(sl)            # also validates the list
    node_at = np.empty(n, dtype=np.int64)
    node_at[pos] = np.arange(n)
    splitter_node = node_at[:: n // p].copy()
    return _rs_pipeline(sl, p, packing, splitter_node, backend, accounting,
                        block_size, seed, workers, reuse_succ)
