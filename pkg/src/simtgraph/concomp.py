"""Connected components via Shiloach-Vishkin on the virtual kernel machine.

One round is six kernels with global barriers between them: shortcut
(SV1a), change marking (SV1b), conditional hooking of star roots onto
smaller neighbors (SV2), forced hooking of stagnant trees (SV3), a second
shortcut (SV4), and convergence detection through a concurrent-write OR
(SV5).  The parent array D is double-buffered so every kernel reads a
consistent pre-kernel state; hooking writes go through arbitrary-winner
commits, mirroring arbitrary-CRCW semantics.

Change tracking works by round stamps: a kernel that changes or hooks a
tree stamps its root with the round number in Q, and a round in which no
stamp was written can only happen when every tree is already a star and no
edge crosses two trees -- which is exactly convergence.
"""

from collections import namedtuple

import numpy as np

from .core import canonical_labels, validate_graph
from .vkm import Machine

MASK32 = np.uint64(0xFFFFFFFF)


def sv_round_bound(n):
    """Worst-case rounds: floor(log_{3/2} n) + 2, computed in integers."""
    k = 0
    while 3 ** (k + 1) <= n * 2 ** (k + 1):
        k += 1
    return k + 2


class SvState:
    """Device arrays and round counter for one components run."""

    def __init__(self, machine, graph):
        self.m = machine
        self.n = graph.n
        self.g = graph
        n = graph.n
        self._d = [machine.alloc("d0", n, np.uint32),
                   machine.alloc("d1", n, np.uint32)]
        self._cur = 0
        self.Q = machine.alloc("q", n, np.uint32)
        self.w = machine.alloc("w", 1, np.uint32)
        # both orientations of every stored edge, packed (u << 32) | v
        u = graph.edges[:, 0].astype(np.uint64)
        v = graph.edges[:, 1].astype(np.uint64)
        self.oriented_m = 2 * graph.m
        self.epk = machine.alloc("edges", self.oriented_m, np.uint64)
        sh = np.uint64(32)
        self.epk.a[:] = np.concatenate([(u << sh) | v, (v << sh) | u])
        self.s = 0              # current round stamp

    @property
    def D_cur(self):
        return self._d[self._cur]

    @property
    def D_nxt(self):
        return self._d[1 - self._cur]

    def swap(self):
        self._cur = 1 - self._cur


def sv0_init(st):
    """D becomes the identity forest, Q all clear: 0 reads, 2n writes."""
    n = st.n
    D = st.D_cur

    def body(ctx):
        for lanes, idx in ctx.strided(n):
            ctx.write(D, idx, idx, lanes=lanes)
            ctx.write(st.Q, idx, 0, lanes=lanes)

    st.m.launch("sv0", body)


def sv0_roots(st):
    """Host-side diagnostic: number of tree roots right now."""
    d = st.D_cur.a
    return int(np.count_nonzero(d == np.arange(st.n, dtype=d.dtype)))


def sv1a_shortcut(st, name="sv1a"):
    """D_nxt[i] = D_cur[D_cur[i]] for all i: 2n reads, n writes.

    Writing into the other buffer keeps the pre-shortcut parents readable
    for the marking kernel; the caller swaps buffers after SV1b.
    """
    n = st.n
    D, Dn = st.D_cur, st.D_nxt

    def body(ctx):
        for lanes, idx in ctx.strided(n):
            d = ctx.read(D, idx, lanes=lanes).astype(np.int64)
            dd = ctx.read(D, d, lanes=lanes)
            ctx.write(Dn, idx, dd, lanes=lanes)

    st.m.launch(name, body, round=st.s)


def sv1b_mark(st):
    """Stamp the new root of every vertex whose parent just changed."""
    n = st.n
    D, Dn = st.D_cur, st.D_nxt
    s = st.s

    def body(ctx):
        for lanes, idx in ctx.strided(n):
            dn = ctx.read(Dn, idx, lanes=lanes)
            dc = ctx.read(D, idx, lanes=lanes)
            changed = dn != dc
            ctx.branch(changed, lanes=lanes)
            ctx.arb_write(st.Q, dn[changed].astype(np.int64), s,
                          lanes=lanes[changed])

    st.m.launch("sv1b", body, round=st.s)


def _edge_fetch(ctx, st, idx, lanes):
    """Shared fetch for the hooking kernels: edge word, D[u], D[v], D[D[u]]."""
    D = st.D_cur
    ew = ctx.read(st.epk, idx, lanes=lanes)
    u = (ew >> np.uint64(32)).astype(np.int64)
    v = (ew & MASK32).astype(np.int64)
    du = ctx.read(D, u, snap=True, lanes=lanes).astype(np.int64)
    dv = ctx.read(D, v, snap=True, lanes=lanes).astype(np.int64)
    ddu = ctx.read(D, du, snap=True, lanes=lanes).astype(np.int64)
    return du, dv, ddu


def sv2_hook(st):
    """Hook star roots under smaller neighboring roots: 4m reads.

    Per oriented edge (u, v): if D[u] is a star root and D[v] < D[u],
    attempt D[D[u]] <- D[v] and stamp Q[D[v]] with the round.
    """
    D = st.D_cur
    s = st.s
    N = st.oriented_m

    def body(ctx):
        for lanes, idx in ctx.strided(N):
            du, dv, ddu = _edge_fetch(ctx, st, idx, lanes)
            cond = (du == ddu) & (dv < du)
            ctx.branch(cond, lanes=lanes)
            ctx.arb_write(D, du[cond], dv[cond], lanes=lanes[cond])
            ctx.arb_write(st.Q, dv[cond], s, lanes=lanes[cond])

    st.m.launch("sv2", body, round=st.s, snapshots=(D,))


def sv3_stagnant_hook(st):
    """Force stagnant star roots onto any neighbor's tree: 5m reads.

    Per oriented edge (u, v): if D[u] is a star root whose tree saw no
    stamp this round and the edge leaves the tree, attempt D[D[u]] <- D[v].
    """
    D = st.D_cur
    s = st.s
    N = st.oriented_m

    def body(ctx):
        for lanes, idx in ctx.strided(N):
            du, dv, ddu = _edge_fetch(ctx, st, idx, lanes)
            qdu = ctx.read(st.Q, du, lanes=lanes)
            cond = (du == ddu) & (qdu != s) & (du != dv)
            ctx.branch(cond, lanes=lanes)
            ctx.arb_write(D, du[cond], dv[cond], lanes=lanes[cond])

    st.m.launch("sv3", body, round=st.s, snapshots=(D,))


def sv4_shortcut(st):
    """Second shortcut of the round, into the other buffer."""
    sv1a_shortcut(st, name="sv4")


def sv5_converged(st):
    """True iff nothing stamped Q this round; n reads, at most p writes.

    Each thread folds its vertices' stamps locally, then every thread that
    saw a fresh stamp concurrently writes the round number to the global
    flag w -- the concurrent-write OR.
    """
    n = st.n
    s = st.s

    def body(ctx):
        acc = np.zeros(ctx.p, dtype=bool)
        for lanes, idx in ctx.strided(n):
            q = ctx.read(st.Q, idx, lanes=lanes)
            acc[lanes[q == s]] = True
        mine = acc[ctx.lanes]
        ctx.branch(mine)
        flagged = ctx.lanes[mine]
        ctx.arb_write(st.w, np.zeros(flagged.size, dtype=np.int64), s,
                      lanes=flagged)

    st.m.launch("sv5", body, round=st.s)
    return int(st.w.a[0]) != s


def sv_components(graph, p, backend="simulated", accounting="full",
                  block_size=256, seed=0, workers=None):
    """Label the connected components; returns (labels, ExecStats).

    Labels are canonicalized to the smallest vertex index per component,
    so they compare directly against the sequential oracle.
    """
    validate_graph(graph)
    n = graph.n
    if p > n:
        raise ValueError(f"more threads ({p}) than vertices ({n})")
    m = Machine(p, block_size=block_size, backend=backend,
                accounting=accounting, seed=seed, workers=workers)
    st = SvState(m, graph)
    bound = sv_round_bound(n)
    sv0_init(st)
    roots_per_round = [sv0_roots(st)]
    while True:
        st.s += 1
        if st.s > bound:
            raise RuntimeError(
                f"no convergence after {st.s - 1} rounds (bound {bound})")
        sv1a_shortcut(st)
        sv1b_mark(st)
        st.swap()
        sv2_hook(st)
        sv3_stagnant_hook(st)
        sv4_shortcut(st)
        st.swap()
        done = sv5_converged(st)
        roots_per_round.append(sv0_roots(st))
        if done:
            break
    m.stats.rounds = st.s
    m.stats.meta.update(n=n, p=p, m_stored=graph.m, oriented_m=st.oriented_m,
                        rounds=st.s, round_bound=bound,
                        roots_per_round=roots_per_round)
    labels = canonical_labels(st.D_cur.a.astype(np.int64))
    return labels, m.stats


RoundProfile = namedtuple("RoundProfile", ["rows", "sv23_read_dominated"])


def round_profile(stats):
    """Per-round, per-kernel table of counters from a components run.

    The flag reports whether the hooking kernels (SV2+SV3) account for the
    majority of all global reads, which they do whenever m is not far
    below n.
    """
    rows = []
    sv23 = 0
    other = 0
    for rec in stats.launch_log:
        c = rec.counters
        rows.append({"round": rec.round, "kernel": rec.kernel,
                     "reads": c.reads, "writes": c.writes,
                     "transactions": c.transactions})
        if rec.kernel in ("sv2", "sv3"):
            sv23 += c.reads
        else:
            other += c.reads
    return RoundProfile(rows, sv23 > other)
