import numpy as np
import pytest

from simtgraph.core import (
    CapabilityError, EdgeGraph, ExecStats, InvalidGraphError, InvalidListError,
    KernelCounters, LaunchRecord, Packing, PackingError, SuccessorList,
    canonical_labels, chain_positions, compare_arrays, load_graph, load_list,
    pack, save_graph, save_list, seq_components, seq_rank, unpack,
    validate_graph, validate_list,
)


# ---------------------------------------------------------------- packing

def test_pack_unpack_roundtrip():
    for packing in (Packing.P48, Packing.P64):
        for mark, rank in [(0, 0), (1, 2**32 - 1), (2**16 - 1, 12345)]:
            assert unpack(pack(mark, rank, packing), packing) == (mark, rank)
    # the wide layout allows the full 32-bit mark
    assert unpack(pack(2**32 - 1, 7, Packing.P64), Packing.P64) == (2**32 - 1, 7)


def test_pack_frozen_values():
    # hand-computed: word = mark * 2^32 + rank
    assert pack(1, 0, Packing.P64) == 4294967296
    assert pack(3, 5, Packing.P48) == 12884901893
    assert unpack(12884901893, Packing.P48) == (3, 5)


def test_pack_width_checks():
    with pytest.raises(PackingError):
        pack(2**16, 0, Packing.P48)     # mark too wide for the 16-bit layout
    pack(2**16, 0, Packing.P64)         # but fine for the 32-bit one
    with pytest.raises(PackingError):
        pack(2**32, 0, Packing.P64)
    with pytest.raises(PackingError):
        pack(0, 2**32, Packing.P64)
    with pytest.raises(PackingError):
        pack(-1, 0, Packing.P48)
    with pytest.raises(PackingError):
        unpack(1 << 48, Packing.P48)


# ---------------------------------------------------------------- lists

def test_seq_rank_singleton():
    assert seq_rank(SuccessorList([0])).tolist() == [0]


def test_seq_rank_straight_chain():
    # 0 -> 1 -> 2 -> 2
    assert seq_rank(SuccessorList([1, 2, 2])).tolist() == [2, 1, 0]


def test_seq_rank_scrambled_chain():
    # 0 -> 3 -> 1 -> 4 -> 2, hand-ranked
    sl = SuccessorList([3, 4, 2, 1, 2])
    assert seq_rank(sl).tolist() == [4, 2, 0, 3, 1]
    assert chain_positions(sl).tolist() == [0, 2, 4, 1, 3]


def test_seq_rank_is_permutation_of_random_chains():
    rng = np.random.default_rng(20260817)
    for _ in range(25):
        n = int(rng.integers(1, 400))
        succ = _random_chain(rng, n)
        rank = seq_rank(SuccessorList(succ))
        assert sorted(rank.tolist()) == list(range(n))
        # head has the largest rank, tail has zero
        assert rank[0] == n - 1


def _random_chain(rng, n):
    """Chain in random memory order with the head pinned at index 0."""
    order = np.concatenate([[0], 1 + rng.permutation(n - 1)]) if n > 1 else np.array([0])
    succ = np.empty(n, dtype=np.int64)
    succ[order[:-1]] = order[1:]
    succ[order[-1]] = order[-1]
    return succ


def test_validate_list_violations():
    assert validate_list(SuccessorList([1, 2, 2])) is None
    v = validate_list(SuccessorList([1, 5, 2]))
    assert v.kind == "out-of-range" and v.index == 1
    v = validate_list(SuccessorList([1, 2, 0]))
    assert v.kind == "no-tail"
    v = validate_list(SuccessorList([0, 2, 2]))
    assert v.kind == "multiple-self-loops"
    # 0 -> 1 -> 0 revisit leaves node 2 stranded
    v = validate_list(SuccessorList([1, 0, 2]))
    assert v.kind == "unreachable" and v.index == 2


def test_seq_rank_rejects_bad_list():
    with pytest.raises(InvalidListError):
        seq_rank(SuccessorList([1, 2, 0]))


# ---------------------------------------------------------------- graphs

def test_seq_components_hand_example():
    g = EdgeGraph(6, [(0, 1), (1, 2), (4, 5)])
    assert seq_components(g).tolist() == [0, 0, 0, 3, 4, 4]


def test_seq_components_empty_graph():
    g = EdgeGraph(4, [])
    assert seq_components(g).tolist() == [0, 1, 2, 3]


def test_seq_components_matches_scipy():
    scipy_sparse = pytest.importorskip("scipy.sparse")
    from scipy.sparse.csgraph import connected_components

    rng = np.random.default_rng(99)
    for _ in range(20):
        n = int(rng.integers(2, 120))
        m = int(rng.integers(0, 3 * n))
        edges = rng.integers(0, n, size=(m, 2))
        edges = edges[edges[:, 0] != edges[:, 1]]
        g = EdgeGraph(n, edges)
        mat = scipy_sparse.coo_matrix(
            (np.ones(g.m), (g.edges[:, 0], g.edges[:, 1])), shape=(n, n))
        _, ref = connected_components(mat, directed=False)
        assert compare_arrays(canonical_labels(ref), seq_components(g)) == -1


def test_validate_graph():
    validate_graph(EdgeGraph(3, [(0, 1)]))
    with pytest.raises(InvalidGraphError):
        validate_graph(EdgeGraph(3, [(0, 3)]))
    with pytest.raises(InvalidGraphError):
        validate_graph(EdgeGraph(3, [(1, 1)]))


def test_canonical_labels():
    assert canonical_labels(np.array([5, 5, 2, 2, 5, 5])).tolist() == [0, 0, 2, 2, 0, 0]


def test_compare_arrays():
    assert compare_arrays([1, 2, 3], [1, 2, 3]) == -1
    assert compare_arrays([1, 2, 3], [1, 9, 3]) == 1
    assert compare_arrays([1, 2], [1, 2, 3]) == 0


# ---------------------------------------------------------------- stats

def _launch(kernel, blocks=1, **kw):
    return LaunchRecord(kernel, KernelCounters(launches=1, **kw), blocks=blocks)


def test_exec_stats_totals_are_sums():
    st = ExecStats()
    st.launch_log.append(_launch("a", reads=10, writes=5, steps=3))
    st.launch_log.append(_launch("b", reads=1, writes=2, steps=4))
    st.launch_log.append(_launch("a", reads=10, writes=5, steps=3))
    assert st.kernel_launches == 3
    assert st.global_reads == 21 and st.global_writes == 12
    per = st.per_kernel()
    assert per["a"].reads == 20 and per["b"].reads == 1
    assert sum(c.reads for c in per.values()) == st.totals().reads


def test_exec_stats_sm_steps_waves():
    st = ExecStats()
    st.launch_log.append(_launch("k", blocks=27, steps=10))
    assert st.sm_steps() == 10          # one full wave
    st.launch_log.append(_launch("k", blocks=28, steps=10))
    assert st.sm_steps() == 30          # 28 blocks need two waves


def test_exec_stats_csv_rows():
    st = ExecStats()
    st.launch_log.append(_launch("init", reads=0, writes=4))
    st.launch_log.append(_launch("jump", reads=8, writes=4))
    rows = st.csv_rows("r0")
    assert rows[-1]["kernel"] == "total"
    assert rows[-1]["reads"] == 8 and rows[-1]["writes"] == 8
    assert {r["kernel"] for r in rows} == {"init", "jump", "total"}


# ---------------------------------------------------------------- fixtures on disk

def test_list_file_roundtrip(tmp_path):
    sl = SuccessorList([3, 4, 2, 1, 2])
    path = tmp_path / "list.txt"
    save_list(sl, path)
    assert path.read_text().splitlines()[0] == "5"
    back = load_list(path)
    assert compare_arrays(sl.succ, back.succ) == -1


def test_graph_file_roundtrip(tmp_path):
    g = EdgeGraph(6, [(0, 1), (1, 2), (4, 5)])
    path = tmp_path / "graph.txt"
    save_graph(g, path)
    assert path.read_text().splitlines()[0] == "6 3"
    back = load_graph(path)
    assert back.n == 6 and back.m == 3
    assert compare_arrays(g.edges, back.edges) == -1


def test_graph_file_no_edges(tmp_path):
    path = tmp_path / "g.txt"
    save_graph(EdgeGraph(3, []), path)
    back = load_graph(path)
    assert back.n == 3 and back.m == 0


def test_capability_error_is_value_error():
    assert issubclass(CapabilityError, ValueError)
