import numpy as np
import pytest

from simtgraph.core import (
    CapabilityError, InvalidListError, Packing, SuccessorList, compare_arrays,
    seq_rank,
)
from simtgraph.gen import gen_list
from simtgraph.listrank import (
    rs_rank, rs_rank_even, sublist_stats, wyllie_rank,
)

CHAIN3 = SuccessorList([1, 2, 2])
PACKINGS = (Packing.P48, Packing.P64)


# ---------------------------------------------------------------- wyllie

def test_wyllie_three_chain():
    for variant in ("multi_kernel", "single_block"):
        rank, _ = wyllie_rank(CHAIN3, p=2, variant=variant)
        assert rank.tolist() == [2, 1, 0]


def test_wyllie_jump_kernel_count():
    rank, stats = wyllie_rank(gen_list(8, seed=1), p=4)
    assert stats.per_kernel()["wy_jump"].launches == 3        # ceil(log2 8)
    rank, stats = wyllie_rank(gen_list(1024, seed=1), p=64, accounting="counts")
    assert stats.kernel_launches == 11                        # 1 init + 10 jumps


def test_wyllie_jump_work_is_n_log_n():
    n = 256
    _, stats = wyllie_rank(gen_list(n, seed=3), p=32)
    jump = stats.per_kernel()["wy_jump"]
    assert jump.items == n * 8
    # each jump round reads two packed words and writes one per node
    assert jump.reads == 2 * n * 8
    assert jump.writes == n * 8


def test_wyllie_matches_oracle():
    rng = np.random.default_rng(7)
    for variant in ("multi_kernel", "single_block"):
        for n in (1, 2, 3, 17, 300):
            for _ in range(3):
                sl = gen_list(n, seed=int(rng.integers(2**31)))
                p = int(rng.integers(1, 257))
                rank, _ = wyllie_rank(sl, p=p, variant=variant,
                                      accounting="counts")
                assert compare_arrays(seq_rank(sl), rank) == -1, (variant, n, p)


def test_wyllie_single_block_thread_cap():
    with pytest.raises(CapabilityError):
        wyllie_rank(CHAIN3, p=300, variant="single_block", block_size=256)


def test_wyllie_rejects_invalid_list():
    with pytest.raises(InvalidListError):
        wyllie_rank(SuccessorList([1, 2, 0]), p=2)


def test_wyllie_single_block_syncs():
    n = 64
    _, stats = wyllie_rank(gen_list(n, seed=2), p=16, variant="single_block")
    # one sync after init, one after each of the 6 jump rounds
    assert stats.totals().syncs == 7
    assert stats.kernel_launches == 1


# ---------------------------------------------------------------- random splitter

def test_rs_three_chain_single_thread():
    for packing in PACKINGS:
        rank, stats = rs_rank(CHAIN3, p=1, packing=packing)
        assert rank.tolist() == [2, 1, 0]
        spl = stats.meta["splitter_set"]
        assert spl.splitter_node.tolist() == [0]
        assert spl.sublist_len.tolist() == [3]
        assert spl.splitter_rank.tolist() == [2]


def test_rs_matches_oracle():
    rng = np.random.default_rng(11)
    for packing in PACKINGS:
        for n, p in [(10, 1), (10, 4), (10, 10), (1000, 16), (1000, 250),
                     (257, 3), (4096, 64)]:
            sl = gen_list(n, seed=int(rng.integers(2**31)))
            rank, _ = rs_rank(sl, p=p, packing=packing, accounting="counts",
                              seed=int(rng.integers(2**31)))
            assert compare_arrays(seq_rank(sl), rank) == -1, (packing, n, p)


def test_rs_packing_invariance():
    sl = gen_list(5000, seed=21)
    r48, _ = rs_rank(sl, p=64, packing=Packing.P48, seed=9, accounting="counts")
    r64, _ = rs_rank(sl, p=64, packing=Packing.P64, seed=9, accounting="counts")
    assert compare_arrays(r48, r64) == -1


def test_rs_splitter_ranks_are_global_ranks():
    sl = gen_list(2000, seed=5)
    oracle = seq_rank(sl)
    _, stats = rs_rank(sl, p=32, seed=5, accounting="counts")
    spl = stats.meta["splitter_set"]
    assert np.array_equal(oracle[spl.splitter_node], spl.splitter_rank)


def test_rs_thread_cap_at_exactly_16384():
    sl = gen_list(40_000, seed=1)
    with pytest.raises(CapabilityError):
        rs_rank(sl, p=16_385, packing=Packing.P48)
    # 16384 itself is allowed
    rank, _ = rs_rank(sl, p=16_384, packing=Packing.P48, accounting="counts")
    assert compare_arrays(seq_rank(sl), rank) == -1
    # the wide packing has no such cap
    rank, _ = rs_rank(sl, p=16_385, packing=Packing.P64, accounting="counts")
    assert compare_arrays(seq_rank(sl), rank) == -1


def test_rs_more_threads_than_nodes_rejected():
    with pytest.raises(ValueError):
        rs_rank(CHAIN3, p=4)


def test_rs3_traffic_48bit_is_96n_bits():
    n = 1000
    sl = gen_list(n, seed=3)
    _, stats = rs_rank(sl, p=16, packing=Packing.P48, accounting="full")
    walk = stats.per_kernel()["rs3_walk"]
    node_bytes = sum(walk.array_bytes[a] for a in ("mark", "local", "succ"))
    assert node_bytes * 8 == 96 * n


def test_rs3_traffic_64bit_is_160n_bits():
    n = 1000
    sl = gen_list(n, seed=3)
    _, stats = rs_rank(sl, p=16, packing=Packing.P64, accounting="full")
    walk = stats.per_kernel()["rs3_walk"]
    node_bytes = sum(walk.array_bytes[a] for a in ("words", "succ"))
    assert node_bytes * 8 == 160 * n


def test_rs3_claims_every_node_once():
    for packing in PACKINGS:
        _, stats = rs_rank(gen_list(3000, seed=8), p=50, packing=packing,
                           accounting="counts")
        spl = stats.meta["splitter_set"]
        assert spl.sublist_len.sum() == 3000
        assert stats.per_kernel()["rs3_walk"].items == 3000


def test_rs1_rs5_are_branch_free():
    _, stats = rs_rank(gen_list(2048, seed=4), p=64, accounting="full")
    per = stats.per_kernel()
    assert per["rs1_init"].divergence_events == 0
    assert per["rs5_expand"].divergence_events == 0


def test_rs_kernel_structure():
    _, stats = rs_rank(gen_list(500, seed=6), p=16)
    names = [rec.kernel for rec in stats.launch_log]
    assert names == ["rs1_init", "rs2_select", "rs3_walk",
                     "rs4_init", "rs4_rank", "rs5_expand"]
    assert stats.barriers == len(names) - 1


def test_rs4_fallback_when_splitters_exceed_block():
    sl = gen_list(20_000, seed=13)
    rank, stats = rs_rank(sl, p=512, block_size=256, accounting="counts")
    assert stats.meta.get("rs4_fallback") is True
    assert any(rec.kernel == "rs4_jump" for rec in stats.launch_log)
    assert compare_arrays(seq_rank(sl), rank) == -1


def test_rs_superlinear_work_warning():
    sl = gen_list(64, seed=2)
    _, stats = rs_rank(sl, p=32, accounting="counts")      # 32*5 = 160 > 64
    assert stats.meta.get("superlinear") is True
    sl = gen_list(10_000, seed=2)
    _, stats = rs_rank(sl, p=16, accounting="counts")      # 16*4 = 64 <= n
    assert stats.meta.get("superlinear") is None


def test_rs_reuse_succ_buffer():
    sl = gen_list(1500, seed=17)
    rank, stats = rs_rank(sl, p=32, reuse_succ=True, accounting="counts")
    assert compare_arrays(seq_rank(sl), rank) == -1
    # no separate output array was ever allocated
    assert stats.meta["splitter_set"].r == 32


def test_rs_deterministic():
    sl = gen_list(3000, seed=19)
    a, sa = rs_rank(sl, p=64, seed=3, accounting="counts")
    b, sb = rs_rank(sl, p=64, seed=3, accounting="counts")
    assert compare_arrays(a, b) == -1
    assert sa.global_reads == sb.global_reads
    assert sa.global_writes == sb.global_writes


def test_rs_saturation_all_nodes_splitters():
    sl = gen_list(128, seed=23)
    rank, stats = rs_rank(sl, p=128, accounting="counts")
    assert compare_arrays(seq_rank(sl), rank) == -1
    spl = stats.meta["splitter_set"]
    assert spl.sublist_len.max() == 1


# ---------------------------------------------------------------- even splitters

def test_rs_even_equal_sublists():
    sl = gen_list(4096, seed=31)
    rank, stats = rs_rank_even(sl, p=64, accounting="counts")
    assert compare_arrays(seq_rank(sl), rank) == -1
    spl = stats.meta["splitter_set"]
    assert np.all(spl.sublist_len == 64)


def test_rs_even_requires_divisibility():
    with pytest.raises(ValueError):
        rs_rank_even(gen_list(100, seed=1), p=7)


# ---------------------------------------------------------------- sublist stats

def test_sublist_stats():
    sl = gen_list(4096, seed=37)
    _, stats = rs_rank(sl, p=64, seed=37, accounting="counts")
    st = sublist_stats(stats.meta["splitter_set"])
    assert st.mean_len == 4096 / 64
    assert st.max_len >= st.mean_len
    assert st.histogram.sum() == 64
    _, stats = rs_rank_even(sl, p=64, accounting="counts")
    st = sublist_stats(stats.meta["splitter_set"])
    assert st.max_len == st.mean_len == 64


def test_threaded_backend_agrees_with_simulated():
    sl = gen_list(5000, seed=41)
    base, sim_stats = rs_rank(sl, p=64, seed=7, accounting="counts")
    thr, thr_stats = rs_rank(sl, p=64, seed=7, backend="threaded", workers=3)
    assert compare_arrays(base, thr) == -1
    assert sim_stats.global_reads == thr_stats.global_reads
    assert sim_stats.global_writes == thr_stats.global_writes
    assert thr_stats.wall_time is not None

    w_sim, _ = wyllie_rank(sl, p=64, accounting="counts")
    w_thr, _ = wyllie_rank(sl, p=64, backend="threaded", workers=3)
    assert compare_arrays(w_sim, w_thr) == -1
