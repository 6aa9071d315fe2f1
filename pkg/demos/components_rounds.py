"""Watching Shiloach-Vishkin converge on different graph shapes.

Runs connected components over a path, a random forest and a random
graph of comparable edge count, then prints the per-round story: how
many tree roots survive each round, where the reads go, and why the
edge kernels dominate.
"""

from simtgraph.concomp import round_profile, sv_components, sv_round_bound
from simtgraph.core import list_to_graph, seq_components
from simtgraph.gen import gen_list, gen_random_graph, gen_tree_graph

P = 256


def run(tag, g):
    labels, stats = sv_components(g, p=min(P, g.n), accounting="counts",
                                  seed=0)
    assert (labels == seq_components(g)).all()
    roots = stats.meta["roots_per_round"]
    print(f"  {tag:28s} n={g.n:6d} m={g.m:6d} "
          f"rounds={stats.rounds:2d} (bound {stats.meta['round_bound']})  "
          f"roots per round: {roots}")
    return stats


def main():
    print("convergence by graph shape (equal-ish edge counts)")
    print("-" * 110)
    run("path (one long list)", list_to_graph(gen_list(10_000, seed=3)))
    run("forest, max 3 children", gen_tree_graph(10_000, 3, seed=3))
    run("random graph, d=2%", gen_random_graph(1_000, 0.02, seed=3))
    print()
    print("paths and trees need the full hook-and-halve treatment; a random "
          "graph's small diameter collapses in a few rounds.")
    print()

    g = gen_tree_graph(2_000, 2, seed=1)
    _, stats = sv_components(g, p=min(P, g.n), accounting="full", seed=1)
    prof = round_profile(stats)
    print(f"per-kernel traffic for the forest run (n={g.n}, m={g.m})")
    print("-" * 110)
    print(f"  {'round':>5s} {'kernel':8s} {'reads':>8s} {'writes':>8s} {'txns':>8s}")
    for row in prof.rows:
        if row["round"] <= 2:
            print(f"  {row['round']:5d} {row['kernel']:8s} {row['reads']:8d} "
                  f"{row['writes']:8d} {row['transactions']:8d}")
    print("  ... (later rounds look the same on the read side)")
    print()
    verdict = "do" if prof.sv23_read_dominated else "do NOT"
    print(f"the edge kernels sv2+sv3 {verdict} dominate total reads here: "
          "they fetch four or five words per oriented edge every round, "
          "while the vertex kernels touch a couple of words per vertex.")
    print(f"worst-case round bound for n=10^6: {sv_round_bound(10**6)}; "
          "observed rounds above stay well under it.")


if __name__ == "__main__":
    main()
