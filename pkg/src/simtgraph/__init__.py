"""Deterministic SIMT machine model with PRAM graph algorithms on top.

The package has three layers: a virtual kernel machine that executes
vectorized kernels over virtual lanes while counting global memory
traffic, coalesced transactions and divergence (vkm); list ranking and
connected components written against that machine (listrank, concomp);
and sequential oracles plus input generators used to verify them
(core, gen).  The bench module wraps everything in a measurement CLI.
"""

from .core import (
    CapabilityError,
    EdgeGraph,
    ExecStats,
    InvalidGraphError,
    InvalidListError,
    P48_MAX_THREADS,
    Packing,
    PackingError,
    SuccessorList,
    canonical_labels,
    compare_arrays,
    list_to_graph,
    load_graph,
    load_list,
    save_graph,
    save_list,
    seq_components,
    seq_rank,
    validate_graph,
    validate_list,
)
from .gen import gen_list, gen_random_graph, gen_tree_graph, kiss_seed
from .vkm import (
    DEFAULT_P,
    GridConfig,
    Machine,
    MachineError,
    RaceError,
    count_transactions,
)
from .listrank import rs_rank, rs_rank_even, wyllie_rank
from .concomp import round_profile, sv_components, sv_round_bound

__version__ = "0.1.0"

__all__ = [
    "CapabilityError",
    "DEFAULT_P",
    "EdgeGraph",
    "ExecStats",
    "GridConfig",
    "InvalidGraphError",
    "InvalidListError",
    "Machine",
    "MachineError",
    "P48_MAX_THREADS",
    "Packing",
    "PackingError",
    "RaceError",
    "SuccessorList",
    "canonical_labels",
    "compare_arrays",
    "count_transactions",
    "gen_list",
    "gen_random_graph",
    "gen_tree_graph",
    "kiss_seed",
    "list_to_graph",
    "load_graph",
    "load_list",
    "round_profile",
    "rs_rank",
    "rs_rank_even",
    "save_graph",
    "save_list",
    "seq_components",
    "seq_rank",
    "sv_components",
    "sv_round_bound",
    "validate_graph",
    "validate_list",
    "wyllie_rank",
]
