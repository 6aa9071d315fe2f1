"""Benchmark and verification CLI for the kernel-machine algorithms.

Runs algorithm x input-family x backend sweeps and writes one CSV with a
single header row.  Per repetition there is one row per kernel plus a
"total" row; each (n, blocks) group ends with an aggregate row (rep =
"agg") carrying the mean and standard deviation of the wall times and
the mean of every counter column.  Wall-time columns are only filled by
backends that actually run on the host clock (threaded, and the
sequential baselines); the simulated backend reports counters and
simulated-step columns exclusively.

Exit codes: 0 success, 1 verification failure, 2 configuration error.
The base seed comes from --seed or the SIMTGRAPH_SEED environment
variable; repetition r of any sweep uses seed base+r for both input
generation and the machine, so identical configurations reproduce
identical counter columns.
"""

import argparse
import csv
import os
import statistics
import sys
import time

import numpy as np

from .concomp import sv_components
from .core import (
    P48_MAX_THREADS,
    Packing,
    canonical_labels,
    compare_arrays,
    list_to_graph,
    seq_components,
    seq_rank,
)
from .gen import gen_list, gen_random_graph, gen_tree_graph
from .listrank import rs_rank, rs_rank_even, sublist_stats, wyllie_rank
from .vkm import DEFAULT_P

SEED_ENV = "SIMTGRAPH_SEED"
ALGORITHMS = ("seq_lr", "wyllie", "rs48", "rs64", "rs_even", "seq_cc", "sv")
LIST_ONLY = ("seq_lr", "wyllie", "rs48", "rs64", "rs_even")
FAMILIES = ("list", "tree", "random")
BLOCK_SIZE = 256

COLUMNS = [
    "algo", "family", "n", "p", "blocks", "backend", "rep", "kernel",
    "launches", "rounds", "reads", "writes", "transactions", "bytes",
    "divergence", "sm_steps", "wall_time", "wall_stddev",
    "time_per_element", "mean_sublist", "max_sublist",
]

MEAN_COLS = ["launches", "rounds", "reads", "writes", "transactions",
             "bytes", "divergence", "sm_steps"]


class ConfigError(Exception):
    """Raised for invalid flag combinations before any run starts."""


class BenchConfig:
    def __init__(self, algo, sizes, family="list", k=2, density=0.01,
                 threads=None, blocks=None, backend="simulated", reps=20,
                 seed=0, out=None, verify=False, plot_data=None, workers=None):
        self.algo = algo
        self.sizes = list(sizes)
        self.family = family
        self.k = k
        self.density = density
        self.threads = threads
        self.blocks = list(blocks) if blocks else None
        self.backend = backend
        self.reps = reps
        self.seed = seed
        self.out = out
        self.verify = verify
        self.plot_data = plot_data
        self.workers = workers
        self.validate()

    def validate(self):
        if self.algo not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algo!r}")
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        if self.algo in LIST_ONLY and self.family != "list":
            raise ConfigError(
                f"list-ranking algorithm {self.algo!r} requires --family list")
        if self.reps < 1:
            raise ConfigError("--reps must be at least 1")
        if self.k < 1:
            raise ConfigError("--k must be at least 1")
        if not 0 < self.density <= 1:
            raise ConfigError(f"--density must be in (0, 1], got {self.density}")
        if self.threads is not None and self.blocks is not None:
            raise ConfigError("give either --threads or --blocks, not both")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("--threads must be positive")
        if self.blocks is not None and min(self.blocks) < 1:
            raise ConfigError("--blocks must be positive")
        if any(n < 1 for n in self.sizes):
            raise ConfigError("--n must be positive")
        for p in self.requested_thread_counts():
            if self.algo == "rs48" and p > P48_MAX_THREADS:
                raise ConfigError(
                    f"rs48 cannot run with {p} threads "
                    f"(48-bit packing caps at {P48_MAX_THREADS})")

    def requested_thread_counts(self):
        if self.blocks is not None:
            return [b * BLOCK_SIZE for b in self.blocks]
        return [self.threads if self.threads is not None else DEFAULT_P]


def build_parser():
    ap = argparse.ArgumentParser(
        prog="simtgraph-bench",
        description="Benchmark and verify list ranking / connected "
                    "components on the simulated or threaded kernel machine.")
    ap.add_argument("--algo", required=True, choices=ALGORITHMS)
    ap.add_argument("--family", default="list", choices=FAMILIES)
    ap.add_argument("--k", type=int, default=2,
                    help="max children per vertex for --family tree")
    ap.add_argument("--density", type=float, default=0.01,
                    help="edge density for --family random")
    ap.add_argument("--n", action="append", type=int, dest="sizes",
                    metavar="N", help="input size; repeat for a sweep")
    ap.add_argument("--threads", type=int, default=None,
                    help=f"virtual thread count p (default {DEFAULT_P})")
    ap.add_argument("--blocks", action="append", type=int,
                    help=f"thread blocks of {BLOCK_SIZE}; repeat for a "
                         "speedup sweep (excludes --threads)")
    ap.add_argument("--backend", default="simulated",
                    choices=("simulated", "threaded"))
    ap.add_argument("--reps", type=int, default=20,
                    help="repetitions per size (default 20)")
    ap.add_argument("--seed", type=int,
                    default=int(os.environ.get(SEED_ENV, "0")),
                    help=f"base seed (default ${SEED_ENV} or 0)")
    ap.add_argument("--out", default=None, help="CSV path (default stdout)")
    ap.add_argument("--verify", action="store_true",
                    help="check results against the sequential oracles "
                         "instead of benchmarking")
    ap.add_argument("--plot-data", default=None, metavar="PATH",
                    help="also derive time-per-element / speedup-vs-blocks CSV")
    ap.add_argument("--workers", type=int, default=None,
                    help="host threads for the threaded backend")
    return ap


def config_from_args(args):
    return BenchConfig(args.algo, args.sizes or [], family=args.family,
                       k=args.k, density=args.density, threads=args.threads,
                       blocks=args.blocks, backend=args.backend,
                       reps=args.reps, seed=args.seed, out=args.out,
                       verify=args.verify, plot_data=args.plot_data,
                       workers=args.workers)


# ---------------------------------------------------------------------------
# running one experiment

def make_input(cfg, n, seed):
    """Generate the input object for one experiment."""
    if cfg.family == "list":
        sl = gen_list(n, seed=seed)
        return sl if cfg.algo in LIST_ONLY else list_to_graph(sl)
    if cfg.algo in LIST_ONLY:
        raise ConfigError(f"{cfg.algo} requires --family list")
    if cfg.family == "tree":
        return gen_tree_graph(n, cfg.k, seed=seed)
    return gen_random_graph(n, cfg.density, seed=seed)


def effective_threads(cfg, p, n):
    """Clamp the virtual thread count to the input size."""
    p = max(1, min(p, n))
    if cfg.algo == "rs_even" and n % p:
        raise ConfigError(
            f"rs_even needs the thread count to divide n ({p} does not divide {n})")
    return p


def run_algorithm(algo, data, p, backend, accounting, seed, workers=None):
    """Run one algorithm; returns (output array, ExecStats or None, wall)."""
    kw = dict(backend=backend, accounting=accounting, seed=seed,
              block_size=BLOCK_SIZE, workers=workers)
    if algo == "seq_lr":
        t0 = time.perf_counter()
        out = seq_rank(data)
        return out, None, time.perf_counter() - t0
    if algo == "seq_cc":
        t0 = time.perf_counter()
        out = seq_components(data)
        return out, None, time.perf_counter() - t0
    if algo == "wyllie":
        out, stats = wyllie_rank(data, p, variant="multi_kernel", **kw)
    elif algo == "rs48":
        out, stats = rs_rank(data, p, packing=Packing.P48, **kw)
    elif algo == "rs64":
        out, stats = rs_rank(data, p, packing=Packing.P64, **kw)
    elif algo == "rs_even":
        out, stats = rs_rank_even(data, p, **kw)
    elif algo == "sv":
        out, stats = sv_components(data, p, **kw)
    else:
        raise ConfigError(f"unknown algorithm {algo!r}")
    return out, stats, stats.wall_time


def _row(cfg, n, p, blocks, rep, kernel, **vals):
    row = {"algo": cfg.algo, "family": cfg.family, "n": n, "p": p,
           "blocks": blocks, "backend": cfg.backend, "rep": rep,
           "kernel": kernel}
    row.update(vals)
    return row


def _rows_for_run(cfg, n, p, blocks, rep, out, stats, wall):
    """Per-kernel rows plus the total row for one repetition."""
    rows = []
    wall_s = "" if wall is None else f"{wall:.6f}"
    tpe = "" if wall is None else f"{wall / n:.9f}"
    if stats is None:
        rows.append(_row(cfg, n, p, blocks, rep, "total", launches=0,
                         wall_time=wall_s, time_per_element=tpe))
        return rows
    for name, c in sorted(stats.per_kernel().items()):
        rows.append(_row(cfg, n, p, blocks, rep, name,
                         launches=c.launches, reads=c.reads, writes=c.writes,
                         transactions=c.transactions, bytes=c.bytes_moved,
                         divergence=c.divergence_events))
    t = stats.totals()
    total = _row(cfg, n, p, blocks, rep, "total",
                 launches=t.launches, reads=t.reads, writes=t.writes,
                 transactions=t.transactions, bytes=t.bytes_moved,
                 divergence=t.divergence_events, wall_time=wall_s,
                 time_per_element=tpe)
    rounds = stats.rounds or stats.meta.get("rounds", 0)
    if rounds:
        total["rounds"] = rounds
    if cfg.backend == "simulated":
        total["sm_steps"] = stats.sm_steps()
    spl = stats.meta.get("splitter_set")
    if spl is not None:
        ss = sublist_stats(spl)
        total["mean_sublist"] = f"{ss.mean_len:.6f}"
        total["max_sublist"] = ss.max_len
    rows.append(total)
    return rows


def _aggregate(cfg, n, p, blocks, totals, walls):
    """Mean/stddev row over one (n, blocks) group's total rows."""
    agg = _row(cfg, n, p, blocks, "agg", "total")
    for col in MEAN_COLS:
        vals = [r[col] for r in totals if r.get(col, "") != ""]
        if vals:
            agg[col] = f"{statistics.fmean(vals):.3f}"
    if walls:
        mean = statistics.fmean(walls)
        sd = statistics.stdev(walls) if len(walls) > 1 else 0.0
        agg["wall_time"] = f"{mean:.6f}"
        agg["wall_stddev"] = f"{sd:.6f}"
        agg["time_per_element"] = f"{mean / n:.9f}"
    return agg


def run_benchmark(cfg):
    """Execute the configured sweep; returns the CSV rows as dicts."""
    rows = []
    if not cfg.sizes:
        print("warning: no sizes given (--n); emitting header only",
              file=sys.stderr)
    accounting = "full" if cfg.backend == "simulated" else "counts"
    for n in cfg.sizes:
        for p_req in cfg.requested_thread_counts():
            if cfg.algo in ("seq_lr", "seq_cc"):
                p_eff, blocks = "", ""
            else:
                p_eff = effective_threads(cfg, p_req, n)
                blocks = -(-p_eff // BLOCK_SIZE)
            totals, walls = [], []
            for rep in range(cfg.reps):
                seed = cfg.seed + rep
                data = make_input(cfg, n, seed)
                out, stats, wall = run_algorithm(
                    cfg.algo, data, p_eff, cfg.backend, accounting, seed,
                    workers=cfg.workers)
                run_rows = _rows_for_run(cfg, n, p_eff, blocks, rep, out,
                                         stats, wall)
                totals.append(run_rows[-1])
                if wall is not None:
                    walls.append(wall)
                rows.extend(run_rows)
            rows.append(_aggregate(cfg, n, p_eff, blocks, totals, walls))
    return rows


# ---------------------------------------------------------------------------
# verification

def _expected_and_got(algo, data, out, n):
    """Oracle pairing for one run; seq baselines get self-consistency checks."""
    if algo == "seq_lr":
        # the oracle itself: its output must be a permutation of 0..n-1
        return np.arange(n, dtype=np.int64), np.sort(np.asarray(out))
    if algo == "seq_cc":
        return canonical_labels(np.asarray(out)), np.asarray(out)
    if algo == "sv":
        return seq_components(data), np.asarray(out)
    return seq_rank(data), np.asarray(out)


def verify(cfg):
    """Cross-check every configured run against the sequential oracle."""
    if not cfg.sizes:
        print("warning: no sizes given (--n); verification passes vacuously")
        return 0
    accounting = "counts"
    for n in cfg.sizes:
        for p_req in cfg.requested_thread_counts():
            p_eff = (1 if cfg.algo in ("seq_lr", "seq_cc")
                     else effective_threads(cfg, p_req, n))
            for rep in range(cfg.reps):
                seed = cfg.seed + rep
                data = make_input(cfg, n, seed)
                out, _, _ = run_algorithm(cfg.algo, data, p_eff, cfg.backend,
                                          accounting, seed,
                                          workers=cfg.workers)
                expected, got = _expected_and_got(cfg.algo, data, out, n)
                i = compare_arrays(expected, got)
                if i >= 0:
                    print(f"FAIL {cfg.algo} n={n} rep={rep}: first mismatch "
                          f"at index {i} (expected {expected[i]}, "
                          f"got {got[i]})")
                    return 1
        print(f"PASS {cfg.algo} n={n} x{cfg.reps} reps ({cfg.backend})")
    return 0


# ---------------------------------------------------------------------------
# derived plot data

PLOT_COLUMNS = ["algo", "family", "n", "p", "blocks", "backend",
                "metric", "per_element", "speedup"]


def emit_plot_data(rows):
    """Derive time-per-element and speedup-vs-blocks series from bench rows.

    Uses the aggregate rows only.  The speedup baseline is the blocks=1
    aggregate of the same (algo, family, n, backend) group; wall-clock
    backends are compared by mean wall time, the simulated backend by
    simulated machine steps (kernel steps weighted by how many waves of
    blocks the modeled chip needs).
    """
    agg = [r for r in rows if r.get("rep") == "agg" and r.get("blocks") != ""]
    series = {}
    for r in agg:
        key = (r["algo"], r["family"], r["n"], r["backend"])
        series.setdefault(key, []).append(r)
    out = []
    for key in sorted(series, key=str):
        group = sorted(series[key], key=lambda r: int(r["blocks"]))
        base = [r for r in group if int(r["blocks"]) == 1]
        if not base:
            raise ValueError(
                f"missing blocks=1 baseline for group {key}; cannot compute "
                "speedup")

        def metric(r):
            if r.get("wall_time", "") != "":
                return float(r["wall_time"])
            return float(r["sm_steps"])

        m0 = metric(base[0])
        for r in group:
            m = metric(r)
            out.append({
                "algo": r["algo"], "family": r["family"], "n": r["n"],
                "p": r["p"], "blocks": r["blocks"], "backend": r["backend"],
                "metric": f"{m:.6f}",
                "per_element": f"{m / int(r['n']):.9f}",
                "speedup": f"{m0 / m:.6f}",
            })
    return out


# ---------------------------------------------------------------------------
# entry point

def write_csv(rows, columns, path=None):
    f = open(path, "w", newline="") if path else sys.stdout
    try:
        w = csv.DictWriter(f, fieldnames=columns, restval="")
        w.writeheader()
        w.writerows(rows)
    finally:
        if path:
            f.close()


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        if cfg.verify:
            return verify(cfg)
        rows = run_benchmark(cfg)
        write_csv(rows, COLUMNS, cfg.out)
        if cfg.plot_data:
            write_csv(emit_plot_data(rows), PLOT_COLUMNS, cfg.plot_data)
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
