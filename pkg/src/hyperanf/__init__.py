"""Approximate neighbourhood functions with HyperLogLog counters, and the distance statistics they support."""

__version__ = "0.1.0"

from .engine import EngineConfig, NfEstimate, estimate_nf, init, run_to_stabilisation, step
from .graph import Graph, gen_clique_path, gen_uniform_random, load_edge_list, load_graph
from .oracle import ExactNf, clique_path_nf, exact_nf
from .sketch import (
    CounterArray,
    SketchParams,
    counter_add,
    counter_estimate,
    counter_union,
    naive_counter_union,
    rho_plus,
    word_max_per_block,
)
from .stats import (
    aggregate_runs,
    cdf_from_nf,
    diameter_interval,
    distance_distribution,
    distribution_from_cdf,
    effective_diameter,
    precision_calc,
    spid,
)

__all__ = [
    "CounterArray", "EngineConfig", "ExactNf", "Graph", "NfEstimate", "SketchParams",
    "aggregate_runs", "cdf_from_nf", "clique_path_nf", "counter_add", "counter_estimate",
    "counter_union", "diameter_interval", "distance_distribution", "distribution_from_cdf",
    "effective_diameter", "estimate_nf", "exact_nf", "gen_clique_path", "gen_uniform_random",
    "init", "load_edge_list", "load_graph", "naive_counter_union", "precision_calc",
    "rho_plus", "run_to_stabilisation", "spid", "step", "word_max_per_block",
]
