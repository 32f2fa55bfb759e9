"""Command-line driver.

Exit codes: 0 success, 1 usage error, 2 I/O or parse error, 3 size guard exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

from . import __version__
from .engine import THRESHOLD, EngineConfig, NfEstimate, UnsafeTerminationWarning, estimate_nf
from .graph import GraphFormatError, gen_clique_path, gen_uniform_random, load_graph
from .oracle import ExactNf, GuardExceeded, MAX_NODES, MAX_WORK, exact_nf
from .stats import (
    DEFAULT_ALPHA,
    aggregate_runs,
    cdf_from_nf,
    diameter_interval,
    distribution_from_cdf,
    effective_diameter,
    precision_calc,
    sigma_confidence,
)

log = logging.getLogger("hyperanf")

EXIT_USAGE = 1
EXIT_IO = 2
EXIT_GUARD = 3

_OUTPUT_KEYS = ("output", "tsv", "cdf_tsv")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hyperanf", description="Approximate neighbourhood functions and distance statistics.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def graph_args(sp):
        sp.add_argument("graph", help="edge-list file or HBG1 CSR cache")
        sp.add_argument("--symmetrise", action="store_true", help="add the reverse of every arc")

    def out_args(sp, tsv=True):
        sp.add_argument("-o", "--output", help="write the JSON report here (default: stdout)")
        if tsv:
            sp.add_argument("--tsv", help="also write (t, value) TSV here")

    def engine_args(sp):
        sp.add_argument("--b", type=int, default=7, help="bucket bits, m = 2^b registers (default 7)")
        sp.add_argument("--seed", type=_seed, default=0)
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        sp.add_argument("--task-size", type=int, default=None, help="nodes per task")
        sp.add_argument("--max-iterations", type=int, default=10_000)
        sp.add_argument("--spill-to-disk", action="store_true", help="keep counter buffers in temporary files")
        sp.add_argument(
            "--unsafe-threshold", type=float, default=None, metavar="EPS",
            help="stop when the relative increment drops below EPS (unsound; for demonstration)",
        )

    sp = sub.add_parser("nf", help="estimate the neighbourhood function")
    graph_args(sp)
    engine_args(sp)
    out_args(sp)

    sp = sub.add_parser("exact", help="exact neighbourhood function by all-sources BFS")
    graph_args(sp)
    sp.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    sp.add_argument("--max-nodes", type=int, default=MAX_NODES)
    sp.add_argument("--max-work", type=int, default=MAX_WORK, help="guard on n * arcs")
    out_args(sp)

    sp = sub.add_parser("stats", help="cdf, effective diameter, average distance and spid of an NF report")
    sp.add_argument("nf", help="JSON report produced by 'nf' or 'exact'")
    sp.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    sp.add_argument("--epsilon", type=float, default=0.0, help="relative error of every NF point")
    sp.add_argument("--delta", type=float, default=0.0, help="failure probability of every NF point")
    sp.add_argument("-o", "--output")
    sp.add_argument("--cdf-tsv", help="write (t, H(t)) TSV here")

    sp = sub.add_parser("gen", help="write a test graph as an edge list")
    gsub = sp.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    cp = gsub.add_parser("clique-path", help="two k-cliques joined by a one-way path of l nodes")
    cp.add_argument("-k", type=int, required=True)
    cp.add_argument("-l", type=int, required=True)
    cp.add_argument("-o", "--output")
    rp = gsub.add_parser("random", help="uniform random out-degree-d digraph")
    rp.add_argument("-n", type=int, required=True)
    rp.add_argument("-d", type=float, required=True)
    rp.add_argument("--seed", type=_seed, default=0)
    rp.add_argument("-o", "--output")

    sp = sub.add_parser("multirun", help="independent seeded runs and their derived statistics")
    graph_args(sp)
    engine_args(sp)
    sp.add_argument("--runs", type=int, default=100)
    sp.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    sp.add_argument("-o", "--output")

    sp = sub.add_parser("precision", help="registers, relative standard deviation, confidence and memory")
    sp.add_argument("--m", type=int)
    sp.add_argument("--eta", type=float)
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--n", type=int, help="node count for the memory estimate")
    sp.add_argument("-o", "--output")

    sp = sub.add_parser("replay", help="re-run the manifest embedded in a report")
    sp.add_argument("report")
    sp.add_argument("-o", "--output", help="write the reproduced report here (default: stdout)")
    return p


# --------------------------------------------------------------------------
# helpers


def _manifest(ns: argparse.Namespace) -> dict:
    params = {k: v for k, v in vars(ns).items() if k not in _OUTPUT_KEYS and k not in ("command", "verbose")}
    outputs = {k: getattr(ns, k) for k in _OUTPUT_KEYS if getattr(ns, k, None) is not None}
    return {"command": ns.command, "graph": getattr(ns, "graph", None), "params": params, "outputs": outputs}


def _dump(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _engine_config(ns: argparse.Namespace, seed: int) -> EngineConfig:
    if ns.threads < 1:
        raise UsageError("--threads must be >= 1")
    kwargs = dict(
        b=ns.b, seed=seed, threads=ns.threads, task_size=ns.task_size,
        max_iterations=ns.max_iterations, spill_to_disk=ns.spill_to_disk,
    )
    if ns.unsafe_threshold is not None:
        kwargs.update(termination=THRESHOLD, eps_inc=ns.unsafe_threshold)
    try:
        return EngineConfig(**kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _run(g, cfg: EngineConfig) -> NfEstimate:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", UnsafeTerminationWarning)
        est = estimate_nf(g, cfg)
    for w in caught:
        print(f"WARNING: {w.message}", file=sys.stderr)
    log.info("seed %d: %d iterations in %.3fs", cfg.seed, est.T, est.wall_time)
    return est


def _load_nf(path: str):
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphFormatError(f"not a JSON report: {exc}", path) from exc
    if "values" not in d:
        raise GraphFormatError("report has no 'values' field", path)
    if d.get("exact"):
        return ExactNf(tuple(int(v) for v in d["values"])), d
    return NfEstimate.from_json_dict(d), d


# --------------------------------------------------------------------------
# commands


def cmd_nf(ns: argparse.Namespace) -> dict:
    cfg = _engine_config(ns, ns.seed)
    g = load_graph(ns.graph, symmetrise=ns.symmetrise)
    est = _run(g, cfg)
    if ns.tsv:
        Path(ns.tsv).write_text(est.to_tsv(), encoding="utf-8")
    return est.to_json_dict()


def cmd_exact(ns: argparse.Namespace) -> dict:
    g = load_graph(ns.graph, symmetrise=ns.symmetrise)
    ex = exact_nf(g, threads=ns.threads, max_nodes=ns.max_nodes, max_work=ns.max_work)
    if ns.tsv:
        Path(ns.tsv).write_text("".join(f"{t}\t{v}\n" for t, v in enumerate(ex.values)), encoding="utf-8")
    return ex.to_json_dict(g.n)


def cmd_stats(ns: argparse.Namespace) -> dict:
    nf, _ = _load_nf(ns.nf)
    try:
        cdf = cdf_from_nf(nf)
        dist = distribution_from_cdf(cdf)
        interval = diameter_interval(nf, ns.alpha, ns.epsilon, ns.delta)
        ed = effective_diameter(nf, ns.alpha)
        ied = effective_diameter(nf, ns.alpha, interpolated=True)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if interval.reason:
        print(f"note: {interval.reason}", file=sys.stderr)
    if ns.cdf_tsv:
        Path(ns.cdf_tsv).write_text("".join(f"{t}\t{v!r}\n" for t, v in enumerate(cdf.H)), encoding="utf-8")
    return {
        "input": ns.nf,
        "exact": isinstance(nf, ExactNf),
        "alpha": ns.alpha,
        "cdf": list(cdf.H),
        "density": list(dist.h),
        "average_distance": dist.mean,
        "variance": dist.variance,
        "spid": dist.spid,
        "effective_diameter": ed,
        "interpolated_effective_diameter": ied,
        "interval": {
            "lo": interval.lo,
            "hi": interval.hi,
            "epsilon": ns.epsilon,
            "confidence": interval.confidence,
            "reason": interval.reason,
        },
    }


def cmd_gen(ns: argparse.Namespace) -> None:
    try:
        if ns.kind == "clique-path":
            g = gen_clique_path(ns.k, ns.l)
        else:
            g = gen_uniform_random(ns.n, ns.d, ns.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if ns.output and ns.output != "-":
        g.write_edge_list(ns.output)
    else:
        src, dst = g.arcs()
        sys.stdout.write(f"# nodes {g.n} arcs {g.num_arcs}\n")
        sys.stdout.write("".join(f"{s} {d}\n" for s, d in zip(src.tolist(), dst.tolist())))


def cmd_multirun(ns: argparse.Namespace) -> dict:
    if ns.runs < 2:
        raise UsageError("--runs must be >= 2")
    _engine_config(ns, ns.seed)
    g = load_graph(ns.graph, symmetrise=ns.symmetrise)
    runs = [_run(g, _engine_config(ns, (ns.seed + i) % 2**64)) for i in range(ns.runs)]
    return aggregate_runs(runs, ns.alpha).to_json_dict(graph=ns.graph)


def cmd_precision(ns: argparse.Namespace) -> dict:
    try:
        spec = precision_calc(m=ns.m, eta=ns.eta, epsilon=ns.epsilon, delta=ns.delta, n=ns.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return {
        "m": spec.m,
        "eta": spec.eta,
        "epsilon": spec.epsilon,
        "delta": spec.delta,
        "chebyshev_confidence": spec.chebyshev_confidence,
        "vp_confidence": spec.vp_confidence,
        "sigma": {str(k): {"error": k * spec.eta, "confidence": sigma_confidence(k)} for k in (1, 2, 3)},
        "n": spec.n,
        "register_bits": spec.register_bits,
        "memory_bits": spec.memory_bits,
        "memory_gib": spec.memory_gib,
    }


_COMMANDS = {
    "nf": cmd_nf,
    "exact": cmd_exact,
    "stats": cmd_stats,
    "gen": cmd_gen,
    "multirun": cmd_multirun,
    "precision": cmd_precision,
}


def execute(ns: argparse.Namespace) -> None:
    report = _COMMANDS[ns.command](ns)
    if report is not None:
        report["manifest"] = _manifest(ns)
        _emit(_dump(report), ns.output)


def replay(ns: argparse.Namespace) -> None:
    with open(ns.report, encoding="utf-8") as fh:
        try:
            manifest = json.load(fh)["manifest"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise GraphFormatError(f"no manifest in report: {exc}", ns.report) from exc
    if manifest.get("command") not in _COMMANDS:
        raise UsageError(f"cannot replay command {manifest.get('command')!r}")
    params = dict(manifest["params"])
    outputs = manifest.get("outputs", {})
    rerun = argparse.Namespace(command=manifest["command"], verbose=False, **params)
    for key in _OUTPUT_KEYS:
        setattr(rerun, key, None)
    rerun.output = ns.output
    # keep the original output paths in the reproduced manifest
    report = _COMMANDS[rerun.command](rerun)
    rerun_out = {k: outputs[k] for k in _OUTPUT_KEYS if k in outputs}
    report["manifest"] = {**_manifest(rerun), "outputs": rerun_out}
    _emit(_dump(report), ns.output)


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        if ns.command == "replay":
            replay(ns)
        else:
            execute(ns)
    except UsageError as exc:
        print(f"hyperanf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GuardExceeded as exc:
        print(f"hyperanf: guard exceeded: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (OSError, GraphFormatError) as exc:
        print(f"hyperanf: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
