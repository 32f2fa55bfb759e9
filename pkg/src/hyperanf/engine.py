"""HyperANF: iterate counter unions over successor lists until no counter changes.

Each iteration reads only the previous-iteration buffer and writes the
per-node rows of a second buffer, so node ranges can be processed by any
number of worker threads in any order with bit-identical results.  Work is
split into contiguous node-range tasks (multiples of 64 nodes, so every task
also owns whole 64-counter blocks of the cached harmonic sums) which workers
claim from a shared cursor.
"""

from __future__ import annotations

import itertools
import json
import os
import tempfile
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .graph import Graph
from .sketch import (
    CounterArray,
    SketchParams,
    _broadword_union,
    _estimate_row,
    _seed_counters,
    register_width_for,
)

BLOCK = 64
TARGET_TASKS = 4096

STABILISATION = "stabilisation"
THRESHOLD = "threshold"

THRESHOLD_WARNING = (
    "terminating on a relative-increment threshold instead of stabilisation: "
    "on graphs with narrow tubes between large components (e.g. two k-cliques "
    "joined by a one-way path) the neighbourhood function jumps by ~k^2 at the "
    "very last iteration, so the cdf, effective diameter and spid computed "
    "from a truncated run can be arbitrarily wrong"
)


class UnsafeTerminationWarning(UserWarning):
    pass


class IterationLimitError(RuntimeError):
    pass


@dataclass(frozen=True)
class EngineConfig:
    b: int = 7
    seed: int = 0
    threads: int = 1
    task_size: int | None = None
    systolic_threshold: float = 0.25
    termination: str = STABILISATION
    eps_inc: float | None = None
    max_iterations: int = 10_000
    spill_to_disk: bool = False
    r: int | None = None
    # both switches only trade time; outputs are identical either way
    skip_unmodified: bool = True
    systolic: bool = True

    def __post_init__(self) -> None:
        if not 0 < self.systolic_threshold <= 1:
            raise ValueError("systolic_threshold must be in (0, 1]")
        if self.task_size is not None and self.task_size < 1:
            raise ValueError("task_size must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.termination == THRESHOLD:
            if self.eps_inc is None or not self.eps_inc > 0:
                raise ValueError("threshold termination needs a positive eps_inc")
        elif self.termination != STABILISATION:
            raise ValueError(f"unknown termination mode {self.termination!r}")

    @property
    def termination_label(self) -> str:
        if self.termination == THRESHOLD:
            return f"{THRESHOLD}({self.eps_inc:g})"
        return STABILISATION


@dataclass(frozen=True)
class IterationReport:
    sum: float
    modified: int
    systolic: bool = False


@dataclass(frozen=True)
class NfEstimate:
    """Estimated neighbourhood function ``N(0..T)`` and run metadata."""

    values: tuple[float, ...]
    n: int
    m: int
    seed: int
    termination: str = STABILISATION
    modified: tuple[int, ...] = ()
    wall_time: float = field(default=0.0, compare=False)

    @property
    def T(self) -> int:
        return len(self.values) - 1

    def to_json_dict(self) -> dict:
        return {
            "exact": False,
            "n": self.n,
            "m": self.m,
            "seed": self.seed,
            "termination": self.termination,
            "iterations": self.T,
            "values": list(self.values),
            "modified": list(self.modified),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json_dict(cls, d: dict) -> NfEstimate:
        return cls(
            values=tuple(float(v) for v in d["values"]),
            n=int(d["n"]),
            m=int(d.get("m", 0)),
            seed=int(d.get("seed", 0)),
            termination=d.get("termination", STABILISATION),
            modified=tuple(int(v) for v in d.get("modified", ())),
        )

    def to_tsv(self) -> str:
        return "".join(f"{t}\t{v!r}\n" for t, v in enumerate(self.values))


# --------------------------------------------------------------------------
# kernels


@njit(nogil=True, cache=True)
def _refresh_blocks(lo, hi, words, modified, m, r, alpha, pow2neg, block_sums):
    for start in range(lo, hi, 64):
        end = min(start + 64, hi)
        dirty = False
        for v in range(start, end):
            if modified[v]:
                dirty = True
                break
        if dirty:
            s = 0.0
            for v in range(start, end):
                s += _estimate_row(words[v], m, r, alpha, pow2neg)
            block_sums[start // 64] = s


@njit(nogil=True, cache=True)
def _step_task(
    lo, hi, offsets, succ, cur, nxt, mod_prev, mod_next, signalled, systolic, skip,
    high, low, shift, m, r, alpha, pow2neg, block_sums,
):
    z = np.empty(cur.shape[1], dtype=np.uint64)
    count = 0
    for v in range(lo, hi):
        nxt[v, :] = cur[v, :]
        if systolic and not signalled[v]:
            mod_next[v] = False
            continue
        changed = False
        row = nxt[v]
        for e in range(offsets[v], offsets[v + 1]):
            w = succ[e]
            if skip and not mod_prev[w]:
                continue
            if _broadword_union(row, cur[w], high, low, shift, z):
                changed = True
        mod_next[v] = changed
        if changed:
            count += 1
    _refresh_blocks(lo, hi, nxt, mod_next, m, r, alpha, pow2neg, block_sums)
    return count


@njit(nogil=True, cache=True)
def _signal_predecessors(t_offsets, t_succ, modified, signalled):
    signalled[:] = False
    for w in range(modified.shape[0]):
        if modified[w]:
            for e in range(t_offsets[w], t_offsets[w + 1]):
                signalled[t_succ[e]] = True


# --------------------------------------------------------------------------
# state


def default_task_size(n: int) -> int:
    size = max(BLOCK, -(-n // TARGET_TASKS))
    return -(-size // BLOCK) * BLOCK


class EngineState:
    """Mutable run state; owned by a single controller."""

    def __init__(self, g: Graph, cfg: EngineConfig):
        self.graph = g
        self.cfg = cfg
        r = cfg.r if cfg.r is not None else register_width_for(g.n)
        self.params = SketchParams(b=cfg.b, r=r, seed=cfg.seed)
        n = g.n
        self._tmpdir = tempfile.TemporaryDirectory(prefix="hyperanf-") if cfg.spill_to_disk else None
        self.current = CounterArray(self.params, n, self._buffer("a"))
        self.next = CounterArray(self.params, n, self._buffer("b"))
        _seed_counters(self.current.words, self.params.seed_mix, self.params.b, self.params.r)
        # every counter is fresh after seeding
        self.modified = np.ones(n, dtype=np.bool_)
        self._mod_next = np.zeros(n, dtype=np.bool_)
        self.signalled = np.zeros(n, dtype=np.bool_)
        self.systolic_active = False
        self._transpose: Graph | None = None
        self.block_sums = np.zeros(-(-n // BLOCK), dtype=np.float64)
        size = cfg.task_size if cfg.task_size is not None else default_task_size(n)
        size = -(-size // BLOCK) * BLOCK
        self.tasks = [(lo, min(lo + size, n)) for lo in range(0, n, size)]
        self._pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 and len(self.tasks) > 1 else None
        self.t = 0
        self.raw_sums: list[float] = []
        self.modified_counts: list[int] = []
        self._started = time.perf_counter()
        p = self.params
        for lo, hi in self.tasks:
            _refresh_blocks(lo, hi, self.current.words, self.modified, p.m, p.r, p.alpha, p.pow2neg, self.block_sums)
        if n:
            self.raw_sums.append(float(self.block_sums.sum()))

    def _buffer(self, name: str) -> np.ndarray:
        shape = (self.graph.n, self.params.words_per_counter)
        if self._tmpdir is None or self.graph.n == 0:
            return np.zeros(shape, dtype=np.uint64)
        path = os.path.join(self._tmpdir.name, f"counters-{name}.bin")
        return np.memmap(path, dtype=np.uint64, mode="w+", shape=shape)

    @property
    def transpose(self) -> Graph:
        if self._transpose is None:
            self._transpose = self.graph.transpose()
        return self._transpose

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None
        if self._tmpdir is not None:
            self.current.words = np.array(self.current.words)
            self.next.words = np.array(self.next.words)
            self._tmpdir.cleanup()
            self._tmpdir = None

    def __enter__(self) -> EngineState:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _run_tasks(self, fn) -> int:
        ntasks = len(self.tasks)
        if self._pool is None:
            return sum(fn(*task) for task in self.tasks)
        # next() on itertools.count is atomic under the GIL
        cursor = itertools.count()

        def worker() -> int:
            done = 0
            while (i := next(cursor)) < ntasks:
                done += fn(*self.tasks[i])
            return done

        futures = [self._pool.submit(worker) for _ in range(self.cfg.threads)]
        return sum(f.result() for f in futures)

    def step(self) -> IterationReport:
        g = self.graph
        p = self.params
        cur, nxt = self.current.words, self.next.words
        systolic = self.systolic_active
        mod_prev, mod_next = self.modified, self._mod_next

        def task(lo: int, hi: int) -> int:
            return _step_task(
                lo, hi, g.offsets, g.successors, cur, nxt, mod_prev, mod_next,
                self.signalled, systolic, self.cfg.skip_unmodified,
                p.high_bits, p.low_bits, p.r - 1, p.m, p.r, p.alpha, p.pow2neg, self.block_sums,
            )

        count = self._run_tasks(task)
        self.current, self.next = self.next, self.current
        self.modified, self._mod_next = mod_next, mod_prev
        self.t += 1
        self.modified_counts.append(count)
        total = float(self.block_sums.sum()) if g.n else 0.0
        self.raw_sums.append(total)

        if self.cfg.systolic and not self.systolic_active and count < self.cfg.systolic_threshold * g.n:
            self.systolic_active = True
        if self.systolic_active:
            tg = self.transpose
            _signal_predecessors(tg.offsets, tg.successors, self.modified, self.signalled)
        return IterationReport(sum=total, modified=count, systolic=systolic)

    def clamped_values(self) -> list[float]:
        return list(itertools.accumulate(self.raw_sums, max))


def init(g: Graph, cfg: EngineConfig) -> EngineState:
    """Seed counter ``v`` with item ``v`` for every node."""
    return EngineState(g, cfg)


def step(state: EngineState) -> IterationReport:
    """One HyperANF iteration over all (or all signalled) nodes."""
    return state.step()


def run_to_stabilisation(state: EngineState) -> NfEstimate:
    """Iterate until no counter changes (or, unsafely, until a small relative increment)."""
    cfg = state.cfg
    threshold = cfg.termination == THRESHOLD
    if threshold:
        warnings.warn(THRESHOLD_WARNING, UnsafeTerminationWarning, stacklevel=2)
    n = state.graph.n
    if n:
        while True:
            if state.t >= cfg.max_iterations:
                raise IterationLimitError(
                    f"no stabilisation after {cfg.max_iterations} iterations on n={n}"
                )
            rep = state.step()
            if rep.modified == 0:
                state.raw_sums.pop()
                break
            if threshold:
                prev, cur = state.clamped_values()[-2:]
                if prev > 0 and (cur - prev) / prev < cfg.eps_inc:
                    break
    return NfEstimate(
        values=tuple(state.clamped_values()),
        n=n,
        m=state.params.m,
        seed=state.params.seed,
        termination=cfg.termination_label,
        modified=tuple(state.modified_counts),
        wall_time=time.perf_counter() - state._started,
    )


def estimate_nf(g: Graph, cfg: EngineConfig | None = None, **kwargs) -> NfEstimate:
    """Run HyperANF on ``g`` from scratch and release its resources."""
    cfg = cfg if cfg is not None else EngineConfig(**kwargs)
    with init(g, cfg) as state:
        return run_to_stabilisation(state)

