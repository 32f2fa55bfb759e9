"""Statistics derived from (estimated or exact) neighbourhood functions.

Distance cdf, density and moments, the spid (variance-to-mean ratio of the
distance distribution), effective diameters with confidence brackets,
precision/confidence calculators, and aggregation of independent runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .engine import NfEstimate
from .oracle import ExactNf

DEFAULT_ALPHA = 0.9

NfLike = Union[NfEstimate, ExactNf, Sequence[float], np.ndarray]


def nf_values(nf: NfLike) -> np.ndarray:
    vals = nf.values if isinstance(nf, (NfEstimate, ExactNf)) else nf
    arr = np.asarray(vals, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("neighbourhood function must be a non-empty sequence")
    if not arr[-1] > 0:
        raise ValueError("neighbourhood function is all zero")
    if np.any(np.diff(arr) < 0):
        raise ValueError("neighbourhood function must be non-decreasing")
    return arr


@dataclass(frozen=True)
class DistanceCdf:
    H: tuple[float, ...]


@dataclass(frozen=True)
class DistanceDistribution:
    h: tuple[float, ...]
    mean: float
    variance: float
    spid: float


def cdf_from_nf(nf: NfLike) -> DistanceCdf:
    vals = nf_values(nf)
    H = vals / vals[-1]
    H[-1] = 1.0
    return DistanceCdf(tuple(H.tolist()))


def distribution_from_cdf(cdf: DistanceCdf) -> DistanceDistribution:
    H = np.asarray(cdf.H, dtype=np.float64)
    h = np.diff(H, prepend=0.0)
    t = np.arange(len(h), dtype=np.float64)
    mean = float(np.dot(t, h))
    variance = max(float(np.dot(t * t, h)) - mean * mean, 0.0)
    spid = variance / mean if mean > 0 else 0.0
    return DistanceDistribution(tuple(h.tolist()), mean, variance, spid)


def distance_distribution(nf: NfLike) -> DistanceDistribution:
    return distribution_from_cdf(cdf_from_nf(nf))


def spid(nf: NfLike) -> float:
    """Shortest-paths index of dispersion: variance / mean of the distance distribution."""
    return distance_distribution(nf).spid


def effective_diameter(nf: NfLike, alpha: float = DEFAULT_ALPHA, interpolated: bool = False) -> float:
    """Smallest ``t`` with ``H(t) >= alpha``, optionally on the piecewise-linear NF."""
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    vals = nf_values(nf)
    H = vals / vals[-1]
    target = alpha * vals[-1]
    # a tiny slack keeps alpha = 1 from missing H(T) = 1 on rounding
    hits = np.flatnonzero(H >= alpha - 1e-12)
    t = int(hits[0])
    if not interpolated:
        return float(t)
    if t == 0:
        return 0.0
    lo, hi = vals[t - 1], vals[t]
    if hi == lo:
        return float(t - 1)
    return (t - 1) + min(max((target - lo) / (hi - lo), 0.0), 1.0)


@dataclass(frozen=True)
class DiameterInterval:
    """Bracket ``[lo, hi]`` on the effective diameter; ``None`` bound = undefined."""

    lo: int | None
    hi: int | None
    confidence: float
    reason: str = ""


def diameter_interval(
    nf: NfLike, alpha: float = DEFAULT_ALPHA, epsilon: float = 0.0, delta: float = 0.0
) -> DiameterInterval:
    """Confidence bracket on the effective diameter when every point has relative error ``epsilon``.

    ``lo`` is the largest ``t`` with ``N(t)/M <= alpha(1-2eps)``, ``hi`` the smallest
    with ``N(t)/M >= alpha(1+2eps)``; the bracket holds with probability ``1-3*delta``.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if epsilon < 0 or not 0 <= delta <= 1:
        raise ValueError("need epsilon >= 0 and delta in [0, 1]")
    vals = nf_values(nf)
    H = vals / vals[-1]
    low_thr = alpha * (1 - 2 * epsilon)
    high_thr = alpha * (1 + 2 * epsilon)
    reasons = []
    below = np.flatnonzero(H <= low_thr)
    lo = int(below[-1]) if len(below) else None
    if lo is None:
        reasons.append(f"H(0) = {H[0]:.6g} already exceeds alpha(1-2eps) = {low_thr:.6g}")
    if high_thr > 1:
        hi = None
        reasons.append(
            f"alpha(1+2eps) = {high_thr:.6g} > 1: no upper bound is obtainable at this precision"
        )
    else:
        hi = int(np.flatnonzero(H >= high_thr - 1e-12)[0])
    return DiameterInterval(lo, hi, max(1.0 - 3.0 * delta, 0.0), "; ".join(reasons))


# --------------------------------------------------------------------------
# precision calculators


def rsd_bound(m: int) -> float:
    return 1.06 / math.sqrt(m)


def registers_for(eta: float) -> int:
    """Smallest power of two ``m >= 1.12 / eta**2`` (at least 16)."""
    need = 1.12 / (eta * eta)
    return max(16, 1 << max(0, math.ceil(math.log2(need) - 1e-12)))


def sigma_confidence(k: float) -> float:
    """Vysochanskij-Petunin confidence that a unimodal estimate is within ``k`` sigmas."""
    if k <= 0:
        raise ValueError("k must be positive")
    return max(1.0 - 4.0 / (9.0 * k * k), 0.0)


def chebyshev_confidence(eta: float, epsilon: float) -> float:
    return max(1.0 - eta * eta / (epsilon * epsilon), 0.0)


def vp_confidence(eta: float, epsilon: float) -> float:
    return max(1.0 - 4.0 * eta * eta / (9.0 * epsilon * epsilon), 0.0)


@dataclass(frozen=True)
class PrecisionSpec:
    m: int
    eta: float
    epsilon: float | None = None
    delta: float | None = None
    chebyshev_confidence: float | None = None
    vp_confidence: float | None = None
    n: int | None = None
    register_bits: int | None = None
    memory_bits: int | None = None

    @property
    def memory_gib(self) -> float | None:
        return None if self.memory_bits is None else self.memory_bits / 8 / 2**30

    def sigma_error(self, k: float) -> tuple[float, float]:
        """``(k * eta, confidence)`` pair for a ``k``-sigma error bar."""
        return k * self.eta, sigma_confidence(k)


def precision_calc(
    m: int | None = None,
    eta: float | None = None,
    epsilon: float | None = None,
    delta: float | None = None,
    n: int | None = None,
) -> PrecisionSpec:
    """Fill in registers, relative standard deviation, confidences and memory.

    Give exactly one of ``m``, ``eta`` or the pair ``(epsilon, delta)``; in the
    last case ``eta`` is the largest value that reaches confidence ``1 - delta``
    under the Vysochanskij-Petunin bound.  ``epsilon`` may accompany ``m`` or
    ``eta`` to obtain confidences; ``n`` adds the register memory for ``n``
    counters of ``ceil(log2 log2 n)``-bit registers.
    """
    if (m is not None) + (eta is not None) + (delta is not None) != 1:
        raise ValueError("give exactly one of m, eta or (epsilon, delta)")
    if epsilon is not None and not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if delta is not None:
        if epsilon is None:
            raise ValueError("delta needs epsilon")
        if not 0 < delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {delta}")
        eta = 1.5 * epsilon * math.sqrt(delta)
    if m is None:
        if not 0 < eta < 1:
            raise ValueError(f"eta must lie in (0, 1), got {eta}")
        m = registers_for(eta)
    else:
        if m < 16 or m & (m - 1):
            raise ValueError(f"m must be a power of two >= 16, got {m}")
        eta = rsd_bound(m)
    cheb = vp = None
    if epsilon is not None:
        cheb = chebyshev_confidence(eta, epsilon)
        vp = vp_confidence(eta, epsilon)
        if delta is None:
            delta = 1.0 - vp
    reg = mem = None
    if n is not None:
        if n < 4:
            raise ValueError("n must be >= 4 for a memory estimate")
        reg = math.ceil(math.log2(math.log2(n)) - 1e-12)
        mem = m * n * reg
    return PrecisionSpec(
        m=m, eta=eta, epsilon=epsilon, delta=delta, chebyshev_confidence=cheb,
        vp_confidence=vp, n=n, register_bits=reg, memory_bits=mem,
    )


# --------------------------------------------------------------------------
# multiple runs


@dataclass(frozen=True)
class RunStats:
    seed: int
    average_distance: float
    spid: float
    effective_diameter: float

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "average_distance": self.average_distance,
            "spid": self.spid,
            "effective_diameter": self.effective_diameter,
        }


_FIELDS = ("average_distance", "spid", "effective_diameter")


@dataclass(frozen=True)
class MultiRunReport:
    per_run: tuple[RunStats, ...]
    mean: dict[str, float]
    stddev: dict[str, float]
    mean_nf: tuple[float, ...]
    n: int
    m: int

    @property
    def runs(self) -> int:
        return len(self.per_run)

    def to_json_dict(self, graph: str | None = None) -> dict:
        return {
            "graph": graph,
            "n": self.n,
            "m": self.m,
            "runs": self.runs,
            "per_run": [r.to_json_dict() for r in self.per_run],
            "mean": dict(self.mean),
            "stddev": dict(self.stddev),
            "mean_nf": list(self.mean_nf),
        }


def run_stats(nf: NfEstimate, alpha: float = DEFAULT_ALPHA) -> RunStats:
    dist = distance_distribution(nf)
    return RunStats(
        seed=nf.seed,
        average_distance=dist.mean,
        spid=dist.spid,
        effective_diameter=effective_diameter(nf, alpha, interpolated=True),
    )


def aggregate_runs(runs: Sequence[NfEstimate], alpha: float = DEFAULT_ALPHA) -> MultiRunReport:
    """Per-run derived statistics with their empirical mean and standard deviation."""
    if len(runs) < 2:
        raise ValueError("aggregation needs at least two runs")
    n, m = runs[0].n, runs[0].m
    for r in runs:
        if (r.n, r.m) != (n, m):
            raise ValueError(f"runs disagree on graph/registers: {(r.n, r.m)} vs {(n, m)}")
    per_run = tuple(run_stats(r, alpha) for r in runs)
    mean, std = {}, {}
    for f in _FIELDS:
        xs = np.array([getattr(s, f) for s in per_run])
        mean[f] = float(xs.mean())
        std[f] = float(xs.std(ddof=1))
    length = max(len(r.values) for r in runs)
    padded = np.array([list(r.values) + [r.values[-1]] * (length - len(r.values)) for r in runs])
    return MultiRunReport(per_run, mean, std, tuple(padded.mean(axis=0).tolist()), n, m)
