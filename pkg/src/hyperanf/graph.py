"""Immutable directed graphs in compressed sparse row form, plus loaders and generators."""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

CSR_MAGIC = b"HBG1"
_CSR_HEADER = struct.Struct("<4sQQ")
_MAX_ID = 2**63 - 1


class GraphFormatError(ValueError):
    """Raised when an edge list or CSR cache cannot be parsed."""

    def __init__(self, message: str, path: str | Path | None = None, lineno: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:"
            if lineno is not None:
                where += f"{lineno}:"
            where += " "
        super().__init__(where + message)
        self.path = path
        self.lineno = lineno


class Graph:
    """Directed graph on nodes ``0..n-1`` stored as offsets + successors.

    Successor lists are duplicate-free; self-loops are allowed.
    """

    __slots__ = ("n", "offsets", "successors")

    def __init__(self, n: int, offsets: np.ndarray, successors: np.ndarray, *, check: bool = True):
        self.n = int(n)
        self.offsets = np.ascontiguousarray(offsets, dtype=np.int64)
        self.successors = np.ascontiguousarray(successors, dtype=np.int64)
        if check:
            self._validate()
        self.offsets.setflags(write=False)
        self.successors.setflags(write=False)

    def _validate(self) -> None:
        if self.offsets.shape != (self.n + 1,):
            raise ValueError(f"offsets must have n+1={self.n + 1} entries")
        if self.offsets[0] != 0 or self.offsets[-1] != len(self.successors):
            raise ValueError("offsets must start at 0 and end at the arc count")
        if np.any(np.diff(self.offsets) < 0):
            raise ValueError("offsets must be non-decreasing")
        if len(self.successors) and (self.successors.min() < 0 or self.successors.max() >= self.n):
            raise ValueError("successor id out of range")
        src = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.offsets))
        keys = src * max(self.n, 1) + self.successors
        if len(np.unique(keys)) != len(keys):
            raise ValueError("duplicate arcs")

    @classmethod
    def from_arcs(cls, n: int, src, dst) -> Graph:
        """Build a graph from parallel arrays of arc endpoints; duplicates collapse."""
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if src.shape != dst.shape:
            raise ValueError("src and dst must have equal length")
        if len(src) and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
            raise ValueError(f"arc endpoint out of range for n={n}")
        keys = np.unique(src * max(n, 1) + dst)
        src, dst = np.divmod(keys, max(n, 1))
        offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=offsets[1:])
        return cls(n, offsets, dst, check=False)

    @property
    def num_arcs(self) -> int:
        return len(self.successors)

    def outdegrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def successors_of(self, v: int) -> np.ndarray:
        return self.successors[self.offsets[v] : self.offsets[v + 1]]

    def arcs(self) -> tuple[np.ndarray, np.ndarray]:
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.outdegrees())
        return src, self.successors.copy()

    def arc_set(self) -> set[tuple[int, int]]:
        s, d = self.arcs()
        return set(zip(s.tolist(), d.tolist()))

    def transpose(self) -> Graph:
        src, dst = self.arcs()
        return Graph.from_arcs(self.n, dst, src)

    def symmetrise(self) -> Graph:
        src, dst = self.arcs()
        return Graph.from_arcs(self.n, np.concatenate([src, dst]), np.concatenate([dst, src]))

    def relabel(self, perm: np.ndarray) -> Graph:
        """Graph with node ``v`` renamed ``perm[v]``."""
        perm = np.asarray(perm, dtype=np.int64)
        src, dst = self.arcs()
        return Graph.from_arcs(self.n, perm[src], perm[dst])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.successors, other.successors)
        )

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, arcs={self.num_arcs})"

    # -- serialisation ----------------------------------------------------

    def write_edge_list(self, path: str | Path) -> None:
        src, dst = self.arcs()
        with open(path, "w", encoding="ascii") as fh:
            fh.write(f"# nodes {self.n} arcs {self.num_arcs}\n")
            for s, d in zip(src.tolist(), dst.tolist()):
                fh.write(f"{s} {d}\n")

    def to_csr_bytes(self) -> bytes:
        header = _CSR_HEADER.pack(CSR_MAGIC, self.n, self.num_arcs)
        return header + self.offsets.astype("<i8").tobytes() + self.successors.astype("<i8").tobytes()

    def save_csr(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_csr_bytes())

    @classmethod
    def from_csr_bytes(cls, data: bytes, path: str | Path | None = None) -> Graph:
        if len(data) < _CSR_HEADER.size:
            raise GraphFormatError("truncated CSR header", path)
        magic, n, arcs = _CSR_HEADER.unpack_from(data)
        if magic != CSR_MAGIC:
            raise GraphFormatError(f"bad CSR magic {magic!r}", path)
        expected = _CSR_HEADER.size + 8 * (n + 1) + 8 * arcs
        if len(data) != expected:
            raise GraphFormatError(f"CSR length {len(data)} does not match header ({expected})", path)
        off = np.frombuffer(data, dtype="<i8", count=n + 1, offset=_CSR_HEADER.size)
        succ = np.frombuffer(data, dtype="<i8", count=arcs, offset=_CSR_HEADER.size + 8 * (n + 1))
        try:
            return cls(n, off.astype(np.int64), succ.astype(np.int64))
        except ValueError as exc:
            raise GraphFormatError(str(exc), path) from exc

    @classmethod
    def load_csr(cls, path: str | Path) -> Graph:
        return cls.from_csr_bytes(Path(path).read_bytes(), path)


# --------------------------------------------------------------------------
# loaders


def load_edge_list(path: str | Path, symmetrise: bool = False, n: int | None = None) -> Graph:
    """Parse a whitespace-separated ``src dst`` edge list ('#' starts a comment line).

    ``n`` defaults to one more than the largest id seen.
    """
    src: list[int] = []
    dst: list[int] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphFormatError(f"expected 'src dst', got {line!r}", path, lineno)
            try:
                s, d = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphFormatError(f"non-integer node id in {line!r}", path, lineno) from None
            if s < 0 or d < 0:
                raise GraphFormatError(f"negative node id in {line!r}", path, lineno)
            if s > _MAX_ID or d > _MAX_ID or (n is not None and max(s, d) >= n):
                raise GraphFormatError(f"node id overflow in {line!r}", path, lineno)
            src.append(s)
            dst.append(d)
    size = n if n is not None else (max(max(src), max(dst)) + 1 if src else 0)
    s_arr = np.array(src, dtype=np.int64)
    d_arr = np.array(dst, dtype=np.int64)
    if symmetrise:
        s_arr, d_arr = np.concatenate([s_arr, d_arr]), np.concatenate([d_arr, s_arr])
    return Graph.from_arcs(size, s_arr, d_arr)


def load_graph(path: str | Path, symmetrise: bool = False) -> Graph:
    """Load a CSR cache (detected by its magic) or an edge list."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == CSR_MAGIC:
        g = Graph.load_csr(path)
        return g.symmetrise() if symmetrise else g
    return load_edge_list(path, symmetrise=symmetrise)


# --------------------------------------------------------------------------
# generators


def gen_clique_path(k: int, l: int) -> Graph:
    """Two complete ``k``-node digraphs joined by a one-way path of ``l`` nodes.

    Nodes ``[0, k)`` form clique A, ``[k, k+l)`` the path and ``[k+l, 2k+l)``
    clique B.  Every node of A points to the first path node and the last
    path node points to every node of B.
    """
    if k < 1 or l < 1:
        raise ValueError(f"need k >= 1 and l >= 1, got k={k}, l={l}")
    a = np.arange(k, dtype=np.int64)
    b = a + k + l
    ii, jj = np.meshgrid(a, a, indexing="ij")
    off_diag = ii != jj
    ca_s, ca_d = ii[off_diag], jj[off_diag]
    path = np.arange(k, k + l, dtype=np.int64)
    src = np.concatenate([ca_s, ca_s + k + l, path[:-1], a, np.full(k, k + l - 1)])
    dst = np.concatenate([ca_d, ca_d + k + l, path[1:], np.full(k, k), b])
    return Graph.from_arcs(2 * k + l, src, dst)


def gen_uniform_random(n: int, d: float, seed: int = 0) -> Graph:
    """Each node gets ``round(d)`` distinct successors other than itself, uniformly."""
    if n < 1 or d < 0:
        raise ValueError(f"need n >= 1 and d >= 0, got n={n}, d={d}")
    deg = int(math.floor(d + 0.5))
    if deg >= n:
        raise ValueError(f"out-degree {deg} impossible without self-loops on {n} nodes")
    rng = np.random.default_rng(int(seed) & (2**64 - 1))
    if deg == 0:
        return Graph(n, np.zeros(n + 1, dtype=np.int64), np.zeros(0, dtype=np.int64))
    nodes = np.arange(n, dtype=np.int64)
    if 4 * deg > n:
        draws = np.stack([rng.choice(n - 1, deg, replace=False) for _ in range(n)])
    else:
        draws = rng.integers(0, n - 1, size=(n, deg), dtype=np.int64)
        while True:
            srt = np.sort(draws, axis=1)
            bad = np.flatnonzero(np.any(srt[:, 1:] == srt[:, :-1], axis=1))
            if not len(bad):
                break
            draws[bad] = rng.integers(0, n - 1, size=(len(bad), deg), dtype=np.int64)
    draws = draws + (draws >= nodes[:, None])
    return Graph.from_arcs(n, np.repeat(nodes, deg), draws.ravel())
