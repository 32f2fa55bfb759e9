"""Packed HyperLogLog counter arrays.

Every counter holds ``m = 2**b`` registers of ``r`` bits each, packed
contiguously (register ``j`` occupies bits ``[j*r, (j+1)*r)``) into a run of
``W_c = ceil(m*r / 64)`` little-endian 64-bit words.  Counters are
word-aligned, so an array of ``n`` counters is simply an ``(n, W_c)`` block of
``uint64``; padding bits above ``m*r`` stay zero.

Union of two counters (register-wise maximum) is computed directly on the
packed words with a broadword parallel comparison, extended to several words
by propagating borrows through the subtractions and carrying bits across word
boundaries in the shift.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np
from numba import njit

WORD_BITS = 64
_MASK64 = (1 << 64) - 1

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

SNAPSHOT_MAGIC = b"HLLA"
_SNAPSHOT_HEADER = struct.Struct("<4sQIIQ")


def alpha_for(m: int) -> float:
    """Bias-correction constant of the HyperLogLog size estimate."""
    if m < 16 or m & (m - 1):
        raise ValueError(f"m must be a power of two >= 16, got {m}")
    if m == 16:
        return 0.673
    if m == 32:
        return 0.697
    if m == 64:
        return 0.709
    return 0.7213 / (1.0 + 1.079 / m)


def register_width_for(n: int) -> int:
    """Register width used for a graph with ``n`` nodes."""
    return 5 if n < 2**32 else 6


@dataclass(frozen=True)
class SketchParams:
    """Shape and hashing parameters shared by every counter of an array."""

    b: int
    r: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if not 4 <= self.b <= 16:
            raise ValueError(f"bucket bits b must be in [4, 16], got {self.b}")
        if not 5 <= self.r <= 8:
            raise ValueError(f"register width r must be in [5, 8], got {self.r}")
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)

    @property
    def m(self) -> int:
        return 1 << self.b

    @property
    def alpha(self) -> float:
        return alpha_for(self.m)

    @property
    def max_register(self) -> int:
        return (1 << self.r) - 1

    @property
    def words_per_counter(self) -> int:
        return -(-self.m * self.r // WORD_BITS)

    @cached_property
    def seed_mix(self) -> np.uint64:
        return np.uint64(splitmix64(self.seed))

    @property
    def high_bits(self) -> np.ndarray:
        return _block_constants(self.b, self.r)[0]

    @property
    def low_bits(self) -> np.ndarray:
        return _block_constants(self.b, self.r)[1]

    @property
    def pow2neg(self) -> np.ndarray:
        return _pow2neg_table(self.r)


@lru_cache(maxsize=None)
def _block_constants(b: int, r: int) -> tuple[np.ndarray, np.ndarray]:
    m = 1 << b
    nwords = -(-m * r // WORD_BITS)
    low = 0
    for j in range(m):
        low |= 1 << (j * r)
    high = low << (r - 1)
    return _int_to_words(high, nwords), _int_to_words(low, nwords)


@lru_cache(maxsize=None)
def _pow2neg_table(r: int) -> np.ndarray:
    return np.array([2.0**-v for v in range(1 << r)], dtype=np.float64)


def _int_to_words(value: int, nwords: int) -> np.ndarray:
    out = np.zeros(nwords, dtype=np.uint64)
    for i in range(nwords):
        out[i] = (value >> (WORD_BITS * i)) & _MASK64
    out.setflags(write=False)
    return out


def words_to_int(words: np.ndarray) -> int:
    """Read a little-endian run of 64-bit words as one integer."""
    return sum(int(w) << (WORD_BITS * i) for i, w in enumerate(words))


# --------------------------------------------------------------------------
# hashing and rho+


def splitmix64(z: int) -> int:
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def hash64(x: int, seed: int) -> int:
    """Seeded 64-bit avalanche hash of an item identifier.

    The seed is mixed once with a splitmix64 round, xored into the item and
    the result is mixed again, so each seed yields an independent-looking
    hash family.
    """
    return splitmix64((int(x) & _MASK64) ^ splitmix64(int(seed) & _MASK64))


def rho_plus(bits: int | str, width: int) -> int:
    """Number of leading zeroes of a ``width``-bit sequence, plus one.

    ``bits`` is either an integer holding the sequence in its low ``width``
    bits or a string of ``'0'``/``'1'`` characters.

    >>> rho_plus("00101", 5)
    3
    >>> rho_plus(0, 56)
    57
    """
    if width < 1:
        raise ValueError("width must be >= 1")
    if isinstance(bits, str):
        if len(bits) != width or set(bits) - {"0", "1"}:
            raise ValueError(f"expected {width} binary digits, got {bits!r}")
        bits = int(bits, 2)
    bits &= (1 << width) - 1
    return width - bits.bit_length() + 1


_U0 = np.uint64(0)
_U1 = np.uint64(1)
_UGOLDEN = np.uint64(_GOLDEN)
_UMIX1 = np.uint64(_MIX1)
_UMIX2 = np.uint64(_MIX2)
_USH30 = np.uint64(30)
_USH27 = np.uint64(27)
_USH31 = np.uint64(31)
_UTOP = np.uint64(1 << 63)


@njit(nogil=True, cache=True)
def _splitmix64(z):
    z = z + _UGOLDEN
    z = (z ^ (z >> _USH30)) * _UMIX1
    z = (z ^ (z >> _USH27)) * _UMIX2
    return z ^ (z >> _USH31)


@njit(nogil=True, cache=True)
def _get_reg(row, j, r):
    bit = j * r
    w = bit >> 6
    off = bit & 63
    v = row[w] >> np.uint64(off)
    if off + r > 64:
        v |= row[w + 1] << np.uint64(64 - off)
    return v & np.uint64((1 << r) - 1)


@njit(nogil=True, cache=True)
def _set_reg(row, j, r, value):
    bit = j * r
    w = bit >> 6
    off = bit & 63
    mask = np.uint64((1 << r) - 1)
    row[w] = (row[w] & ~(mask << np.uint64(off))) | (value << np.uint64(off))
    if off + r > 64:
        lo = np.uint64(64 - off)
        row[w + 1] = (row[w + 1] & ~(mask >> lo)) | (value >> lo)


@njit(nogil=True, cache=True)
def _add_item(row, x, seed_mix, b, r):
    h = _splitmix64(x ^ seed_mix)
    bucket = np.int64(h >> np.uint64(64 - b))
    rest = h << np.uint64(b)
    if rest == _U0:
        rho = 64 - b + 1
    else:
        rho = 1
        while (rest & _UTOP) == _U0:
            rest <<= _U1
            rho += 1
    cap = (1 << r) - 1
    if rho > cap:
        rho = cap
    value = np.uint64(rho)
    if value > _get_reg(row, bucket, r):
        _set_reg(row, bucket, r, value)
        return True
    return False


@njit(nogil=True, cache=True)
def _add_items(row, items, seed_mix, b, r):
    changed = False
    for x in items:
        if _add_item(row, x, seed_mix, b, r):
            changed = True
    return changed


@njit(nogil=True, cache=True)
def _seed_counters(words, seed_mix, b, r):
    for v in range(words.shape[0]):
        _add_item(words[v], np.uint64(v), seed_mix, b, r)


@njit(nogil=True, cache=True)
def _estimate_row(row, m, r, alpha, pow2neg):
    total = 0.0
    zeros = 0
    for j in range(m):
        v = _get_reg(row, j, r)
        total += pow2neg[v]
        if v == _U0:
            zeros += 1
    e = alpha * m * m / total
    if e <= 2.5 * m and zeros > 0:
        return m * np.log(m / zeros)
    return e


@njit(nogil=True, cache=True)
def _estimate_rows(words, lo, hi, m, r, alpha, pow2neg, out):
    for i in range(lo, hi):
        out[i] = _estimate_row(words[i], m, r, alpha, pow2neg)


@njit(nogil=True, cache=True)
def _broadword_union(dst, src, high, low, shift, z):
    """dst <- registerwise max(dst, src); returns whether dst changed.

    ``z`` is scratch of the same length as the counter.
    """
    nw = dst.shape[0]
    # z = (x <_k y): high bit of every block set iff dst block < src block
    borrow = _U0
    for i in range(nw):
        x = dst[i]
        y = src[i]
        a = x | high[i]
        c = y & ~high[i]
        d = a - c
        nb = _U1 if a < c else _U0
        if d < borrow:
            nb = _U1
        d = d - borrow
        borrow = nb
        z[i] = ((d | (x ^ y)) ^ (x | ~y)) & high[i]
    # mask = ((((z >> k-1) | H) - L) | H) ^ z, multi-word shift and borrow
    changed = False
    borrow = _U0
    ush = np.uint64(shift)
    ucarry = np.uint64(64 - shift)
    for i in range(nw):
        sh = z[i] >> ush
        if i + 1 < nw:
            sh |= z[i + 1] << ucarry
        a = sh | high[i]
        c = low[i]
        d = a - c
        nb = _U1 if a < c else _U0
        if d < borrow:
            nb = _U1
        d = d - borrow
        borrow = nb
        mask = (d | high[i]) ^ z[i]
        x = dst[i]
        res = (x & mask) | (src[i] & ~mask)
        if res != x:
            dst[i] = res
            changed = True
    return changed


@njit(nogil=True, cache=True)
def _naive_union(dst, src, m, r):
    changed = False
    for j in range(m):
        a = _get_reg(dst, j, r)
        c = _get_reg(src, j, r)
        if c > a:
            _set_reg(dst, j, r, c)
            changed = True
    return changed


@njit(nogil=True, cache=True)
def _broadword_union_rows(dst, src, high, low, shift, out):
    z = np.empty(dst.shape[1], dtype=np.uint64)
    for i in range(dst.shape[0]):
        out[i] = _broadword_union(dst[i], src[i], high, low, shift, z)


@njit(nogil=True, cache=True)
def _naive_union_rows(dst, src, m, r, out):
    for i in range(dst.shape[0]):
        out[i] = _naive_union(dst[i], src[i], m, r)


@njit(nogil=True, cache=True)
def _pack_rows(regs, r, nwords):
    out = np.zeros((regs.shape[0], nwords), dtype=np.uint64)
    for i in range(regs.shape[0]):
        for j in range(regs.shape[1]):
            _set_reg(out[i], j, r, np.uint64(regs[i, j]))
    return out


@njit(nogil=True, cache=True)
def _unpack_rows(words, m, r):
    out = np.empty((words.shape[0], m), dtype=np.uint8)
    for i in range(words.shape[0]):
        for j in range(m):
            out[i, j] = np.uint8(_get_reg(words[i], j, r))
    return out


# --------------------------------------------------------------------------
# word-level broadword primitive


def block_low_bits(k: int, w: int = WORD_BITS) -> int:
    """The ``w``-bit constant with the lowest bit of every ``k``-bit block set."""
    if k < 1 or w % k:
        raise ValueError(f"block width {k} must divide word width {w}")
    return sum(1 << i for i in range(0, w, k))


def block_high_bits(k: int, w: int = WORD_BITS) -> int:
    return block_low_bits(k, w) << (k - 1)


def word_max_per_block(x: int, y: int, k: int, w: int = WORD_BITS) -> int:
    """Blockwise unsigned maximum of two ``w``-bit words split in ``k``-bit blocks."""
    full = (1 << w) - 1
    low = block_low_bits(k, w)
    high = low << (k - 1)
    x &= full
    y &= full
    less = ((((x | high) - (y & ~high & full)) | (x ^ y)) ^ (x | (~y & full))) & high
    mask = ((((less >> (k - 1)) | high) - low) | high) ^ less
    return (x & mask) | (y & ~mask & full)


# --------------------------------------------------------------------------
# counter arrays


class CounterArray:
    """``n`` packed HyperLogLog counters sharing one :class:`SketchParams`."""

    def __init__(self, params: SketchParams, n: int, words: np.ndarray | None = None):
        self.params = params
        self.n = int(n)
        shape = (self.n, params.words_per_counter)
        if words is None:
            words = np.zeros(shape, dtype=np.uint64)
        elif words.shape != shape or words.dtype != np.uint64:
            raise ValueError(f"expected uint64 words of shape {shape}, got {words.dtype} {words.shape}")
        self.words = words

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CounterArray):
            return NotImplemented
        return (
            self.params == other.params
            and self.n == other.n
            and np.array_equal(self.words, other.words)
        )

    def _check(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError(f"counter index {i} out of range for {self.n} counters")
        return i

    def view(self, i: int) -> np.ndarray:
        """Read-write window onto the words of counter ``i``."""
        return self.words[self._check(i)]

    def registers(self, i: int) -> np.ndarray:
        return _unpack_rows(self.words[self._check(i)][None, :], self.params.m, self.params.r)[0]

    def register_matrix(self) -> np.ndarray:
        return _unpack_rows(self.words, self.params.m, self.params.r)

    def add(self, i: int, x: int) -> bool:
        p = self.params
        row = self.view(i)
        return bool(_add_item(row, np.uint64(int(x) & _MASK64), p.seed_mix, p.b, p.r))

    def add_many(self, i: int, items) -> bool:
        """Feed every item of an integer sequence to counter ``i``."""
        p = self.params
        arr = np.asarray(items)
        if arr.dtype != np.uint64:
            arr = arr.astype(np.int64).astype(np.uint64)
        return bool(_add_items(self.view(i), arr, p.seed_mix, p.b, p.r))

    def estimate(self, i: int) -> float:
        p = self.params
        return float(_estimate_row(self.view(i), p.m, p.r, p.alpha, p.pow2neg))

    def estimates(self) -> np.ndarray:
        p = self.params
        out = np.empty(self.n, dtype=np.float64)
        _estimate_rows(self.words, 0, self.n, p.m, p.r, p.alpha, p.pow2neg, out)
        return out

    def copy(self) -> CounterArray:
        return CounterArray(self.params, self.n, self.words.copy())

    @classmethod
    def from_registers(cls, params: SketchParams, regs: np.ndarray) -> CounterArray:
        regs = np.asarray(regs)
        if regs.ndim != 2 or regs.shape[1] != params.m:
            raise ValueError(f"expected register matrix with {params.m} columns")
        if regs.size and (regs.min() < 0 or regs.max() > params.max_register):
            raise ValueError(f"register values must lie in [0, {params.max_register}]")
        words = _pack_rows(regs.astype(np.int64), params.r, params.words_per_counter)
        return cls(params, regs.shape[0], words)

    def to_bytes(self) -> bytes:
        p = self.params
        header = _SNAPSHOT_HEADER.pack(SNAPSHOT_MAGIC, self.n, p.b, p.r, p.seed)
        return header + self.words.astype("<u8", copy=False).tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> CounterArray:
        if len(data) < _SNAPSHOT_HEADER.size:
            raise ValueError("truncated counter snapshot")
        magic, n, b, r, seed = _SNAPSHOT_HEADER.unpack_from(data)
        if magic != SNAPSHOT_MAGIC:
            raise ValueError(f"bad snapshot magic {magic!r}")
        params = SketchParams(b=b, r=r, seed=seed)
        nwords = n * params.words_per_counter
        body = np.frombuffer(data, dtype="<u8", count=nwords, offset=_SNAPSHOT_HEADER.size)
        if len(data) != _SNAPSHOT_HEADER.size + 8 * nwords:
            raise ValueError("snapshot length does not match its header")
        words = body.astype(np.uint64).reshape(n, params.words_per_counter)
        return cls(params, n, words)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> CounterArray:
        return cls.from_bytes(Path(path).read_bytes())


def counter_add(arr: CounterArray, i: int, x: int) -> bool:
    """Feed item ``x`` to counter ``i``; True iff some register increased."""
    return arr.add(i, x)


def counter_estimate(arr: CounterArray, i: int) -> float:
    """Cardinality estimate of counter ``i`` with small-range correction."""
    return arr.estimate(i)


def _check_views(dst: np.ndarray, src: np.ndarray, params: SketchParams) -> None:
    nw = params.words_per_counter
    for name, v in (("dst", dst), ("src", src)):
        if v.dtype != np.uint64 or v.shape[-1] != nw:
            raise ValueError(f"{name} must be uint64 with {nw} words per counter, got {v.dtype} {v.shape}")
    if dst.shape != src.shape:
        raise ValueError(f"shape mismatch: {dst.shape} vs {src.shape}")


def counter_union(dst: np.ndarray, src: np.ndarray, params: SketchParams) -> bool:
    """Broadword register-wise max of ``src`` into ``dst``; True iff ``dst`` changed."""
    _check_views(dst, src, params)
    z = np.empty(params.words_per_counter, dtype=np.uint64)
    return bool(_broadword_union(dst, src, params.high_bits, params.low_bits, params.r - 1, z))


def naive_counter_union(dst: np.ndarray, src: np.ndarray, params: SketchParams) -> bool:
    """Reference union: extract every register, take the max, repack."""
    _check_views(dst, src, params)
    return bool(_naive_union(dst, src, params.m, params.r))


def union_rows(dst: np.ndarray, src: np.ndarray, params: SketchParams, naive: bool = False) -> np.ndarray:
    """Row-by-row union of two ``(k, W_c)`` word blocks; returns changed flags."""
    _check_views(dst, src, params)
    out = np.zeros(dst.shape[0], dtype=np.bool_)
    if naive:
        _naive_union_rows(dst, src, params.m, params.r, out)
    else:
        _broadword_union_rows(dst, src, params.high_bits, params.low_bits, params.r - 1, out)
    return out


def relative_std(m: int) -> float:
    """Guaranteed relative standard deviation bound of one counter."""
    return 1.06 / math.sqrt(m)
