"""Spillover representations, size embedding and base conversion.

A spillover representation is a pair ``(m, k)``: ``m`` is an ``M``-bit
string (held as an int, most significant bit first) and ``k`` lies in
``[0, K)``.  Its fractional length is ``M + log2 K``.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .errors import PreconditionViolated, SizeOutOfRange
from .util import ceil_log2, log2_int


@dataclass(frozen=True)
class SpilloverRep:
    m: int
    M: int
    k: int
    K: int

    def __post_init__(self):
        if self.M < 0 or not 0 <= self.m < (1 << self.M) or self.M == 0 and self.m:
            raise ValueError("m does not fit in M bits")
        if not 0 <= self.k < self.K:
            raise ValueError("spill outside [0, K)")

    def length(self) -> float:
        return self.M + log2_int(self.K)

    def words(self, w: int) -> list[int]:
        """The w-bit words of m, first word first (requires M % w == 0)."""
        if self.M % w:
            raise ValueError("m is not word aligned")
        cnt = self.M // w
        mask = (1 << w) - 1
        return [(self.m >> (w * (cnt - 1 - j))) & mask for j in range(cnt)]

    @classmethod
    def from_words(cls, words: Sequence[int], w: int, k: int, K: int) -> "SpilloverRep":
        m = 0
        for x in words:
            m = (m << w) | x
        return cls(m, len(words) * w, k, K)


def merge_leftover(rep: SpilloverRep, w: int) -> SpilloverRep:
    """Cut m to whole words; the trailing bits move into the spill."""
    r = rep.M % w
    if r == 0:
        return rep
    return SpilloverRep(rep.m >> r, rep.M - r, (rep.k << r) | (rep.m & ((1 << r) - 1)), rep.K << r)


def split_leftover(rep: SpilloverRep, r: int) -> SpilloverRep:
    """Inverse of :func:`merge_leftover` for a known leftover width r."""
    if r == 0:
        return rep
    return SpilloverRep((rep.m << r) | (rep.k & ((1 << r) - 1)), rep.M + r, rep.k >> r, rep.K >> r)


# -- size partition ---------------------------------------------------------------

def realized_distribution(sizes: Sequence[int], n: int, support=None) -> dict[int, Fraction]:
    """Empirical size frequencies, clamped below at 1/n^3 and renormalized."""
    L = len(sizes)
    counts: dict[int, int] = {}
    for s in sizes:
        counts[s] = counts.get(s, 0) + 1
    keys = sorted(set(counts) | set(support or ()))
    floor = Fraction(1, n ** 3)
    raw = {s: max(Fraction(counts.get(s, 0), L), floor) for s in keys}
    z = sum(raw.values())
    return {s: v / z for s, v in raw.items()}


class SizePartition:
    """Intervals ``T_s`` of ``[0, 2^t)`` with ``|T_s| = floor(p(s) 2^t)``,
    laid out by increasing length; the rounding slack sits at the top and
    belongs to no size."""

    def __init__(self, t: int, p: Mapping[int, Fraction]):
        self.t = t
        self.p = dict(p)
        total = 1 << t
        lens = {s: (q.numerator * total) // q.denominator for s, q in self.p.items()}
        if any(v < 1 for v in lens.values()):
            raise ValueError("t too small for the smallest probability")
        self.order = sorted(lens, key=lambda s: (lens[s], s))
        self.length = lens
        self.start: dict[int, int] = {}
        pos = 0
        for s in self.order:
            self.start[s] = pos
            pos += lens[s]
        self.slack = total - pos
        self._bounds = [self.start[s] for s in self.order]

    @classmethod
    def for_n(cls, n: int, p: Mapping[int, Fraction]) -> "SizePartition":
        return cls(10 * max(1, ceil_log2(n)), p)

    def sizes(self) -> list[int]:
        return sorted(self.p)

    def directory_bits(self) -> int:
        """Bits to store the boundary directory (one t-bit boundary per size)."""
        return len(self.order) * (self.t + 16)

    def extract_size(self, first_t_bits: int) -> tuple[int, int]:
        """(s, offset inside T_s) for the value of the first t bits."""
        k = bisect.bisect_right(self._bounds, first_t_bits) - 1
        if k < 0:
            raise SizeOutOfRange("value below the first interval")
        s = self.order[k]
        off = first_t_bits - self.start[s]
        if off >= self.length[s]:
            raise SizeOutOfRange("value falls in the unused slack interval")
        return s, off

    def multiplier(self, s: int) -> int:
        return -(-(1 << (2 * self.t)) // self.length[s])


def embed_size(rep: SpilloverRep, s: int, part: SizePartition) -> SpilloverRep:
    """Write s into the first t bits of m, shifting 2t bits of entropy into the spill."""
    t = part.t
    if s not in part.length:
        raise SizeOutOfRange(f"size {s} has no interval")
    if rep.M < 2 * t:
        raise PreconditionViolated("m must hold at least 2t bits")
    low = rep.M - 2 * t
    m0, rest = rep.m >> low, rep.m & ((1 << low) - 1)
    T = part.length[s]
    mult = part.multiplier(s)
    head = part.start[s] + m0 % T
    return SpilloverRep((head << low) | rest, rep.M - t, rep.k * mult + m0 // T, rep.K * mult)


def extract_size(m: int, M: int, part: SizePartition) -> tuple[int, int]:
    return part.extract_size(m >> (M - part.t))


def unembed_size(rep: SpilloverRep, part: SizePartition) -> tuple[int, SpilloverRep]:
    t = part.t
    low = rep.M - t
    s, off = part.extract_size(rep.m >> low)
    mult = part.multiplier(s)
    k, q = divmod(rep.k, mult)
    m0 = q * part.length[s] + off
    m = (m0 << low) | (rep.m & ((1 << low) - 1))
    return s, SpilloverRep(m, rep.M + t, k, rep.K // mult)


# -- base conversion -----------------------------------------------------------------

def _digits_for(W: int, q: int) -> int:
    """Largest d with q^(d+1) <= W (0 if W < q)."""
    if W < q:
        return 0
    d = max(0, int(log2_int(W) / math.log2(q)) - 2)
    while q ** (d + 2) <= W:
        d += 1
    return d


class ConversionTree:
    """Spillover aggregation tree turning a sequence over ``[p]`` into base-q digits.

    Leaves pack ``b`` source symbols, internal nodes pack ``b`` child spills.
    Each node keeps its value modulo ``q^d`` as a run of ``d`` digits and
    passes the quotient (a spill in ``[q, q^2)``) upward; the root spill is
    written last as one or two digits.  Runs are most-significant digit
    first, in postorder.
    """

    def __init__(self, n: int, p: int, q: int, b: int = 32):
        if n < 0 or p < 2 or q < 2 or b < 2:
            raise PreconditionViolated("need n >= 0, p, q >= 2, b >= 2")
        self.n, self.p, self.q, self.b = n, p, q, b
        self.identity = p == q
        if self.identity or n == 0:
            self.levels = []
            self.total_digits = n
            self.root_digits = 0
            self.depth = 0
            return
        # levels[0] = leaves; each level: list of (universe, digit count)
        sizes = []
        cnt = n
        while True:
            groups = -(-cnt // b)
            sizes.append((cnt, groups))
            if groups == 1:
                break
            cnt = groups
        self.depth = len(sizes)
        self.levels: list[list[tuple[int, int, int]]] = []  # (W, d, K)
        child_K: list[int] = []
        for lvl, (cnt, groups) in enumerate(sizes):
            row = []
            for g_ in range(groups):
                lo, hi = g_ * b, min((g_ + 1) * b, cnt)
                if lvl == 0:
                    W = p ** (hi - lo)
                else:
                    W = math.prod(child_K[lo:hi])
                d = _digits_for(W, q)
                K = -(-W // q ** d)
                row.append((W, d, K))
            self.levels.append(row)
            child_K = [K for _, _, K in row]
        rootK = self.levels[-1][0][2]
        self.root_digits = 1 if rootK <= q else 2
        # postorder offsets of each node's run
        self.offset: list[list[int]] = [[0] * len(r) for r in self.levels]
        pos = 0

        def place(lvl, idx):
            nonlocal pos
            if lvl > 0:
                for c in range(idx * b, min((idx + 1) * b, len(self.levels[lvl - 1]))):
                    place(lvl - 1, c)
            self.offset[lvl][idx] = pos
            pos += self.levels[lvl][idx][1]

        place(self.depth - 1, 0)
        self.root_offset = pos
        self.total_digits = pos + self.root_digits

    # structure helpers
    def node_universes(self):
        return [[K for _, _, K in row] for row in self.levels]

    def redundancy_bits(self) -> float:
        if self.n == 0:
            return 0.0
        return self.total_digits * math.log2(self.q) - self.n * math.log2(self.p)

    def _run(self, value: int, d: int) -> list[int]:
        q = self.q
        out = [0] * d
        for j in range(d - 1, -1, -1):
            value, out[j] = divmod(value, q)
        return out

    def encode(self, A: Sequence[int]) -> list[int]:
        if len(A) != self.n:
            raise PreconditionViolated("sequence length does not match the tree")
        if any(not 0 <= a < self.p for a in A):
            raise PreconditionViolated("symbol outside [0, p)")
        if self.identity or self.n == 0:
            return list(A)
        out = [0] * self.total_digits
        b, p = self.b, self.p
        spills: list[int] = []
        for lvl, row in enumerate(self.levels):
            nxt = []
            for idx, (W, d, K) in enumerate(row):
                lo = idx * b
                if lvl == 0:
                    X = 0
                    for a in reversed(A[lo:lo + b]):
                        X = X * p + a
                else:
                    X = 0
                    prev = self.levels[lvl - 1]
                    hi = min(lo + b, len(prev))
                    for c in range(hi - 1, lo - 1, -1):
                        X = X * prev[c][2] + spills[c]
                qd = self.q ** d
                spill, low = divmod(X, qd)
                off = self.offset[lvl][idx]
                out[off:off + d] = self._run(low, d)
                nxt.append(spill)
            spills = nxt
        out[self.root_offset:] = self._run(spills[0], self.root_digits)
        return out

    def _read_run(self, read: Callable[[int], int], off: int, d: int) -> int:
        v = 0
        for j in range(d):
            v = v * self.q + read(off + j)
        return v

    def access(self, i: int, read: Callable[[int], int]) -> tuple[int, int]:
        """``(A[i], runs read)``; ``read(pos)`` returns digit ``pos``."""
        if not 0 <= i < self.n:
            raise IndexError("index outside the sequence")
        if self.identity:
            return read(i), 1
        b = self.b
        path = []
        idx = i // b
        for lvl in range(self.depth):
            path.append(idx)
            idx //= b
        spill = self._read_run(read, self.root_offset, self.root_digits)
        runs = 1
        for lvl in range(self.depth - 1, -1, -1):
            idx = path[lvl]
            W, d, K = self.levels[lvl][idx]
            X = spill * self.q ** d + self._read_run(read, self.offset[lvl][idx], d)
            if d:
                runs += 1
            if lvl == 0:
                return (X // self.p ** (i - idx * b)) % self.p, runs
            child = path[lvl - 1]
            prev = self.levels[lvl - 1]
            for c in range(idx * b, child):
                X //= prev[c][2]
            spill = X % prev[child][2]
        raise AssertionError("unreachable")

    def decode(self, digits: Sequence[int]) -> list[int]:
        if self.identity or self.n == 0:
            return list(digits)
        return [self.access(i, digits.__getitem__)[0] for i in range(self.n)]

    def max_access_runs(self) -> int:
        return self.depth + 1 if not self.identity else 1


def convert(A: Sequence[int], p: int, q: int, b: int = 32) -> tuple[ConversionTree, list[int]]:
    """Base-q digits of A (symbols in [p]) and the tree describing them."""
    tree = ConversionTree(len(A), p, q, b)
    return tree, tree.encode(A)


def access(tree: ConversionTree, digits: Sequence[int], i: int) -> int:
    return tree.access(i, digits.__getitem__)[0]
