"""Enumerative codec for one bucket: a key set S of [V] plus values in [sigma].

The bucket is ranked into ``R in [C(V,s) * sigma^s)`` (colex combinadic of
the keys, then the values as a base-sigma number) and ``R`` is re-encoded as
a word-aligned spillover representation whose first ``t`` bits reveal ``s``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Callable, Sequence

from .encoding import (SizePartition, SpilloverRep, embed_size, merge_leftover,
                       split_leftover, unembed_size)
from .errors import RankOutOfRange, SizeOutOfRange
from .util import ceil_log2, log2_int


def subset_rank(keys: Sequence[int], V: int) -> int:
    """Colex rank: sum of C(key_i, i+1) over the sorted keys."""
    prev = -1
    r = 0
    for i, x in enumerate(keys):
        if not prev < x < V:
            raise RankOutOfRange("keys must be sorted, distinct and below V")
        r += comb(x, i + 1)
        prev = x
    return r


def subset_unrank(r: int, V: int, s: int) -> list[int]:
    if not 0 <= r < comb(V, s):
        raise RankOutOfRange(f"rank {r} outside [0, C({V},{s}))")
    out = [0] * s
    x = V - 1
    c = comb(x, s) if s else 0   # c == C(x, i) throughout
    for i in range(s, 0, -1):
        # largest x with C(x, i) <= r
        while c > r:
            c = c * (x - i) // x
            x -= 1
        out[i - 1] = x
        r -= c
        # step to C(x-1, i-1)
        c = c * i // x if x else 0
        x -= 1
    return out


@dataclass(frozen=True)
class SizePlan:
    """Deterministic re-encoding parameters for one bucket size."""
    s: int
    omega: int      # number of (set, values) instances of this size
    M1: int
    K1: int
    r: int          # spill bits moved back into m after the size embedding
    pad: int        # zero bits appended so m covers the peeled words
    r0: int         # leftover bits merged into the spill for word alignment
    M: int          # final length of m in bits (multiple of w)
    K: int          # final spill universe


class BucketCodec:
    def __init__(self, V: int, sigma: int, n: int, partition: SizePartition, w: int = 32):
        self.V, self.sigma, self.n, self.w = V, sigma, n, w
        self.part = partition
        self.t = partition.t
        self.peel = -(-self.t // w)
        self.c3 = ceil_log2(n ** 3)
        self.plans = {s: self._plan(s) for s in partition.sizes()}

    def _plan(self, s: int) -> SizePlan:
        t, w = self.t, self.w
        omega = comb(self.V, s) * self.sigma ** s
        if omega == 0:
            raise SizeOutOfRange(f"no bucket of size {s} fits in V={self.V}")
        M1 = max(2 * t, omega.bit_length() - 1 - self.c3)
        K1 = -(-omega // (1 << M1))
        K2 = K1 * self.part.multiplier(s)
        r = max(0, K2.bit_length() - 1 - self.c3)
        K3 = -(-K2 // (1 << r))
        M3 = M1 - t + r
        pad = max(0, self.peel * w - M3)
        M3 += pad
        r0 = M3 % w
        return SizePlan(s, omega, M1, K1, r, pad, r0, M3 - r0, K3 << r0)

    def words_of(self, s: int) -> int:
        return self.plans[s].M // self.w

    def spill_universe(self, s: int) -> int:
        return self.plans[s].K

    # -- ranks ------------------------------------------------------------------
    def instance_rank(self, keys: Sequence[int], values: Sequence[int]) -> int:
        if len(keys) != len(values):
            raise ValueError("one value per key")
        v = 0
        for x in reversed(values):
            if not 0 <= x < self.sigma:
                raise ValueError("value outside [0, sigma)")
            v = v * self.sigma + x
        return subset_rank(keys, self.V) * self.sigma ** len(keys) + v

    def instance_unrank(self, R: int, s: int) -> tuple[list[int], list[int]]:
        sub, v = divmod(R, self.sigma ** s)
        vals = []
        for _ in range(s):
            v, d = divmod(v, self.sigma)
            vals.append(d)
        return subset_unrank(sub, self.V, s), vals

    # -- codec ------------------------------------------------------------------
    def encode(self, keys: Sequence[int], values: Sequence[int]) -> SpilloverRep:
        s = len(keys)
        if s not in self.plans:
            raise SizeOutOfRange(f"bucket size {s} has no interval in the partition")
        P = self.plans[s]
        R = self.instance_rank(keys, values)
        rep = SpilloverRep(R // P.K1, P.M1, R % P.K1, P.K1)
        rep = embed_size(rep, s, self.part)
        k2 = rep.k
        low = k2 & ((1 << P.r) - 1)
        m3 = (((rep.m << P.r) | low) << P.pad)
        rep = SpilloverRep(m3, rep.M + P.r + P.pad, k2 >> P.r, -(-rep.K // (1 << P.r)))
        rep = merge_leftover(rep, self.w)
        assert rep.M == P.M and rep.K == P.K
        return rep

    def size_from_words(self, first_words: Sequence[int]) -> int:
        """Bucket size from the first ceil(t/w) words of m."""
        head = 0
        for x in first_words[:self.peel]:
            head = (head << self.w) | x
        return self.part.extract_size(head >> (self.peel * self.w - self.t))[0]

    def decode(self, rep: SpilloverRep) -> tuple[list[int], list[int]]:
        s = self.size_from_words(rep.words(self.w)[:self.peel])
        P = self.plans[s]
        if rep.M != P.M or rep.K != P.K:
            raise SizeOutOfRange("representation length does not match its size")
        rep = split_leftover(rep, P.r0)
        m = rep.m >> P.pad
        M = rep.M - P.pad
        k2 = (rep.k << P.r) | (m & ((1 << P.r) - 1))
        K2 = P.K1 * self.part.multiplier(s)
        rep = SpilloverRep(m >> P.r, M - P.r, k2, K2)
        s2, rep = unembed_size(rep, self.part)
        R = rep.m * P.K1 + rep.k
        return self.instance_unrank(R, s)

    # -- accounting -------------------------------------------------------------
    def target_bits(self, s: int) -> float:
        """log2(1/p(s)) + log2 C(V,s) + s log2 sigma."""
        p = self.part.p[s]
        return log2_int(self.plans[s].omega) + log2_int(p.denominator) - log2_int(p.numerator)

    def excess_ratio(self, s: int) -> Fraction:
        """2^(stored length - target) as an exact rational."""
        P = self.plans[s]
        return Fraction((1 << P.M) * P.K) * self.part.p[s] / P.omega

    def excess_bits(self, s: int) -> float:
        return math.log1p(float(self.excess_ratio(s) - 1)) / math.log(2)


def query_bucket(read_word: Callable[[int], int], read_spill: Callable[[int], int], x: int,
                 codec: BucketCodec):
    """Value stored for x in the bucket, or None when x is absent.

    ``read_word(j)`` returns word j of m; ``read_spill(s)`` returns the spill
    once the size is known.
    """
    head = [read_word(j) for j in range(codec.peel)]
    s = codec.size_from_words(head)
    nw = codec.words_of(s)
    words = head + [read_word(j) for j in range(codec.peel, nw)]
    rep = SpilloverRep.from_words(words, codec.w, read_spill(s), codec.spill_universe(s))
    keys, vals = codec.decode(rep)
    lo, hi = 0, len(keys)
    while lo < hi:
        mid = (lo + hi) // 2
        if keys[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    if lo < len(keys) and keys[lo] == x:
        return vals[lo]
    return None
