"""Static dictionary: permute, split into buckets, encode, concatenate."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Sequence

import numpy as np

from .bucket import BucketCodec, query_bucket
from .concat import ConcatParams, ConcatStore
from .encoding import SizePartition, realized_distribution
from .errors import BuildFailed, ParamViolation, RetriesExhausted, SizeOutOfRange
from .hashing import FeistelPermutation, derive_seed
from .util import BitReader, BitWriter, ceil_log2, log2_int

MAGIC = b"SUCD"
VERSION = 1


def log2_binomial(U: int, n: int) -> float:
    return log2_int(comb(U, n))


def opt_bits(U: int, n: int, sigma: int) -> float:
    """log2 C(U, n) + n log2 sigma."""
    return log2_binomial(U, n) + n * math.log2(sigma)


@dataclass
class DictParams:
    U: int
    n: int
    sigma: int = 1
    B: int | None = None
    gamma: int = 4
    w: int = 32
    retries: int = 20
    budget_bits: float | None = None
    concat_mode: str = "auto"

    def __post_init__(self):
        if self.n < 1:
            raise ParamViolation("need at least one key")
        if self.U < 2 * self.n:
            raise ParamViolation("universe must satisfy U >= 2n")
        if self.sigma < 1:
            raise ParamViolation("sigma must be positive")
        if self.B is None:
            self.B = min(self.n, max(1, ceil_log2(self.n)) ** self.gamma)
        if not 1 <= self.B <= self.n:
            raise ParamViolation("bucket size must lie in [1, n]")
        if self.U % self.L:
            raise ParamViolation(f"U={self.U} is not a multiple of L={self.L}")
        if self.budget_bits is None:
            self.budget_bits = 50 * max(1, ceil_log2(self.n)) ** 3

    @property
    def L(self) -> int:
        return max(1, self.n // self.B)

    @property
    def V(self) -> int:
        return self.U // self.L

    def load_window(self) -> tuple[float, float]:
        d = self.B ** (2 / 3)
        return self.B - d, self.B + d

    def opt(self) -> float:
        return opt_bits(self.U, self.n, self.sigma)


def bucket_loads(keys, perm: FeistelPermutation, L: int, V: int):
    y = perm.eval_np(np.asarray(keys, dtype=np.uint64)).astype(np.int64)
    return y // V, y % V


def _codec_from_counts(p: DictParams, counts: dict[int, int]) -> BucketCodec:
    sizes = [s for s, c in counts.items() for _ in range(c)]
    dist = realized_distribution(sizes, p.n)
    return BucketCodec(p.V, p.sigma, p.n, SizePartition.for_n(p.n, dist), p.w)


def _concat_params(p: DictParams, codec: BucketCodec, counts: dict[int, int]) -> ConcatParams:
    # the partition table already fixes every type, so the store does not repeat them
    return ConcatParams(p.w, codec.peel, {s: codec.words_of(s) for s in codec.plans},
                        {s: codec.spill_universe(s) for s in codec.plans}, mode=p.concat_mode,
                        counts=dict(counts))


@dataclass
class Dictionary:
    params: DictParams
    master_seed: int
    attempt: int
    counts: dict                 # bucket size -> number of buckets
    store: ConcatStore
    attempts_log: list = field(default_factory=list)

    def __post_init__(self):
        p = self.params
        self.perm = FeistelPermutation(p.U, derive_seed(self.master_seed, self.attempt))
        self.codec = _codec_from_counts(p, self.counts)
        self.query_probes = 0
        self.max_query_probes = 0

    # -- build ----------------------------------------------------------------
    @classmethod
    def build(cls, keys: Sequence[int], values: Sequence[int] | None, params: DictParams,
              master_seed: int = 0) -> "Dictionary":
        p = params
        keys = [int(k) for k in keys]
        if len(keys) != p.n or len(set(keys)) != p.n:
            raise ParamViolation("need exactly n distinct keys")
        if any(not 0 <= k < p.U for k in keys):
            raise ParamViolation("key outside [0, U)")
        values = [0] * p.n if values is None else [int(v) for v in values]
        if len(values) != p.n or any(not 0 <= v < p.sigma for v in values):
            raise ParamViolation("need n values in [0, sigma)")
        lo, hi = p.load_window()
        log = []
        for a in range(p.retries):
            perm = FeistelPermutation(p.U, derive_seed(master_seed, a))
            bidx, inner = bucket_loads(keys, perm, p.L, p.V)
            loads = np.bincount(bidx, minlength=p.L)
            if loads.min() < lo or loads.max() > hi:
                log.append({"attempt": a, "outcome": "load", "min": int(loads.min()), "max": int(loads.max())})
                continue
            counts: dict[int, int] = {}
            for s in loads.tolist():
                counts[s] = counts.get(s, 0) + 1
            codec = _codec_from_counts(p, counts)
            order = np.lexsort((inner, bidx))
            reps, start = [], 0
            for b in range(p.L):
                s = int(loads[b])
                sel = order[start:start + s]
                start += s
                rep = codec.encode(inner[sel].tolist(), [values[i] for i in sel.tolist()])
                reps.append((rep.words(p.w), rep.k, s))
            try:
                store = ConcatStore.build(reps, _concat_params(p, codec, counts), derive_seed(master_seed, 1000 + a))
            except BuildFailed:
                log.append({"attempt": a, "outcome": "concat"})
                continue
            d = cls(p, master_seed, a, counts, store)
            rep = d.space_report()
            if rep["main_redundancy_bits"] > p.budget_bits:
                log.append({"attempt": a, "outcome": "space", "redundancy": rep["main_redundancy_bits"]})
                continue
            log.append({"attempt": a, "outcome": "accepted"})
            d.attempts_log = log
            return d
        err = RetriesExhausted(f"no accepted build in {p.retries} attempts")
        err.log = log
        raise err

    # -- queries --------------------------------------------------------------
    def locate(self, x: int) -> tuple[int, int]:
        y = self.perm(x)
        return y // self.params.V, y % self.params.V

    def query(self, x: int):
        """Stored value of x, or None when x is not a key."""
        if not 0 <= x < self.params.U:
            raise ValueError("query outside [0, U)")
        b, inner = self.locate(x)
        st = self.store
        probes = 0
        state = {}

        def read_word(j):
            nonlocal probes
            v = st.read_word(b, j, s=state.get("s"))
            probes += st.last_probes
            if j == self.codec.peel - 1:
                state["s"] = self.codec.size_from_words([st.peel_words[b * st.peel + q] for q in range(st.peel)])
            return v

        def read_spill(s):
            nonlocal probes
            v = st.read_spill(b, s=s)
            probes += st.last_probes
            return v

        out = query_bucket(read_word, read_spill, inner, self.codec)
        self.query_probes = probes
        self.max_query_probes = max(self.max_query_probes, probes)
        return out

    def __contains__(self, x: int) -> bool:
        return self.query(x) is not None

    # -- serialization and accounting ------------------------------------------
    def _write(self, bw: BitWriter) -> None:
        p = self.params
        bw.section("header")
        for c in MAGIC:
            bw.write(c, 8)
        bw.write(VERSION, 16)
        for v in (p.U, p.n, p.sigma, p.B, p.L, p.V):
            bw.write(v, 64)
        bw.write(p.w, 8)
        bw.section("seed")
        bw.write(self.master_seed, 64)
        bw.write(self.attempt, 8)
        bw.section("partition")
        bw.write(len(self.counts), 16)
        for s, c in sorted(self.counts.items()):
            bw.write(s, 32)
            bw.write(c, 32)
        self.store.write(bw)

    def to_bytes(self) -> bytes:
        bw = BitWriter()
        self._write(bw)
        return bw.to_bytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Dictionary":
        br = BitReader(data)
        if bytes(br.read(8) for _ in range(4)) != MAGIC:
            raise ValueError("not a dictionary container")
        if br.read(16) != VERSION:
            raise ValueError("unsupported container version")
        U, n, sigma, B, L, V = (br.read(64) for _ in range(6))
        w = br.read(8)
        p = DictParams(U, n, sigma, B=B, w=w)
        master, attempt = br.read(64), br.read(8)
        counts = {}
        for _ in range(br.read(16)):
            s = br.read(32)
            counts[s] = br.read(32)
        codec = _codec_from_counts(p, counts)
        store = ConcatStore.read(br, _concat_params(p, codec, counts))
        return cls(p, master, attempt, counts, store)

    def space_report(self) -> dict:
        p = self.params
        bw = BitWriter()
        self._write(bw)
        sec = bw.sections
        main = sum(v for k, v in sec.items() if k.startswith("concat."))
        opt = p.opt()
        conc = self.store.redundancy_report([s for s, c in self.counts.items() for _ in range(c)])
        return {
            "U": p.U, "n": p.n, "sigma": p.sigma, "B": p.B, "L": p.L, "V": p.V, "w": p.w,
            "opt_bits": opt,
            "total_bits": bw.bits,
            "main_bits": main,
            "main_redundancy_bits": main - opt,
            "seed_bits": sec.get("seed", 0),
            "partition_bits": sec.get("partition", 0),
            "header_bits": sec.get("header", 0),
            "total_redundancy_bits": bw.bits - opt,
            "budget_bits": p.budget_bits,
            "attempt": self.attempt,
            "concat": conc,
            "sections": dict(sec),
        }


def entropy_sum(sizes: Sequence[int], V: int, n: int) -> float:
    """Sum over buckets of log2(1/p(s_i)) + log2 C(V, s_i), computed exactly."""
    p = realized_distribution(sizes, n)
    num, den = 1, 1
    for s in sizes:
        num *= comb(V, s) * p[s].denominator
        den *= p[s].numerator
    return log2_int(num) - log2_int(den)


def entropy_check(keys: Sequence[int], params: DictParams, seeds: Sequence[int]) -> dict:
    """Mean bucket entropy over permutation seeds, against log2 C(U,n) + 10 log2 n."""
    vals = []
    for sd in seeds:
        perm = FeistelPermutation(params.U, sd)
        bidx, _ = bucket_loads(keys, perm, params.L, params.V)
        loads = np.bincount(bidx, minlength=params.L).tolist()
        vals.append(entropy_sum(loads, params.V, params.n))
    mean = sum(vals) / len(vals)
    bound = log2_binomial(params.U, params.n) + 10 * math.log2(params.n)
    return {"mean": mean, "bound": bound, "holds": mean <= bound, "values": vals}
