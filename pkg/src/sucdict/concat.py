"""Concatenation of L variable-length spillover representations.

Every representation ``i`` has type ``s_i``; a type fixes the word count
``M^(s)`` and the spill universe ``K^(s)``.  The store answers ``read_word``
and ``read_spill`` with a bounded number of word reads.

Two layouts are supported.

``paper``: the first ``M_min`` words of every representation are laid out
densely (``m_fix``).  Words beyond ``M_min`` go into one augmented retrieval
over GF(2^w) whose augmented array is a prefix of ``m_fix``.  Spills of each
type go into an augmented retrieval over F_P (``P = next_prime(K^(s))``)
whose augmented array is a fixed number of further ``m_fix`` words
converted to base P; its cells are converted back to base 2^w.

``compact``: used when ``m_fix`` is too short to feed the sparsified
retrievals.  ``m_fix`` is stored as is; for each type the tail words and the
spills are stored by unsparsified retrievals keyed by bucket index, whose
rows touch at most ``n_s`` cells (``n_s`` = number of representations of
that type).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .encoding import ConversionTree
from .errors import AllTrialsFailed, BuildFailed, ParamViolation
from .field import BinaryField, PrimeField, next_prime
from .hashing import derive_seed
from .retrieval import (AugmentedRetrieval, RetrievalParams, build, build_boosted,
                        sampling_sparsity)
from .util import BitReader, BitWriter, log2_int

P_MAX = 40
_ROLE_TAIL, _ROLE_SPILL, _ROLE_VAR = 1, 2, 3


@dataclass
class ConcatParams:
    w: int
    peel: int
    words: dict            # s -> M^(s) in words
    K: dict                # s -> K^(s)
    mode: str = "auto"     # auto | paper | compact
    branching: int = 32
    c1: float = 1.0
    counts: dict | None = None    # s -> number of reps; when known to the reader, types are not stored


@dataclass
class _Type:
    s: int
    n_s: int
    M: int
    K: int
    P: int
    tails: list = field(default_factory=list)     # compact: one retrieval per tail word
    spill: AugmentedRetrieval | None = None
    tree: ConversionTree | None = None            # base P cells -> words
    region: list = field(default_factory=list)    # words holding the spill cells
    aug_tree: ConversionTree | None = None        # paper: consumed words -> base P


class _View:
    """Region reader that records which stored words an access touched."""

    def __init__(self, store: "ConcatStore", name, data):
        self.store, self.name, self.data = store, name, data

    def __getitem__(self, i):
        self.store._touched.add((self.name, i))
        return self.data[i]

    def __len__(self):
        return len(self.data)


class _CellView:
    """Cells of a typed retrieval, decoded on demand from their word region."""

    def __init__(self, store: "ConcatStore", T: _Type):
        self.store, self.T = store, T
        self.words = _View(store, ("spill", T.s), T.region)

    def __getitem__(self, c):
        return self.T.tree.access(c, self.words.__getitem__)[0]


def inequality_one(M_min: int, M_max: int, S: int, L: int, c1: float = 1.0) -> bool:
    """M_min >= c1 ((M_max - M_min) log2(L M_max) + S log2 L)."""
    return M_min >= c1 * ((M_max - M_min) * math.log2(max(2, L * M_max)) + S * math.log2(max(2, L)))


class ConcatStore:
    def __init__(self, params: ConcatParams):
        self.params = params
        self.w = params.w
        self.peel = params.peel
        self._touched: set = set()
        self.last_probes = 0
        self.max_probes = 0

    # -- build ----------------------------------------------------------------
    @classmethod
    def build(cls, reps: Sequence[tuple[Sequence[int], int, int]], params: ConcatParams,
              seed: int = 0) -> "ConcatStore":
        """``reps[i] = (words, spill, type)``."""
        self = cls(params)
        w = self.w
        self.seed = seed
        self.L = L = len(reps)
        if L == 0:
            raise ParamViolation("nothing to store")
        for words, k, s in reps:
            if len(words) != params.words[s] or not 0 <= k < params.K[s]:
                raise ParamViolation(f"representation does not match type {s}")
            if params.words[s] < self.peel:
                raise ParamViolation("representation shorter than the peeled prefix")
        present = sorted({s for _, _, s in reps})
        self.types_present = present
        self.M_min = min(params.words[s] for s in present)
        self.M_max = max(params.words[s] for s in present)
        self.S = len(present)
        self.ineq_holds = inequality_one(self.M_min, self.M_max, self.S, L, params.c1)
        members = {s: [i for i, (_, _, t) in enumerate(reps) if t == s] for s in present}
        self.types = {}
        for s in present:
            K = params.K[s]
            self.types[s] = _Type(s, len(members[s]), params.words[s], K, next_prime(max(2, K)))
        self.peel_words = [x for words, _, _ in reps for x in words[:self.peel]]
        fix = [x for words, _, _ in reps for x in words[self.peel:self.M_min]]
        mode = params.mode
        if mode in ("auto", "paper"):
            plan = self._paper_plan()
            if plan is None:
                if mode == "paper":
                    raise ParamViolation("m_fix too short for the sparsified layout")
                mode = "compact"
            elif mode == "paper" and not self.ineq_holds:
                raise ParamViolation("inequality (1) fails for these parameters")
            else:
                mode = "paper"
        self.mode = mode
        if mode == "paper":
            self._build_paper(reps, fix, members, plan)
        else:
            self._build_compact(reps, fix, members)
        return self

    def _seed_for(self, s: int, role: int) -> int:
        return derive_seed(derive_seed(self.seed, role), s)

    def _paper_plan(self):
        """Word budget of the sparsified layout, or None when m_fix is too short."""
        L, w = self.L, self.w
        D = self.M_max - self.M_min
        n_var = sum(T.n_s * (T.M - self.M_min) for T in self.types.values())
        m_var = L * D * sampling_sparsity(n_var) if n_var else 0
        W = 0
        for T in self.types.values():
            need = L * sampling_sparsity(T.n_s)
            W = max(W, -(-need * T.P.bit_length() // w) + 2)
        # grow W until every type's base-P conversion yields enough digits
        while True:
            ok = True
            for T in self.types.values():
                tree = ConversionTree(W, 1 << w, T.P, self.params.branching)
                if tree.total_digits < L * sampling_sparsity(T.n_s):
                    ok = False
                    break
            if ok:
                break
            W += max(1, W // 16)
        consumed = m_var + self.S * W
        if consumed > L * (self.M_min - self.peel):
            return None
        return {"D": D, "n_var": n_var, "m_var": m_var, "W": W, "consumed": consumed}

    def _build_compact(self, reps, fix, members):
        w = self.w
        self.fix = fix
        self.consumed = 0
        self.D = self.M_max - self.M_min
        gf = BinaryField(w)
        for s, T in self.types.items():
            idx = members[s]
            rparams_tail = RetrievalParams(self.L, T.n_s, 0, gf, strict=False)
            for comp in range(T.M - self.M_min):
                pairs = {i: reps[i][0][self.M_min + comp] for i in idx}
                T.tails.append(self._boost(rparams_tail, pairs, [], self._seed_for(s, _ROLE_TAIL),
                                           T.tails[0].boost_index if T.tails else None))
            rparams = RetrievalParams(self.L, T.n_s, 0, PrimeField(T.P), strict=False)
            T.spill = self._boost(rparams, {i: reps[i][1] for i in idx}, [], self._seed_for(s, _ROLE_SPILL))
            T.tree = ConversionTree(rparams.cells, T.P, 1 << w, max(2, rparams.cells))
            T.region = T.tree.encode(T.spill.cells)

    def _boost(self, rparams, pairs, aug, master, known_index=None):
        try:
            if known_index is not None:
                r = build(rparams, pairs, aug, derive_seed(master, known_index))
                r.boost_index, r.master_seed = known_index, master
                return r
            return build_boosted(rparams, pairs, aug, master)
        except AllTrialsFailed as e:
            raise BuildFailed(str(e)) from e

    def _build_paper(self, reps, fix, members, plan):
        w, L = self.w, self.L
        self.D, self.W = plan["D"], plan["W"]
        self.m_var, self.consumed = plan["m_var"], plan["consumed"]
        self.fix = fix[self.consumed:]
        self.var = None
        if plan["n_var"]:
            pairs = {}
            for i, (words, _, s) in enumerate(reps):
                for j in range(self.M_min, len(words)):
                    pairs[i * self.D + (j - self.M_min)] = words[j]
            rp = RetrievalParams(L * self.D, plan["n_var"], self.m_var, BinaryField(w))
            self.var = self._boost(rp, pairs, fix[:self.m_var], self._seed_for(0, _ROLE_VAR))
        off = self.m_var
        for s, T in sorted(self.types.items()):
            chunk = fix[off:off + self.W]
            off += self.W
            T.aug_tree = ConversionTree(self.W, 1 << w, T.P, self.params.branching)
            aug = T.aug_tree.encode(chunk)
            rp = RetrievalParams(L, T.n_s, len(aug), PrimeField(T.P))
            T.spill = self._boost(rp, {i: reps[i][1] for i in members[s]}, aug, self._seed_for(s, _ROLE_SPILL))
            T.tree = ConversionTree(rp.cells, T.P, 1 << w, self.params.branching)
            T.region = T.tree.encode(T.spill.cells)

    # -- queries --------------------------------------------------------------
    def _begin(self):
        self._touched = set()

    def _end(self):
        self.last_probes = len(self._touched)
        self.max_probes = max(self.max_probes, self.last_probes)
        return self.last_probes

    def _type_of(self, i: int, size_of: Callable[[Sequence[int]], int]) -> int:
        v = _View(self, "peel", self.peel_words)
        return size_of([v[i * self.peel + j] for j in range(self.peel)])

    def read_word(self, i: int, j: int, s: int | None = None, size_of=None) -> int:
        """Word j of representation i.  Pass the type s, or a ``size_of``
        callback that maps the peeled words to the type."""
        self._begin()
        try:
            return self._read_word(i, j, s, size_of)
        finally:
            self._end()

    def _read_word(self, i, j, s, size_of):
        if not 0 <= i < self.L or j < 0:
            raise IndexError("word index out of range")
        if j < self.peel:
            return _View(self, "peel", self.peel_words)[i * self.peel + j]
        if j < self.M_min:
            f = i * (self.M_min - self.peel) + (j - self.peel)
            return self._read_fix(f)
        if s is None:
            s = self._type_of(i, size_of)
        T = self.types[s]
        if j >= T.M:
            raise IndexError("word index beyond the representation")
        if self.mode == "compact":
            r = T.tails[j - self.M_min]
            return r.query(i, cells=_View(self, ("tail", s, j), r.cells))
        return self.var.query(i * self.D + (j - self.M_min), cells=_View(self, "var", self.var.cells))

    def _read_fix(self, f: int) -> int:
        if f >= self.consumed:
            return _View(self, "fix", self.fix)[f - self.consumed]
        if f < self.m_var:
            return self.var.query_aug(f, cells=_View(self, "var", self.var.cells))
        u, o = divmod(f - self.m_var, self.W)
        T = self.types[sorted(self.types)[u]]
        cells = _CellView(self, T)
        return T.aug_tree.access(o, lambda pos: T.spill.query_aug(pos, cells=cells))[0]

    def read_spill(self, i: int, s: int | None = None, size_of=None) -> int:
        self._begin()
        try:
            if s is None:
                s = self._type_of(i, size_of)
            T = self.types[s]
            if self.mode == "compact":
                words = _View(self, ("spill", T.s), T.region)
                cells = T.tree.decode(words)
                return T.spill.query(i, cells=cells)
            return T.spill.query(i, cells=_CellView(self, T))
        finally:
            self._end()

    # -- accounting -----------------------------------------------------------
    def info_bits(self, reps_types: Sequence[int]) -> float:
        """Sum over representations of M^(s) w + log2 K^(s)."""
        return sum(self.params.words[s] * self.w + log2_int(self.params.K[s]) for s in reps_types)

    def write(self, bw: BitWriter) -> None:
        w = self.w
        bw.section("concat.directory")
        bw.write(0 if self.mode == "compact" else 1, 8)
        bw.write(w, 8)
        bw.write(self.peel, 16)
        bw.write(self.L, 32)
        bw.write(self.M_min, 32)
        bw.write(self.M_max, 32)
        bw.write(self.S, 16)
        bw.write(self.seed, 64)
        if self.mode == "paper":
            bw.write(self.W, 32)
            bw.write(self.var.boost_index if self.var else 0, 8)
        described = self.params.counts is None
        for s, T in sorted(self.types.items()):
            if described:
                bw.write(s, 32)
                bw.write(T.n_s, 32)
                bw.write(T.M, 32)
                kb = T.K.bit_length()
                bw.write(kb, 8)
                bw.write(T.K, kb)
            bw.section("concat.boost")
            bw.write(T.tails[0].boost_index if T.tails else 0, 8)
            bw.write(T.spill.boost_index, 8)
            bw.section("concat.directory")
        bw.section("concat.words")
        bw.write_many(self.peel_words, w)
        bw.write_many(self.fix, w)
        if self.mode == "paper" and self.var is not None:
            bw.write_many(self.var.cells, w)
        for s, T in sorted(self.types.items()):
            for r in T.tails:
                bw.write_many(r.cells, w)
            bw.write_many(T.region, w)

    @classmethod
    def read(cls, br: BitReader, params: ConcatParams) -> "ConcatStore":
        self = cls(params)
        mode = "compact" if br.read(8) == 0 else "paper"
        w = br.read(8)
        if w != params.w:
            raise ValueError("word size mismatch")
        self.mode = mode
        self.peel = br.read(16)
        self.L, self.M_min, self.M_max, self.S = br.read(32), br.read(32), br.read(32), br.read(16)
        self.seed = br.read(64)
        self.D = self.M_max - self.M_min
        var_boost = 0
        if mode == "paper":
            self.W = br.read(32)
            var_boost = br.read(8)
        self.types = {}
        boosts = {}
        if params.counts is None:
            for _ in range(self.S):
                s, n_s, M = br.read(32), br.read(32), br.read(32)
                K = br.read(br.read(8))
                boosts[s] = (br.read(8), br.read(8))
                self.types[s] = _Type(s, n_s, M, K, next_prime(max(2, K)))
        else:
            for s in sorted(params.counts):
                K = params.K[s]
                boosts[s] = (br.read(8), br.read(8))
                self.types[s] = _Type(s, params.counts[s], params.words[s], K, next_prime(max(2, K)))
        self.types_present = sorted(self.types)
        gf = BinaryField(w)
        self.peel_words = br.read_many(self.L * self.peel, w)
        if mode == "paper":
            n_var = sum(T.n_s * (T.M - self.M_min) for T in self.types.values())
            self.m_var = self.L * self.D * sampling_sparsity(n_var) if n_var else 0
            self.consumed = self.m_var + self.S * self.W
        else:
            self.consumed = self.m_var = 0
        self.fix = br.read_many(self.L * (self.M_min - self.peel) - self.consumed, w)
        self.var = None
        if mode == "paper" and self.m_var:
            rp = RetrievalParams(self.L * self.D, n_var, self.m_var, gf)
            m = self._seed_for(0, _ROLE_VAR)
            self.var = AugmentedRetrieval(rp, br.read_many(rp.cells, w), derive_seed(m, var_boost), var_boost, m)
        for s, T in sorted(self.types.items()):
            tb, sb = boosts[s]
            if mode == "compact":
                rp = RetrievalParams(self.L, T.n_s, 0, gf, strict=False)
                m = self._seed_for(s, _ROLE_TAIL)
                for _ in range(T.M - self.M_min):
                    T.tails.append(AugmentedRetrieval(rp, br.read_many(T.n_s, w), derive_seed(m, tb), tb, m))
                sp = RetrievalParams(self.L, T.n_s, 0, PrimeField(T.P), strict=False)
                T.tree = ConversionTree(sp.cells, T.P, 1 << w, max(2, sp.cells))
            else:
                T.aug_tree = ConversionTree(self.W, 1 << w, T.P, params.branching)
                sp = RetrievalParams(self.L, T.n_s, T.aug_tree.total_digits, PrimeField(T.P))
                T.tree = ConversionTree(sp.cells, T.P, 1 << w, params.branching)
            T.region = br.read_many(T.tree.total_digits, w)
            T.spill = AugmentedRetrieval(sp, T.tree.decode(T.region), derive_seed(self._seed_for(s, _ROLE_SPILL), sb),
                                         sb, self._seed_for(s, _ROLE_SPILL))
        return self

    def redundancy_report(self, reps_types: Sequence[int]) -> dict:
        bw = BitWriter()
        self.write(bw)
        info = self.info_bits(reps_types)
        conv = 0.0
        rounding = 0.0
        for T in self.types.values():
            conv += T.tree.redundancy_bits()
            rounding += T.n_s * (log2_int(T.P) - log2_int(T.K))
            if T.aug_tree is not None:
                conv += T.aug_tree.redundancy_bits()
        return {
            "mode": self.mode,
            "total_bits": bw.bits,
            "info_bits": info,
            "redundancy_bits": bw.bits - info,
            "directory_bits": bw.sections.get("concat.directory", 0),
            "boost_bits": bw.sections.get("concat.boost", 0),
            "conversion_bits": conv,
            "prime_rounding_bits": rounding,
            "inequality_one": self.ineq_holds if hasattr(self, "ineq_holds") else None,
            "S": self.S, "L": self.L, "M_min": self.M_min, "M_max": self.M_max,
        }
