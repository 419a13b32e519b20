"""Augmented retrieval: n key/value pairs plus an m-element array in n+m cells.

Each retrieval key ``i`` owns a random row of a sparse ``N x n`` matrix with
``t_s`` sampled entries.  The row is split over a group of augmented array
slots so that every stored query row touches at most three cells:

* retrieval row ``i``            ->  ``-c[e_0]``
* augmented row ``(i, j)``, active  ->  ``chunk_j . c[:n] + c[e_j] - c[e_{j+1}]``
* augmented row beyond the active part  ->  ``c[e_j]``

Summing the rows of a group telescopes back to the original matrix row.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import AllTrialsFailed, ParamViolation, Singular
from .field import BinaryField, FieldSpec, PrimeField
from .hashing import GOLDEN, MASK64, derive_seed, mix64, mix64_np
from .linalg import SparseMatrix, rank, solve_rows
from .util import ceil_log2

import flint


def sampling_sparsity(n: int) -> int:
    return 10 * max(1, ceil_log2(n))


@dataclass(frozen=True)
class RetrievalParams:
    N: int
    n: int
    m: int
    spec: FieldSpec
    t_s: int = 0
    strict: bool = True

    def __post_init__(self):
        if self.t_s == 0:
            object.__setattr__(self, "t_s", sampling_sparsity(self.n))
        if self.N < 1 or self.n < 1 or self.m < 0:
            raise ParamViolation("need N >= 1, n >= 1, m >= 0")
        if self.strict:
            if self.g < self.t_s:
                raise ParamViolation(f"group size {self.g} below sampling sparsity {self.t_s}")
            if self.spec.order < 2 * self.n:
                raise ParamViolation("field order must be at least 2n")

    @property
    def g(self) -> int:
        return self.m // self.N

    @property
    def chunk(self) -> int:
        """Sampled entries carried by one active augmented row (1 when g >= t_s)."""
        return -(-self.t_s // self.g) if self.g else self.t_s

    @property
    def active(self) -> int:
        """Augmented rows per group that carry samples."""
        return -(-self.t_s // self.chunk) if self.g else 0

    @property
    def cells(self) -> int:
        return self.n + self.m

    def max_row_nonzeros(self) -> int:
        return self.chunk + 2 if self.g else self.t_s


# -- row sampling -----------------------------------------------------------

def _value_from(h2: int, order: int) -> int:
    if order <= 1 << 32:
        return h2 % order
    h3 = mix64(h2 ^ GOLDEN)
    return ((h3 << 64) | h2) % order


def _row_base(i: int, seed: int) -> int:
    return mix64((seed + GOLDEN * (i + 1)) & MASK64)


def sample_entry(i: int, k: int, n: int, order: int, seed: int, base: int | None = None):
    """The k-th sampled (position, value) of matrix row i."""
    b = _row_base(i, seed) if base is None else base
    h1 = mix64((b + 2 * k + 1) & MASK64)
    h2 = mix64((b + 2 * k + 2) & MASK64)
    return h1 % n, _value_from(h2, order)


def sample_row_B(i: int, params: RetrievalParams, seed: int) -> list[tuple[int, int]]:
    b = _row_base(i, seed)
    return [sample_entry(i, k, params.n, params.spec.order, seed, b) for k in range(params.t_s)]


def sample_rows_np(keys, n: int, order: int, t_s: int, seed: int):
    """Vectorized sampling for many rows; requires order <= 2**32."""
    if order > 1 << 32:
        raise ValueError("vectorized sampling supports orders up to 2**32")
    keys = np.asarray(keys, dtype=np.uint64)
    with np.errstate(over="ignore"):
        base = mix64_np(np.uint64(seed) + np.uint64(GOLDEN) * (keys + np.uint64(1)))
        ks = np.arange(t_s, dtype=np.uint64)
        h1 = mix64_np(base[:, None] + (np.uint64(2) * ks + np.uint64(1))[None, :])
        h2 = mix64_np(base[:, None] + (np.uint64(2) * ks + np.uint64(2))[None, :])
    return (h1 % np.uint64(n)).astype(np.int64), (h2 % np.uint64(order)).astype(np.int64)


def _merge(spec: FieldSpec, pairs) -> list[tuple[int, int]]:
    acc: dict[int, int] = {}
    for c, v in pairs:
        acc[c] = spec.add(acc.get(c, 0), v)
    return [(c, v) for c, v in sorted(acc.items()) if v]


def row_nonzeros_A(row: int, params: RetrievalParams, seed: int) -> list[tuple[int, int]]:
    """Nonzeros of row ``row`` of the sparsified matrix (rows ``[0, N)`` are
    retrieval rows, row ``N + j`` is augmented query ``j``)."""
    P, spec = params, params.spec
    n, g = P.n, P.g
    if row < P.N:
        if g:
            return [(n + row * g, spec.neg(1))]
        return _merge(spec, sample_row_B(row, P, seed))
    a = row - P.N
    if a >= P.N * g:
        return [(n + a, 1)]
    i, j = divmod(a, g)
    if j >= P.active:
        return [(n + a, 1)]
    b = _row_base(i, seed)
    lo, hi = j * P.chunk, min((j + 1) * P.chunk, P.t_s)
    ents = [sample_entry(i, k, n, spec.order, seed, b) for k in range(lo, hi)]
    ents.append((n + a, 1))
    if j < P.active - 1:
        ents.append((n + a + 1, spec.neg(1)))
    return _merge(spec, ents)


def matrix_A(params: RetrievalParams, seed: int) -> SparseMatrix:
    rows = [row_nonzeros_A(r, params, seed) for r in range(params.N + params.m)]
    return SparseMatrix(params.spec, len(rows), params.cells, rows)


def matrix_B(params: RetrievalParams, seed: int) -> SparseMatrix:
    rows = [_merge(params.spec, sample_row_B(i, params, seed)) for i in range(params.N)]
    return SparseMatrix(params.spec, params.N, params.n, rows)


# -- the structure ------------------------------------------------------------

@dataclass
class AugmentedRetrieval:
    params: RetrievalParams
    cells: list
    seed: int
    boost_index: int = 0
    master_seed: int | None = None
    probes: int = field(default=0, compare=False)

    def _dot(self, ents, cells) -> int:
        spec = self.params.spec
        acc = 0
        for c, v in ents:
            acc = spec.add(acc, spec.mul(v, cells[c]))
        self.probes += len(ents)
        return acc

    def query(self, x: int, cells=None) -> int:
        """Value stored for key x (anything for keys never stored)."""
        if not 0 <= x < self.params.N:
            raise IndexError("key outside [0, N)")
        return self._dot(row_nonzeros_A(x, self.params, self.seed), self.cells if cells is None else cells)

    def query_aug(self, j: int, cells=None) -> int:
        if not 0 <= j < self.params.m:
            raise IndexError("augmented index outside [0, m)")
        return self._dot(row_nonzeros_A(self.params.N + j, self.params, self.seed),
                         self.cells if cells is None else cells)

    # serialization: header, boost index, cells
    _MAGIC = b"SUCR"

    def cell_bytes(self) -> int:
        return max(1, -(-self.params.spec.elem_bits // 8))

    def to_bytes(self) -> bytes:
        P, spec = self.params, self.params.spec
        kind = 0 if isinstance(spec, PrimeField) else 1
        modulus = spec.p if kind == 0 else spec.modulus_poly
        mod_bytes = modulus.to_bytes(-(-modulus.bit_length() // 8), "little")
        head = struct.pack("<4sQQQQBH", self._MAGIC, P.N, P.n, P.m, P.t_s, kind, len(mod_bytes))
        head += mod_bytes
        head += struct.pack("<QQQB", self.seed, self.master_seed or 0, self.boost_index,
                            int(self.master_seed is not None))
        cb = self.cell_bytes()
        return head + b"".join(int(c).to_bytes(cb, "little") for c in self.cells)

    @classmethod
    def from_bytes(cls, data: bytes) -> "AugmentedRetrieval":
        fmt = "<4sQQQQBH"
        magic, N, n, m, t_s, kind, ml = struct.unpack_from(fmt, data)
        if magic != cls._MAGIC:
            raise ValueError("not a retrieval blob")
        off = struct.calcsize(fmt)
        modulus = int.from_bytes(data[off:off + ml], "little")
        off += ml
        seed, master, boost, has_master = struct.unpack_from("<QQQB", data, off)
        off += struct.calcsize("<QQQB")
        spec = PrimeField(modulus) if kind == 0 else BinaryField(modulus.bit_length() - 1, modulus)
        P = RetrievalParams(N, n, m, spec, t_s, strict=False)
        obj = cls(P, [], seed, boost, master if has_master else None)
        cb = obj.cell_bytes()
        body = data[off:]
        if len(body) != cb * P.cells:
            raise ValueError("payload length does not match n + m cells")
        obj.cells = [int.from_bytes(body[k * cb:(k + 1) * cb], "little") for k in range(P.cells)]
        return obj


def _fast_ok(spec: FieldSpec) -> bool:
    return isinstance(spec, PrimeField) and spec.p < 1 << 31


def build(params: RetrievalParams, pairs: Mapping[int, int], aug: Sequence[int], seed: int,
          fast: bool | None = None) -> AugmentedRetrieval:
    """Solve for the n+m cells.  Raises :class:`Singular` when the valid rows of
    the sampled matrix are dependent."""
    P = params
    if len(aug) != P.m:
        raise ValueError(f"expected {P.m} augmented values, got {len(aug)}")
    for k in pairs:
        if not 0 <= k < P.N:
            raise ValueError(f"key {k} outside [0, {P.N})")
    if fast is None:
        fast = _fast_ok(P.spec)
    cells = (_build_np if fast else _build_py)(P, dict(pairs), list(aug), seed)
    return AugmentedRetrieval(P, cells, seed & MASK64)


def _build_py(P: RetrievalParams, pairs: dict, aug: list, seed: int) -> list:
    spec, n, g = P.spec, P.n, P.g
    keys = sorted(pairs)
    B = matrix_B(P, seed)
    targets = []
    for i in keys:
        y = pairs[i]
        for j in range(P.active):
            y = spec.add(y, aug[i * g + j])
        targets.append(y)
    if rank(B, keys) < len(keys):
        raise Singular("valid rows of the sampled matrix are dependent")
    c0 = solve_rows(B, keys, targets)
    cells = list(c0) + list(aug)
    for i in range(P.N if g else 0):
        b = _row_base(i, seed)
        nxt = 0
        for j in reversed(range(P.active)):
            lo, hi = j * P.chunk, min((j + 1) * P.chunk, P.t_s)
            d = 0
            for k in range(lo, hi):
                p, v = sample_entry(i, k, n, spec.order, seed, b)
                d = spec.add(d, spec.mul(v, c0[p]))
            nxt = spec.add(spec.sub(aug[i * g + j], d), nxt)
            cells[n + i * g + j] = nxt
    return cells


def _build_np(P: RetrievalParams, pairs: dict, aug: list, seed: int) -> list:
    p, n, g = P.spec.p, P.n, P.g
    keys = np.array(sorted(pairs), dtype=np.int64)
    aug_a = np.asarray(aug, dtype=np.int64) % p
    c0 = np.zeros(n, dtype=np.int64)
    if len(keys):
        pos, val = sample_rows_np(keys, n, p, P.t_s, seed)
        dense = np.zeros((len(keys), n + 1), dtype=np.int64)
        rows_idx = np.repeat(np.arange(len(keys)), P.t_s)
        np.add.at(dense, (rows_idx, pos.ravel()), val.ravel())
        y = np.array([pairs[int(k)] for k in keys], dtype=np.int64) % p
        if g:
            y = (y + aug_a[(keys * g)[:, None] + np.arange(P.active)[None, :]].sum(axis=1)) % p
        dense[:, n] = y
        dense %= p
        R, r = flint.nmod_mat(len(keys), n + 1, dense.ravel().tolist(), p).rref()
        ent = np.array([int(e) for e in R.entries()], dtype=np.int64).reshape(len(keys), n + 1)
        if r < len(keys) or ent[r - 1, :n].max() == 0:
            raise Singular("valid rows of the sampled matrix are dependent")
        for k in range(r):
            j = int(np.flatnonzero(ent[k, :n])[0])
            c0[j] = ent[k, n]
    cells = np.concatenate([c0, aug_a])
    if g and P.active:
        pos, val = sample_rows_np(np.arange(P.N), n, p, P.t_s, seed)
        contrib = (val * c0[pos]) % p                      # (N, t_s)
        pad = P.active * P.chunk - P.t_s
        if pad:
            contrib = np.concatenate([contrib, np.zeros((P.N, pad), dtype=np.int64)], axis=1)
        d = contrib.reshape(P.N, P.active, P.chunk).sum(axis=2) % p
        idx = (np.arange(P.N) * g)[:, None] + np.arange(P.active)[None, :]
        diff = (aug_a[idx] - d) % p
        suffix = np.cumsum(diff[:, ::-1], axis=1)[:, ::-1] % p
        cells[n + idx] = suffix
    return [int(x) for x in cells]


def default_trials(N: int) -> int:
    return max(1, math.ceil(10 * math.log2(N))) if N > 1 else 1


def build_boosted(params: RetrievalParams, pairs, aug, master_seed: int,
                  trials: int | None = None, fast: bool | None = None) -> AugmentedRetrieval:
    trials = default_trials(params.N) if trials is None else trials
    for t in range(trials):
        try:
            s = build(params, pairs, aug, derive_seed(master_seed, t), fast=fast)
        except Singular:
            continue
        s.boost_index = t
        s.master_seed = master_seed & MASK64
        return s
    raise AllTrialsFailed(f"no success in {trials} seeds")
