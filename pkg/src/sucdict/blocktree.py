"""Retrieval matrix with limited randomness, organised as a binary tree of blocks.

Level-1 blocks hold the retrieval rows routed to them by a k-wise hash and own
``B + Delta_1`` columns.  Every higher block owns ``2 Delta_{i-1} + Delta_i``
filler rows (augmented queries drafted as extra equations) and ``2 Delta_i``
supplementary columns; the root owns ``2 Delta_{h-1}`` fillers and no columns.
Columns are numbered in postorder, so each subtree is a contiguous interval
with its supplementary columns at the end.

A row ``v`` in a level-``i`` block is nonzero exactly on the supplementary
columns of its block and of the block's two children, with value
``x_i^(j+1) / (v + j + 2)`` at column ``j`` (0-based), i.e. a column-scaled
Cauchy matrix with parameters ``v+1`` and ``-(j+1)``.  Everything is over
``F_p`` with ``p = 2^61 - 1``.

Each row with ``t`` nonzeros is then spread over ``t`` augmented queries as in
the plain augmented retrieval, but scaled by ``v + j + 2`` so that answering a
query needs no field inversion.
"""
from __future__ import annotations

import bisect
import functools
import math
import struct
from dataclasses import dataclass, field

import flint
import numpy as np

from .errors import InsufficientAugmented, OverflowBlock, ParamViolation, Singular
from .field import (M61, PowerTable, PrimeField, addmod61, mulmod61, pow_table_eval,
                    submod61)
from .hashing import GOLDEN, KWiseHash, derive_seed, mix64
from .util import ceil_log2

P = M61
SPEC = PrimeField(M61)
_U = np.uint64
MAGIC = b"SUCB"


def _ceil_c_sqrt(c, x: int) -> int:
    """ceil(c * sqrt(x)), exact when c is an integer."""
    if float(c).is_integer():
        v = int(c) ** 2 * x
        r = math.isqrt(v)
        return r + (r * r < v)
    return math.ceil(c * math.sqrt(x))


# -- modular helpers ---------------------------------------------------------------

@functools.lru_cache(maxsize=4)
def inverse_table(k: int) -> np.ndarray:
    """Inverses of 0..k modulo p (entry 0 is 0), by batch inversion."""
    pre = [1] * (k + 1)
    for i in range(1, k + 1):
        pre[i] = pre[i - 1] * i % P
    inv = [0] * (k + 1)
    acc = pow(pre[k], P - 2, P)
    for i in range(k, 0, -1):
        inv[i] = acc * pre[i - 1] % P
        acc = acc * i % P
    out = np.array(inv, dtype=_U)
    out.flags.writeable = False
    return out


def powers(x: int, count: int) -> np.ndarray:
    """``[x^1, ..., x^count]`` modulo p."""
    out = np.array([x % P], dtype=_U)
    while len(out) < count:
        step = pow(x, len(out), P)
        out = np.concatenate([out, mulmod61(out, _U(step))])
    return out[:count]


_LIMB = 21
_LIMB_MASK = _U((1 << _LIMB) - 1)
_SHIFTS = [pow(2, _LIMB * s, P) for s in range(5)]


def matmul61(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """``A @ B mod p`` using exact float64 products of 21-bit limbs."""
    A = np.asarray(A, dtype=_U)
    B = np.asarray(B, dtype=_U)
    r, K = A.shape
    c = B.shape[1]
    out = np.zeros((r, c), dtype=_U)
    if r == 0 or c == 0 or K == 0:
        return out
    for k0 in range(0, K, 2048):       # 2048 * 2^42 < 2^53 keeps sums exact
        a, b = A[:, k0:k0 + 2048], B[k0:k0 + 2048]
        al = [((a >> _U(_LIMB * s)) & _LIMB_MASK).astype(np.float64) for s in range(3)]
        bl = [((b >> _U(_LIMB * s)) & _LIMB_MASK).astype(np.float64) for s in range(3)]
        for d in range(5):
            part = sum((al[s] @ bl[d - s]).astype(_U) for s in range(max(0, d - 2), min(d, 2) + 1))
            out = addmod61(out, mulmod61(part % _U(P), _U(_SHIFTS[d])))
    return out


def _suffix_sum61(X: np.ndarray) -> np.ndarray:
    """Row-wise suffix sums modulo p (entries < p)."""
    hi, lo = X >> _U(31), X & _U((1 << 31) - 1)
    sh = np.flip(np.cumsum(np.flip(hi, 1), axis=1, dtype=_U), 1) % _U(P)
    sl = np.flip(np.cumsum(np.flip(lo, 1), axis=1, dtype=_U), 1) % _U(P)
    return addmod61(mulmod61(sh, _U(1 << 31)), sl)


def _rowsum61(X: np.ndarray) -> np.ndarray:
    hi = X >> _U(31)
    lo = X & _U((1 << 31) - 1)
    sh = hi.sum(axis=1, dtype=_U) % _U(P)
    sl = lo.sum(axis=1, dtype=_U) % _U(P)
    return addmod61(mulmod61(sh, _U(1 << 31)), sl)


def _rref(Z: np.ndarray):
    """Reduced row echelon form modulo p: (nonzero rows, pivot column per row)."""
    r, c = Z.shape
    if r == 0 or c == 0:
        return np.zeros((0, c), dtype=_U), np.zeros(0, dtype=np.int64)
    R, rank = flint.nmod_mat(r, c, Z.ravel().tolist(), P).rref()
    if rank == 0:
        return np.zeros((0, c), dtype=_U), np.zeros(0, dtype=np.int64)
    ent = R.entries()[:rank * c]
    Rn = np.array([int(e) for e in ent], dtype=_U).reshape(rank, c)
    return Rn, np.argmax(Rn != 0, axis=1)


def _solve(A: np.ndarray, B: np.ndarray):
    """``A^-1 B`` modulo p for square A, or None when A is singular."""
    n, k = len(A), B.shape[1]
    Am = flint.nmod_mat(n, n, A.ravel().tolist(), P)
    if k == 0:
        return np.zeros((n, 0), dtype=_U) if Am.rank() == n else None
    try:
        X = Am.solve(flint.nmod_mat(n, k, B.ravel().tolist(), P))
    except ZeroDivisionError:
        return None
    return np.array([int(e) for e in X.entries()], dtype=_U).reshape(n, k)


# -- parameters and layout ---------------------------------------------------------

class BlockTreeParams:
    """Sizes of the block tree.

    ``n`` is rounded up to ``B * 2^(h-1)`` by adding dummy keys
    ``N, N+1, ...`` that are always stored (with value 0); ``N_pad`` counts
    them as retrieval rows.
    """

    def __init__(self, N: int, n: int, m: int | None = None, B: int | None = None,
                 beta: int = 16, c: float = 4, q: int | None = None, k: int | None = None):
        if n < 1 or N < n:
            raise ParamViolation("need 1 <= n <= N")
        self.N, self.n, self.beta, self.c = N, n, beta, c
        self.logn = max(1, ceil_log2(n))
        B = min(n, beta * self.logn) if B is None else B
        if not 1 <= B <= n:
            raise ParamViolation("B must lie in [1, n]")
        self.B = B
        self.blocks = 1 << ceil_log2(-(-n // B))
        self.n_pad = B * self.blocks
        self.N_pad = N + self.n_pad - n
        h = self.h = self.blocks.bit_length()
        self.k = self.logn ** 2 if k is None else k

        d = [0] * (h + 1)
        for i in range(1, h):
            d[i] = _ceil_c_sqrt(c, (1 << (i - 1)) * B * self.logn)
        self.delta = d
        # per level (1-based; index 0 unused)
        self.supp = [0] * (h + 1)
        self.fill = [0] * (h + 1)
        self.S = [0] * (h + 1)
        self.nz = [0] * (h + 1)
        self.nb = [0] * (h + 1)
        for i in range(1, h + 1):
            self.nb[i] = self.blocks >> (i - 1)
            if i == 1:
                self.supp[i] = B + d[1]
                self.S[i] = self.nz[i] = self.supp[i]
            else:
                self.supp[i] = 2 * d[i]
                self.fill[i] = 2 * d[i - 1] + d[i]
                self.S[i] = 2 * self.S[i - 1] + self.supp[i]
                self.nz[i] = 2 * self.supp[i - 1] + self.supp[i]
        self.f = [self.nb[i] * self.fill[i] for i in range(h + 1)]
        self.foff = [sum(self.f[:i]) for i in range(h + 1)]
        self.n_f = sum(self.f)
        self.n_cols = self.S[h]
        assert self.n_cols == self.n_pad + self.n_f
        # first column of every subtree, root first
        self.start = [[] for _ in range(h + 1)]
        self.start[h] = [0]
        for i in range(h - 1, 0, -1):
            self.start[i] = [self.start[i + 1][b // 2] + (b % 2) * self.S[i] for b in range(self.nb[i])]

        need = max((self.f[i] * (self.nz[i] + 1) for i in range(2, h + 1)), default=0)
        self.q = need if q is None else q
        if self.q < need:
            raise InsufficientAugmented(f"q={self.q} below the per-level need {need}")
        self.W1 = self.N_pad * self.S[1]
        self.m_min = self.W1 + (h - 1) * self.q
        self.m = self.m_min if m is None else m
        if self.m < self.m_min:
            raise InsufficientAugmented(f"m={self.m} below {self.m_min}")
        self.inv_limit = self.N_pad + self.n_f + self.n_cols + 2
        if self.inv_limit >= P or n ** 6 > P and n > 1:
            raise ParamViolation("field too small for these sizes")

    @property
    def cells(self) -> int:
        return self.n_pad + self.m

    def level_base(self, i: int) -> int:
        return 0 if i == 1 else self.W1 + (i - 2) * self.q

    def supp_range(self, i: int, b: int) -> tuple[int, int]:
        end = self.start[i][b] + self.S[i]
        return end - self.supp[i], end

    def block_columns(self, i: int, b: int) -> np.ndarray:
        if i == 1:
            return np.arange(*self.supp_range(1, b), dtype=np.int64)
        parts = [np.arange(*self.supp_range(i - 1, 2 * b + t), dtype=np.int64) for t in (0, 1)]
        parts.append(np.arange(*self.supp_range(i, b), dtype=np.int64))
        return np.concatenate(parts)

    def filler_rows(self, i: int, b: int) -> range:
        lo = self.N_pad + self.foff[i] + b * self.fill[i]
        return range(lo, lo + self.fill[i])

    def filler_level(self, v: int) -> tuple[int, int, int]:
        """(level, block, index within level) of filler row v."""
        r = v - self.N_pad
        if not 0 <= r < self.n_f:
            raise IndexError("not a filler row")
        i = bisect.bisect_right(self.foff, r, 2) - 1
        k = r - self.foff[i]
        return i, k // self.fill[i], k


@dataclass
class Block:
    level: int
    index: int
    columns: tuple[int, int]       # subtree column interval
    supplementary: tuple[int, int]
    rows: range                    # filler rows (empty on level 1)


@dataclass
class ColumnLayout:
    params: BlockTreeParams
    blocks: list[Block]

    def deltas(self, loads) -> dict[tuple[int, int], int]:
        """delta_u = columns minus valid rows in each subtree, given level-1 loads."""
        p = self.params
        out, sub = {}, list(loads)
        for i in range(1, p.h + 1):
            if i > 1:
                sub = [sub[2 * b] + sub[2 * b + 1] + p.fill[i] for b in range(p.nb[i])]
            for b in range(p.nb[i]):
                out[(i, b)] = p.S[i] - sub[b]
        return out


def layout(p: BlockTreeParams) -> ColumnLayout:
    blocks = []
    for i in range(1, p.h + 1):
        for b in range(p.nb[i]):
            lo = p.start[i][b]
            blocks.append(Block(i, b, (lo, lo + p.S[i]), p.supp_range(i, b),
                                p.filler_rows(i, b) if i > 1 else range(0)))
    return ColumnLayout(p, blocks)


def count_nonzeros(lay: ColumnLayout | BlockTreeParams) -> int:
    p = lay.params if isinstance(lay, ColumnLayout) else lay
    return p.N_pad * p.nz[1] + sum(p.f[i] * p.nz[i] for i in range(2, p.h + 1))


def nonzero_bound(N: int, n: int) -> float:
    lg = math.log2(n)
    return 3 * (N * lg + n * lg * lg)


# -- augmented query assignment ---------------------------------------------------

def sparsify_assignment(p: BlockTreeParams, a: int) -> tuple[int, int]:
    """Row and nonzero ordinal sparsified by augmented query ``a``.

    Filler queries come back as ``(v, -1)``; queries outside every row's
    range (plain array slots) as ``(-1, -1)``.
    """
    if not 0 <= a < p.m:
        raise IndexError("augmented index outside [0, m)")
    if a < p.W1:
        return divmod(a, p.S[1])
    i = (a - p.W1) // p.q + 2 if p.q else p.h + 1
    if i > p.h:
        return -1, -1
    loc = a - p.level_base(i)
    spars = p.f[i] * p.nz[i]
    if loc < spars:
        phi, k = divmod(loc, p.nz[i])
        return p.N_pad + p.foff[i] + phi, k
    if loc < spars + p.f[i]:
        return p.N_pad + p.foff[i] + loc - spars, -1
    return -1, -1


def row_aug_start(p: BlockTreeParams, v: int) -> int:
    """Augmented index of the first sparsifier of row v."""
    if v < p.N_pad:
        return v * p.S[1]
    i, _, k = p.filler_level(v)
    return p.level_base(i) + k * p.nz[i]


def filler_aug_index(p: BlockTreeParams, v: int) -> int:
    i, _, k = p.filler_level(v)
    return p.level_base(i) + p.f[i] * p.nz[i] + k


def aug_cell(p: BlockTreeParams, a: int) -> int:
    """Cell owned by a non-filler augmented query."""
    if a < p.W1:
        return p.n_cols + a
    i = (a - p.W1) // p.q + 2 if p.q else p.h + 1
    if i > p.h:
        return p.n_cols + a - p.n_f
    loc = a - p.level_base(i)
    spars = p.f[i] * p.nz[i]
    before = p.foff[i] + min(max(loc - spars, 0), p.f[i])
    if spars <= loc < spars + p.f[i]:
        raise ValueError("filler queries own no cell")
    return p.n_cols + a - before


# -- seeds ------------------------------------------------------------------------

@dataclass(frozen=True)
class LevelSeeds:
    exponents: tuple[int, ...]      # a_1..a_h in [1, p-1)

    @classmethod
    def sample(cls, h: int, seed: int) -> "LevelSeeds":
        out = []
        for i in range(h):
            s = derive_seed(seed, i)
            out.append(((mix64(s ^ GOLDEN) << 64) | s) % (P - 2) + 1)
        return cls(tuple(out))

    def x(self, table: PowerTable) -> list[int]:
        return [pow_table_eval(table, a) for a in self.exponents]


_TABLES: dict[int, PowerTable] = {}


def power_table(n: int) -> PowerTable:
    if n not in _TABLES:
        _TABLES[n] = PowerTable(SPEC, n, 0.25)
    return _TABLES[n]


# -- tree elimination -------------------------------------------------------------

@dataclass
class _Residual:
    """Reduced rows over one block's supplementary columns:
    ``c[lo+piv[k]] + Rf[k] . c[lo+free] = rhs[k]``."""
    lo: int
    width: int
    piv: np.ndarray
    free: np.ndarray
    Rf: np.ndarray
    rhs: np.ndarray | None


@dataclass
class _Back:
    cols: np.ndarray        # global columns fixed at this block
    coef: np.ndarray        # their coefficients on the block's own columns
    rhs: np.ndarray | None
    own: tuple[int, int]
    kids: list


def _residual(lo: int, width: int, R: np.ndarray, piv: np.ndarray, rhs) -> _Residual:
    free = np.setdiff1d(np.arange(width), piv)
    return _Residual(lo, width, piv, free, R[:, free], rhs)


class _Eliminator:
    """Exact bottom-up Gaussian elimination over the block tree.

    Interior columns of a block (the supplementary columns of its children)
    appear in no row outside its subtree, so they are eliminated there and
    only rows reduced to the block's own columns travel upward.
    """

    def __init__(self, p: BlockTreeParams, row_matrix, rhs_of=None):
        self.p = p
        self.row_matrix = row_matrix     # (level, block) -> (X over block columns, row ids)
        self.rhs_of = rhs_of             # row ids -> targets, or None for rank only
        self.rank = 0
        self.deficient = False
        self.back: dict[tuple[int, int], _Back] = {}

    def run(self) -> None:
        p = self.p
        res: dict[tuple[int, int], _Residual] = {}
        for i in range(1, p.h + 1):
            for b in range(p.nb[i]):
                X, rows = self.row_matrix(i, b)
                y = None if self.rhs_of is None else self.rhs_of(rows)
                kids = [res.pop((i - 1, 2 * b)), res.pop((i - 1, 2 * b + 1))] if i > 1 else []
                res[(i, b)] = self._block(i, b, X, y, kids)

    def _block(self, i, b, X, y, kids):
        p = self.p
        root = i == p.h
        parts, icols, off = [], [], 0
        for ch in kids:
            Xk = X[:, off:off + ch.width]
            off += ch.width
            Xp = Xk[:, ch.piv]
            parts.append(submod61(Xk[:, ch.free], matmul61(Xp, ch.Rf)))
            if y is not None:
                y = submod61(y, matmul61(Xp, ch.rhs[:, None])[:, 0])
            icols.append(ch.lo + ch.free)
        own_lo, own_hi = p.supp_range(i, b)
        parts.append(X[:, off:])
        if root:
            icols.append(np.arange(own_lo, own_hi))
        nI = sum(len(c) for c in icols)
        nO = 0 if root else own_hi - own_lo
        if y is not None:
            parts.append(y[:, None])
        Z = np.hstack(parts) if parts else np.zeros((len(X), 0), dtype=_U)
        icat = np.concatenate(icols) if icols else np.zeros(0, dtype=np.int64)
        out = self._schur(i, b, Z, nI, nO, icat, y is not None, kids, (own_lo, own_hi))
        if out is not None:
            return out
        R, piv = _rref(Z)
        self._account(R, piv, nI + nO, len(X), y is not None)
        inner = piv < nI
        Ri = R[inner]
        self.back[(i, b)] = _Back(icat[piv[inner]], Ri[:, nI:nI + nO],
                                  Ri[:, -1] if y is not None else None, (own_lo, own_hi), kids)
        outer = ~inner & (piv < nI + nO)
        Ro = R[outer][:, nI:nI + nO]
        rhs = R[outer][:, -1] if y is not None else None
        return _residual(own_lo, nO, Ro, piv[outer] - nI, rhs)

    def _account(self, R, piv, ncols, nrows, solving):
        real = piv < ncols
        if solving and not real.all():
            raise Singular("inconsistent system")
        self.rank += int(real.sum())
        if real.sum() < nrows:
            self.deficient = True
            if solving:
                raise Singular("rows are dependent")

    def _schur(self, i, b, Z, nI, nO, icat, solving, kids, own):
        """Shortcut when the first nI rows pin down every interior column:
        invert that square block and reduce the remaining rows against it."""
        if nI == 0 or len(Z) < nI:
            return None
        T = _solve(Z[:nI, :nI], Z[:nI, nI:])
        if T is None:
            return None
        self.rank += nI
        self.back[(i, b)] = _Back(icat, T[:, :nO], T[:, -1] if solving else None, own, kids)
        rest = submod61(Z[nI:, nI:], matmul61(Z[nI:, :nI], T))
        R, piv = _rref(rest)
        self._account(R, piv, nO, len(rest), solving)
        return _residual(own[0], nO, R[:, :nO], piv, R[:, -1] if solving else None)

    def solve(self, ncols: int) -> np.ndarray:
        p = self.p
        self.run()
        c = np.zeros(ncols, dtype=_U)
        for i in range(p.h, 0, -1):
            for b in range(p.nb[i]):
                bk = self.back[(i, b)]
                lo, hi = bk.own
                if len(bk.cols):
                    own = c[lo:hi] if i < p.h else np.zeros(0, dtype=_U)
                    c[bk.cols] = submod61(bk.rhs, matmul61(bk.coef, own[:, None])[:, 0])
                for ch in bk.kids:
                    if len(ch.piv):
                        fr = c[ch.lo + ch.free]
                        c[ch.lo + ch.piv] = submod61(ch.rhs, matmul61(ch.Rf, fr[:, None])[:, 0])
        return c


# -- the structure ----------------------------------------------------------------

class BlockTree:
    """Cells of the sparsified block-tree matrix plus what is needed to query them."""

    def __init__(self, params: BlockTreeParams, seeds: LevelSeeds, hash_seed: int,
                 cells: np.ndarray | None = None):
        p = self.params = params
        self.seeds = seeds
        self.hash_seed = hash_seed
        self.hash = KWiseHash(p.k, hash_seed, p.blocks)
        self.table = power_table(p.n)
        self.x = seeds.x(self.table)
        self.cells = cells
        self.probes = 0
        self._inv = None
        self._pw: dict[int, np.ndarray] = {}

    # lazily built vector tables (construction and bulk checking only)
    def inv(self) -> np.ndarray:
        if self._inv is None:
            self._inv = inverse_table(self.params.inv_limit)
        return self._inv

    def pw(self, i: int) -> np.ndarray:
        if i not in self._pw:
            self._pw[i] = powers(self.x[i - 1], self.params.n_cols)
        return self._pw[i]

    # -- structure ------------------------------------------------------------
    def block_of(self, v: int) -> tuple[int, int]:
        p = self.params
        if v < p.N_pad:
            return 1, self.hash(v)
        i, b, _ = p.filler_level(v)
        return i, b

    def row_nonzeros(self, v: int) -> list[tuple[int, int]]:
        i, b = self.block_of(v)
        a = self.seeds.exponents[i - 1]
        out = []
        for j in self.params.block_columns(i, b).tolist():
            xj = pow_table_eval(self.table, a * (j + 1))
            out.append((j, xj * pow(v + j + 2, P - 2, P) % P))
        return out

    def dense_rows(self, i: int, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        inv = self.inv()
        return mulmod61(self.pw(i)[cols][None, :],
                        inv[rows.astype(np.int64)[:, None] + cols[None, :] + 2])

    def valid_rows(self, keys) -> np.ndarray:
        p = self.params
        return np.concatenate([np.asarray(sorted(keys), dtype=np.int64),
                               np.arange(p.N, p.N_pad, dtype=np.int64)])

    def level1_blocks(self) -> np.ndarray:
        return self.hash.eval_np(np.arange(self.params.N_pad, dtype=np.uint64)).astype(np.int64)

    def _eliminator(self, keys, rhs_of=None, entries=None) -> _Eliminator:
        """``entries[i]``, when given, holds the level-i entry matrix row-aligned
        with ``_level_rows(i)``."""
        p = self.params
        valid = self.valid_rows(keys)
        blk = self.level1_blocks()[valid]
        order = np.argsort(blk, kind="stable")
        starts = np.searchsorted(blk[order], np.arange(p.blocks + 1))

        def rows_of(i, b):
            if i == 1:
                rows = valid[order[starts[b]:starts[b + 1]]]
            else:
                rows = np.arange(p.filler_rows(i, b).start, p.filler_rows(i, b).stop, dtype=np.int64)
            if entries is None:
                return self.dense_rows(i, rows, p.block_columns(i, b)), rows
            if i == 1:
                return entries[1][rows], rows
            return entries[i][b * p.fill[i]:(b + 1) * p.fill[i]], rows

        return _Eliminator(p, rows_of, rhs_of)

    def check_loads(self, keys) -> dict:
        p = self.params
        loads = np.bincount(self.level1_blocks()[self.valid_rows(keys)], minlength=p.blocks)
        deltas = layout(p).deltas(loads.tolist())
        for (i, b), d in deltas.items():
            cap = 2 * p.delta[i] if i < p.h else 0
            if not 0 <= d <= cap:
                raise OverflowBlock(f"block ({i},{b}) has delta {d} outside [0, {cap}]")
        return deltas

    def valid_rank(self, keys) -> int:
        """Rank of the valid rows of the unsparsified matrix."""
        el = self._eliminator(keys)
        el.run()
        return el.rank

    # -- construction ---------------------------------------------------------
    def _sparse_levels(self) -> list[int]:
        p = self.params
        return [i for i in range(1, p.h + 1) if i == 1 or p.f[i]]

    def _level_rows(self, i):
        """Rows of level i, their column matrix, first augmented index and
        first cell of the level's sparsifiers (both contiguous, row-major)."""
        p = self.params
        if i == 1:
            rows = np.arange(p.N_pad, dtype=np.int64)
            first = np.asarray(p.start[1], dtype=np.int64)[self.level1_blocks()]
            cols = first[:, None] + np.arange(p.S[1])[None, :]
        else:
            rows = np.arange(p.f[i], dtype=np.int64) + p.N_pad + p.foff[i]
            per = np.stack([p.block_columns(i, b) for b in range(p.nb[i])])
            cols = np.repeat(per, p.fill[i], axis=0)
        a0 = p.level_base(i)
        return rows, cols, a0, p.n_cols + a0 - p.foff[i]

    def fill_cells(self, keys, values, aug) -> None:
        p = self.params
        aug = np.asarray(aug, dtype=_U)
        if len(aug) != p.m:
            raise ParamViolation(f"need exactly m={p.m} augmented values")
        inv = self.inv()
        Y = np.zeros(p.N_pad + p.n_f, dtype=_U)
        Y[np.asarray(keys, dtype=np.int64)] = np.asarray([int(v) for v in values], dtype=_U)
        levels = {}
        # shift of each row target by its sparsifiers: sum_k a_k / (v + j_k + 2)
        for i in self._sparse_levels():
            rows, cols, a0, c0 = self._level_rows(i)
            iv = inv[rows[:, None] + cols + 2]
            E = mulmod61(self.pw(i)[cols], iv)
            aiv = mulmod61(aug[a0:a0 + cols.size].reshape(cols.shape), iv)
            del iv
            if i > 1:
                Y[rows] = aug[self._filler_aug(i)]
            Y[rows] = addmod61(Y[rows], _rowsum61(aiv))
            levels[i] = (cols, E, aiv, c0)
        el = self._eliminator(keys, lambda rows: Y[rows], {i: v[1] for i, v in levels.items()})
        c = el.solve(p.n_cols)
        cells = np.zeros(p.cells, dtype=_U)
        cells[:p.n_cols] = c
        for i, (cols, E, aiv, c0) in levels.items():
            t = submod61(aiv, mulmod61(E, c[cols]))
            cells[c0:c0 + cols.size] = _suffix_sum61(t).ravel()
        del levels
        # plain slots
        for a0, a1 in self._identity_ranges():
            idx = np.arange(a0, a1)
            cells[self._cell_of(idx)] = aug[idx]
        self.cells = cells

    def _filler_aug(self, i: int) -> np.ndarray:
        p = self.params
        return p.level_base(i) + p.f[i] * p.nz[i] + np.arange(p.f[i])

    def _identity_ranges(self):
        p = self.params
        out = []
        for i in range(2, p.h + 1):
            base = p.level_base(i)
            out.append((base + p.f[i] * (p.nz[i] + 1), base + p.q))
        out.append((p.W1 + (p.h - 1) * p.q, p.m))
        return [(a, b) for a, b in out if b > a]

    def _cell_of(self, a: np.ndarray) -> np.ndarray:
        p = self.params
        a = np.asarray(a, dtype=np.int64)
        before = np.zeros_like(a)
        if p.q:
            lvl = np.where(a >= p.W1, (a - p.W1) // p.q + 2, 1)
            for i in range(2, p.h + 1):
                sel = lvl == i
                loc = a[sel] - p.level_base(i)
                before[sel] = p.foff[i] + np.clip(loc - p.f[i] * p.nz[i], 0, p.f[i])
            before[lvl > p.h] = p.n_f
        else:
            before[a >= p.W1] = p.n_f
        return p.n_cols + a - before

    # -- queries --------------------------------------------------------------
    def _read(self, j: int) -> int:
        self.probes += 1
        return int(self.cells[j])

    def query(self, v: int) -> int:
        """Answer of retrieval row v (meaningful for stored keys)."""
        p = self.params
        if not 0 <= v < p.N:
            raise IndexError("retrieval index outside [0, N)")
        return (P - self._read(aug_cell(p, row_aug_start(p, v)))) % P

    def query_aug(self, a: int) -> int:
        p = self.params
        v, k = sparsify_assignment(p, a)
        if v < 0:
            return self._read(aug_cell(p, a))
        if k < 0:
            return (P - self._read(aug_cell(p, row_aug_start(p, v)))) % P
        i, b = self.block_of(v)
        cols = p.block_columns(i, b)
        j = int(cols[k])
        xj = pow_table_eval(self.table, self.seeds.exponents[i - 1] * (j + 1))
        s = v + j + 2
        acc = xj * self._read(j) + s * self._read(aug_cell(p, a))
        if k + 1 < p.nz[i]:
            acc -= s * self._read(aug_cell(p, a + 1))
        return acc % P

    def answers_np(self) -> tuple[np.ndarray, np.ndarray]:
        """All retrieval-row answers (length N_pad) and augmented answers (length m),
        computed with the same coefficients as the single queries."""
        p = self.params
        c = self.cells
        ret = np.zeros(p.N_pad, dtype=_U)
        out = np.zeros(p.m, dtype=_U)
        for i in self._sparse_levels():
            rows, cols, a0, c0 = self._level_rows(i)
            ce = c[c0:c0 + cols.size].reshape(cols.shape)
            nxt = np.zeros_like(ce)
            nxt[:, :-1] = ce[:, 1:]
            s = (rows[:, None] + cols + 2).astype(_U)
            ans = addmod61(mulmod61(self.pw(i)[cols], c[cols]), mulmod61(s, submod61(ce, nxt)))
            out[a0:a0 + cols.size] = ans.ravel()
            first = submod61(_U(0), ce[:, 0])
            if i == 1:
                ret[:] = first
            else:
                out[self._filler_aug(i)] = first
        for a0, a1 in self._identity_ranges():
            idx = np.arange(a0, a1)
            out[idx] = c[self._cell_of(idx)]
        return ret, out

    # -- serialization ------------------------------------------------------------
    def to_bytes(self) -> bytes:
        p = self.params
        head = struct.pack("<4s8Q", MAGIC, p.N, p.n, p.m, p.B, p.q, p.k, self.hash_seed, p.h)
        head += struct.pack(f"<{p.h}Q", *self.seeds.exponents)
        head += struct.pack("<d", float(p.c))
        return head + self.cells.astype("<u8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "BlockTree":
        magic, N, n, m, B, q, k, hs, h = struct.unpack_from("<4s8Q", data)
        if magic != MAGIC:
            raise ValueError("not a block-tree container")
        off = struct.calcsize("<4s8Q")
        exps = struct.unpack_from(f"<{h}Q", data, off)
        off += 8 * h
        (c,) = struct.unpack_from("<d", data, off)
        off += 8
        c = int(c) if c.is_integer() else c
        p = BlockTreeParams(N, n, m, B=B, c=c, q=q, k=k)
        cells = np.frombuffer(data, dtype="<u8", offset=off).astype(_U)
        return cls(p, LevelSeeds(tuple(exps)), hs, cells)


def build(params: BlockTreeParams, keys, values, aug, seeds: LevelSeeds, hash_seed: int) -> BlockTree:
    """Solve for the cells; raises OverflowBlock (new hash) or Singular (new seeds)."""
    keys = [int(x) for x in keys]
    if len(keys) != params.n or len(set(keys)) != params.n:
        raise ParamViolation("need exactly n distinct keys")
    if any(not 0 <= x < params.N for x in keys):
        raise ParamViolation("key outside [0, N)")
    if len(values) != params.n or any(not 0 <= int(v) < P for v in values):
        raise ParamViolation("need n values in [0, p)")
    t = BlockTree(params, seeds, hash_seed)
    t.check_loads(keys)
    t.fill_cells(keys, values, aug)
    return t


def build_with_retries(params: BlockTreeParams, keys, values, aug, master_seed: int,
                       trials: int = 20) -> tuple[BlockTree, list[str]]:
    """Resample the hash on overflow and the level seeds on singularity."""
    log = []
    hash_seed = derive_seed(master_seed, 0)
    for t in range(trials):
        seeds = LevelSeeds.sample(params.h, derive_seed(master_seed, 1 + t))
        try:
            return build(params, keys, values, aug, seeds, hash_seed), log + ["ok"]
        except OverflowBlock:
            log.append("overflow")
            hash_seed = derive_seed(hash_seed, t + 1)
        except Singular:
            log.append("singular")
    raise Singular(f"no full-rank build in {trials} trials: {log}")
