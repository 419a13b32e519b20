"""Sparse matrices over a finite field: rank, solving and Cauchy matrices."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import flint

from .errors import DegenerateParameters, Singular
from .field import FieldSpec, PrimeField

# flint's nmod_mat works with word-size moduli
_FLINT_MAX = 1 << 63


@dataclass
class SparseMatrix:
    spec: FieldSpec
    nrows: int
    ncols: int
    rows: list  # rows[i] = sorted list of (col, value), values nonzero

    @classmethod
    def from_rows(cls, spec, ncols, rows: Iterable[Iterable[tuple[int, int]]]):
        """Build from (col, value) pairs; repeated columns are summed."""
        out = []
        for r in rows:
            acc: dict[int, int] = {}
            for c, v in r:
                if not 0 <= c < ncols:
                    raise IndexError(f"column {c} out of range")
                acc[c] = spec.add(acc.get(c, 0), v % spec.order if spec.kind == "prime" else v)
            out.append([(c, v) for c, v in sorted(acc.items()) if v])
        return cls(spec, len(out), ncols, out)

    @classmethod
    def from_dense(cls, spec, dense: Sequence[Sequence[int]]):
        ncols = len(dense[0]) if dense else 0
        return cls.from_rows(spec, ncols, ([(j, v) for j, v in enumerate(r) if v] for r in dense))

    @classmethod
    def identity(cls, spec, n):
        return cls(spec, n, n, [[(i, 1)] for i in range(n)])

    def to_dense(self, rows: Sequence[int] | None = None) -> list[list[int]]:
        idx = range(self.nrows) if rows is None else rows
        out = []
        for i in idx:
            r = [0] * self.ncols
            for c, v in self.rows[i]:
                r[c] = v
            out.append(r)
        return out

    def nnz(self) -> int:
        return sum(len(r) for r in self.rows)

    def row_dot(self, i: int, cells: Sequence[int]) -> int:
        return self.spec.dot((v for _, v in self.rows[i]), (cells[c] for c, _ in self.rows[i]))


class RowSet(list):
    """Sorted, distinct row indices."""

    def __init__(self, rows: Iterable[int] = ()):
        super().__init__(sorted(set(rows)))

    def check(self, nrows: int) -> "RowSet":
        if self and (self[0] < 0 or self[-1] >= nrows):
            raise IndexError("row index out of range")
        return self


def _use_flint(spec: FieldSpec) -> bool:
    return isinstance(spec, PrimeField) and spec.p < _FLINT_MAX


def _flint_matrix(M: SparseMatrix, rows, extra=None):
    ncols = M.ncols + (1 if extra is not None else 0)
    ent = [0] * (len(rows) * ncols)
    for k, i in enumerate(rows):
        base = k * ncols
        for c, v in M.rows[i]:
            ent[base + c] = v
        if extra is not None:
            ent[base + M.ncols] = extra[k] % M.spec.p
    return flint.nmod_mat(len(rows), ncols, ent, M.spec.p)


def _eliminate(spec: FieldSpec, work: list[dict[int, int]], ncols: int):
    """Gauss-Jordan on dict rows, in place.

    Pivot columns are taken left to right; for each, the lowest-index
    remaining row with a nonzero entry there becomes the pivot row.
    Returns the list of (pivot column, row position).
    """
    pivots = []
    # column -> set of row positions having a nonzero there
    by_col: dict[int, set[int]] = {}
    for k, r in enumerate(work):
        for c in r:
            by_col.setdefault(c, set()).add(k)
    used: set[int] = set()
    for col in range(ncols):
        cand = [k for k in by_col.get(col, ()) if k not in used]
        if not cand:
            continue
        pk = min(cand)
        used.add(pk)
        prow = work[pk]
        s = spec.inv(prow[col])
        if s != 1:
            for c in prow:
                prow[c] = spec.mul(prow[c], s)
        for k in list(by_col[col]):
            if k == pk:
                continue
            r = work[k]
            f = r.get(col)
            if not f:
                continue
            for c, v in prow.items():
                nv = spec.sub(r.get(c, 0), spec.mul(f, v))
                if nv:
                    if c not in r:
                        by_col.setdefault(c, set()).add(k)
                    r[c] = nv
                else:
                    r.pop(c, None)
                    by_col[c].discard(k)
        pivots.append((col, pk))
    return pivots


def rank(M: SparseMatrix, rows: Iterable[int] | None = None) -> int:
    rs = RowSet(range(M.nrows) if rows is None else rows).check(M.nrows)
    if not rs or M.ncols == 0:
        return 0
    if _use_flint(M.spec):
        return _flint_matrix(M, rs).rank()
    work = [dict(M.rows[i]) for i in rs]
    return len(_eliminate(M.spec, work, M.ncols))


def solve_rows(M: SparseMatrix, rows: Iterable[int], targets: Sequence[int]) -> list[int]:
    """Cells ``c`` with ``row_i . c == target_i`` for each selected row.

    Free columns are set to zero.  Raises :class:`Singular` when the
    selected rows are dependent and contradict their targets.
    """
    rows = list(rows)
    if len(rows) != len(targets):
        raise ValueError("one target per row")
    RowSet(rows).check(M.nrows)
    spec = M.spec
    c = [0] * M.ncols
    if not rows:
        return c
    if _use_flint(spec):
        R, r = _flint_matrix(M, rows, targets).rref()
        table = R.entries()
        width = M.ncols + 1
        for k in range(r):
            base = k * width
            for j in range(M.ncols):
                if int(table[base + j]):
                    c[j] = int(table[base + M.ncols])
                    break
            else:
                raise Singular("selected rows are inconsistent with the targets")
        return c
    n = M.ncols
    work = []
    for i, t in zip(rows, targets):
        d = dict(M.rows[i])
        if t:
            d[n] = t
        work.append(d)
    piv = _eliminate(spec, work, n)
    if any(len(work[k]) == 1 and n in work[k] for k in range(len(work))):
        raise Singular("selected rows are inconsistent with the targets")
    for col, k in piv:
        c[col] = work[k].get(n, 0)
    return c


def cauchy(a: Sequence[int], b: Sequence[int], spec: FieldSpec) -> list[list[int]]:
    """Matrix with entry ``1/(a_i - b_j)``."""
    if len(set(a)) != len(a) or len(set(b)) != len(b) or set(a) & set(b):
        raise DegenerateParameters("cauchy needs pairwise distinct a, b and a_i != b_j")
    return [[spec.inv(spec.sub(x, y)) for y in b] for x in a]


def det(spec: FieldSpec, dense: Sequence[Sequence[int]]) -> int:
    """Determinant by plain Gaussian elimination."""
    m = [list(r) for r in dense]
    n = len(m)
    d = 1
    for col in range(n):
        p = next((r for r in range(col, n) if m[r][col]), None)
        if p is None:
            return 0
        if p != col:
            m[col], m[p] = m[p], m[col]
            d = spec.neg(d)
        d = spec.mul(d, m[col][col])
        s = spec.inv(m[col][col])
        for r in range(col + 1, n):
            f = spec.mul(m[r][col], s)
            if f:
                for j in range(col, n):
                    m[r][j] = spec.sub(m[r][j], spec.mul(f, m[col][j]))
    return d


def all_square_minors_nonsingular(spec: FieldSpec, dense, max_k: int | None = None) -> bool:
    nr, nc = len(dense), len(dense[0])
    top = min(nr, nc) if max_k is None else min(nr, nc, max_k)
    for k in range(1, top + 1):
        for ri in combinations(range(nr), k):
            for ci in combinations(range(nc), k):
                if det(spec, [[dense[r][c] for c in ci] for r in ri]) == 0:
                    return False
    return True
