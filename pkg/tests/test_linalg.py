import random
from itertools import combinations

import pytest
from hypothesis import given, strategies as st

from sucdict.errors import DegenerateParameters, Singular
from sucdict.field import BinaryField, PrimeField
from sucdict.linalg import (SparseMatrix, all_square_minors_nonsingular, cauchy, det, rank,
                            solve_rows)
from sucdict.oracle import dense_rank_reference

F7, F17, F101, F1009 = (PrimeField(p) for p in (7, 17, 101, 1009))


def rand_dense(rng, n, m, p, density=1.0):
    return [[rng.randrange(p) if rng.random() < density else 0 for _ in range(m)] for _ in range(n)]


def test_identity_rank():
    assert rank(SparseMatrix.identity(F7, 9)) == 9


def test_equal_rows_rank_one():
    M = SparseMatrix.from_dense(F7, [[1, 2, 3], [1, 2, 3]])
    assert rank(M) == 1


def test_rank_matches_reference_dense_8x8():
    rng = random.Random(0)
    for _ in range(50):
        d = rand_dense(rng, 8, 8, 17)
        assert rank(SparseMatrix.from_dense(F17, d)) == dense_rank_reference(d, 17)


def test_rank_matches_reference_500_random():
    rng = random.Random(1)
    for trial in range(500):
        n, m = rng.randrange(1, 14), rng.randrange(1, 14)
        p = rng.choice([2, 3, 7, 101, 1009, 65537])
        d = rand_dense(rng, n, m, p, density=rng.choice([0.2, 0.5, 1.0]))
        if trial % 5 == 0 and n > 1:       # plant a dependency
            d[-1] = [(a + 3 * b) % p for a, b in zip(d[0], d[1 % n])]
        assert rank(SparseMatrix.from_dense(PrimeField(p), d)) == dense_rank_reference(d, p)


def test_pure_python_elimination_matches_reference():
    # BinaryField goes through the dict elimination path, check it via GF(2)
    rng = random.Random(2)
    G = BinaryField(1, 0b11)
    for _ in range(100):
        d = rand_dense(rng, 10, 10, 2, 0.4)
        assert rank(SparseMatrix.from_dense(G, d)) == dense_rank_reference(d, 2)


def test_solve_identity():
    t = [5, 0, 3, 6]
    assert solve_rows(SparseMatrix.identity(F7, 4), range(4), t) == t


def test_solve_inconsistent_raises():
    M = SparseMatrix.from_dense(F7, [[1, 1], [2, 2]])
    with pytest.raises(Singular):
        solve_rows(M, [0, 1], [1, 3])


def test_solve_random_full_rank_substitutes_back():
    rng = random.Random(3)
    done = 0
    while done < 10:
        d = rand_dense(rng, 16, 16, 101)
        if dense_rank_reference(d, 101) < 16:
            continue
        M = SparseMatrix.from_dense(F101, d)
        t = [rng.randrange(101) for _ in range(16)]
        c = solve_rows(M, range(16), t)
        assert all(sum(a * b for a, b in zip(row, c)) % 101 == ti for row, ti in zip(d, t))
        done += 1


def test_solve_python_path_substitutes_back():
    rng = random.Random(4)
    G = BinaryField(8)
    for _ in range(20):
        d = rand_dense(rng, 6, 9, 256)
        M = SparseMatrix.from_dense(G, d)
        t = [rng.randrange(256) for _ in range(6)]
        try:
            c = solve_rows(M, range(6), t)
        except Singular:
            continue
        for row, ti in zip(d, t):
            assert G.dot(row, c) == ti


def test_cauchy_f7_example():
    C = cauchy([1, 2], [6, 5], F7)
    assert C == [[4, 5], [5, 2]]
    assert det(F7, C) == 4


def test_cauchy_1x1():
    assert cauchy([1], [2], F7) == [[6]]


def test_cauchy_rejects_collisions():
    with pytest.raises(DegenerateParameters):
        cauchy([1, 2], [2, 3], F7)


def minors_ok_reference(d, p):
    n, m = len(d), len(d[0])
    for k in range(1, min(n, m) + 1):
        for ri in combinations(range(n), k):
            for ci in combinations(range(m), k):
                if dense_rank_reference([[d[r][c] for c in ci] for r in ri], p) < k:
                    return False
    return True


def test_cauchy_5x5_all_minors():
    rng = random.Random(5)
    vals = rng.sample(range(1009), 10)
    C = cauchy(vals[:5], vals[5:], F1009)
    assert all_square_minors_nonsingular(F1009, C)
    assert minors_ok_reference(C, 1009)


def test_minor_check_detects_singular():
    assert not all_square_minors_nonsingular(F7, [[1, 2], [2, 4]])
    assert not all_square_minors_nonsingular(F7, [[1, 0], [3, 4]])


@given(st.lists(st.lists(st.integers(0, 16), min_size=5, max_size=5), min_size=2, max_size=6),
       st.data())
def test_rank_invariant_under_row_ops(d, data):
    M = SparseMatrix.from_dense(F17, d)
    r = rank(M)
    perm = data.draw(st.permutations(range(len(d))))
    assert rank(SparseMatrix.from_dense(F17, [d[i] for i in perm])) == r
    i, j = data.draw(st.integers(0, len(d) - 1)), data.draw(st.integers(0, len(d) - 1))
    f = data.draw(st.integers(0, 16))
    if i != j:
        e = [row[:] for row in d]
        e[i] = [(a + f * b) % 17 for a, b in zip(e[i], e[j])]
        assert rank(SparseMatrix.from_dense(F17, e)) == r
    assert r == dense_rank_reference(d, 17)


def test_det_matches_rank_reference():
    rng = random.Random(6)
    for _ in range(200):
        d = rand_dense(rng, 4, 4, 7, 0.6)
        assert (det(F7, d) != 0) == (dense_rank_reference(d, 7) == 4)
