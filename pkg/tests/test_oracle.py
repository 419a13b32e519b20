import math
import random

import pytest

from sucdict.field import PrimeField
from sucdict.linalg import SparseMatrix, rank
from sucdict.oracle import (OracleConfig, dense_full_rank_probability, dense_rank_reference,
                            exact_binomial, hall_matching_check, log2_binomial, naive_base_convert,
                            naive_base_decode, pascal_binomial, random_sparse_rows,
                            singularity_rate)


def test_rank_reference_basics():
    assert dense_rank_reference([[int(i == j) for j in range(6)] for i in range(6)], 7) == 6
    assert dense_rank_reference([[0] * 4 for _ in range(3)], 7) == 0
    with pytest.raises(ValueError):
        dense_rank_reference([[1] * 5], 7, OracleConfig(max_dim=4))


def test_binomials():
    assert exact_binomial(16, 8) == 12870 == pascal_binomial(16, 8)
    assert exact_binomial(9, 0) == 1
    assert log2_binomial(4, 2) == pytest.approx(math.log2(6), abs=1e-6)
    for U in range(0, 30):
        for n in range(0, U + 1):
            assert exact_binomial(U, n) == pascal_binomial(U, n)
    assert log2_binomial(1 << 16, 1 << 12) == pytest.approx(
        math.lgamma((1 << 16) + 1) / math.log(2) - math.lgamma((1 << 12) + 1) / math.log(2)
        - math.lgamma((1 << 16) - (1 << 12) + 1) / math.log(2), abs=1e-3)


def test_naive_base_convert():
    assert naive_base_convert([3, 1, 4], 7, 7) == [4, 1, 3]     # most significant digit first
    assert naive_base_decode(naive_base_convert([5], 9, 4), 4, 9, 1) == [5]
    rng = random.Random(0)
    A = [rng.randrange(251) for _ in range(300)]
    assert naive_base_decode(naive_base_convert(A, 251, 257), 257, 251, 300) == A


def test_hall_matching():
    assert hall_matching_check([[int(i == j) for j in range(5)] for i in range(5)])
    assert not hall_matching_check([[1, 0, 1], [1, 0, 1], [1, 0, 1]])


def test_full_rank_implies_matching():
    rng = random.Random(1)
    both = 0
    for _ in range(200):
        n = rng.randrange(2, 12)
        M = random_sparse_rows(n, rng.randrange(1, 4), 11, rng)
        if dense_rank_reference(M, 11) == n:
            assert hall_matching_check(M)
            both += 1
    assert both > 10


def test_singularity_rate_lemma_example():
    assert singularity_rate(32, 50, 67, 200, seed=2) >= 0.5


def test_singularity_rate_t1_near_zero():
    assert singularity_rate(32, 1, 67, 100, seed=3) <= 0.05


def test_dense_rate_matches_product_formula():
    n, p, trials = 8, 3, 2000
    rate = singularity_rate(n, None, p, trials, seed=4)
    expect = dense_full_rank_probability(n, p)
    sd = math.sqrt(expect * (1 - expect) / trials)
    assert abs(rate - expect) < 5 * sd


def test_reference_agrees_with_linalg():
    rng = random.Random(5)
    for _ in range(100):
        n = rng.randrange(1, 10)
        M = random_sparse_rows(n, rng.randrange(1, 5), 13, rng)
        assert dense_rank_reference(M, 13) == rank(SparseMatrix.from_dense(PrimeField(13), M))
