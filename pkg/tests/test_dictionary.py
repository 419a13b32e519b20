import math
import random

import numpy as np
import pytest

from sucdict.dictionary import (DictParams, Dictionary, bucket_loads, entropy_check, entropy_sum,
                                log2_binomial, opt_bits)
from sucdict.errors import ParamViolation, RetriesExhausted
from sucdict.hashing import FeistelPermutation
from sucdict.oracle import exact_binomial, log2_binomial as ref_log2_binomial


def make(n, U, sigma, seed=0):
    rng = random.Random(seed)
    keys = sorted(rng.sample(range(U), n))
    return keys, [rng.randrange(sigma) for _ in keys]


def test_tiny_dictionary():
    # test-mode overrides: B below log^4 n and a budget above the fixed word granularity
    p = DictParams(8, 2, 1, B=1, budget_bits=10_000)
    d = Dictionary.build([3, 5], None, p, 0)
    assert d.query(3) == 0 and d.query(5) == 0
    assert d.query(4) is None
    assert [x for x in range(8) if x in d] == [3, 5]


def test_exhaustive_medium():
    n, U = 1 << 10, 1 << 14
    keys, vals = make(n, U, 16, 1)
    d = Dictionary.build(keys, vals, DictParams(U, n, 16, B=64), 3)
    want = dict(zip(keys, vals))
    for x in range(U):
        assert d.query(x) == want.get(x)
    rep = d.space_report()
    assert rep["main_redundancy_bits"] <= rep["budget_bits"]
    assert d.store.max_probes <= 40


def test_deterministic_bytes():
    n, U = 256, 1 << 12
    keys, vals = make(n, U, 4, 2)
    p = DictParams(U, n, 4, B=32)
    assert Dictionary.build(keys, vals, p, 9).to_bytes() == Dictionary.build(keys, vals, p, 9).to_bytes()


def test_serialization_roundtrip():
    n, U = 512, 1 << 13
    keys, vals = make(n, U, 16, 3)
    d = Dictionary.build(keys, vals, DictParams(U, n, 16, B=64), 5)
    e = Dictionary.from_bytes(d.to_bytes())
    want = dict(zip(keys, vals))
    assert all(e.query(x) == want.get(x) for x in range(U))


def test_bad_params():
    with pytest.raises(ParamViolation):
        DictParams(10, 6)                 # U < 2n
    with pytest.raises(ParamViolation):
        DictParams(100, 10, B=3)          # U not a multiple of L
    with pytest.raises(ParamViolation):
        Dictionary.build([1, 1], None, DictParams(8, 2, B=1), 0)
    with pytest.raises(ValueError):
        Dictionary.build([1, 2], None, DictParams(8, 2, B=1, budget_bits=10**6), 0).query(8)


def test_budget_enforced():
    n, U = 256, 1 << 12
    keys, _ = make(n, U, 1, 4)
    with pytest.raises(RetriesExhausted) as e:
        Dictionary.build(keys, None, DictParams(U, n, B=32, budget_bits=1.0, retries=3), 0)
    assert {a["outcome"] for a in e.value.log} <= {"space", "load", "concat"}
    assert any(a["outcome"] == "space" for a in e.value.log)


def test_opt_membership():
    assert opt_bits(16, 8, 1) == pytest.approx(math.log2(12870), abs=1e-9)
    assert exact_binomial(16, 8) == 12870
    assert log2_binomial(1 << 16, 1 << 12) == pytest.approx(ref_log2_binomial(1 << 16, 1 << 12), abs=1e-6)


def test_space_report_sigma_one_opt():
    n, U = 256, 1 << 12
    keys, _ = make(n, U, 1, 5)
    d = Dictionary.build(keys, None, DictParams(U, n, B=32), 1)
    rep = d.space_report()
    assert rep["opt_bits"] == pytest.approx(ref_log2_binomial(U, n), abs=1e-6)
    assert rep["total_bits"] == len(d.to_bytes()) * 8 - (-rep["total_bits"]) % 8


def test_permutation_roundtrip():
    P = FeistelPermutation(1 << 14, 77)
    assert all(P.inverse(P(x)) == x for x in range(1 << 14))


def test_entropy_equal_sizes():
    V, B, L = 1 << 10, 16, 8
    got = entropy_sum([B] * L, V, B * L)
    assert got == pytest.approx(L * ref_log2_binomial(V, B), abs=1e-6)


def test_entropy_log_terms_nonnegative():
    rng = random.Random(6)
    V = 1 << 10
    sizes = [rng.randrange(10, 20) for _ in range(16)]
    base = sum(ref_log2_binomial(V, s) for s in sizes)
    assert entropy_sum(sizes, V, sum(sizes)) >= base - 1e-9


def test_entropy_bound_holds():
    n, U = 1 << 12, 1 << 16
    keys, _ = make(n, U, 1, 7)
    res = entropy_check(keys, DictParams(U, n, B=64), list(range(50)))
    assert res["holds"]


def test_bucket_loads_partition_keys():
    n, U = 1 << 10, 1 << 14
    keys, _ = make(n, U, 1, 8)
    p = DictParams(U, n, B=64)
    b, inner = bucket_loads(keys, FeistelPermutation(U, 3), p.L, p.V)
    assert b.min() >= 0 and b.max() < p.L and inner.max() < p.V
    assert np.bincount(b, minlength=p.L).sum() == n
