import random
from fractions import Fraction
from itertools import combinations
from math import comb

import pytest
from hypothesis import given, strategies as st

from sucdict.bucket import BucketCodec, query_bucket, subset_rank, subset_unrank
from sucdict.encoding import SizePartition, realized_distribution
from sucdict.errors import RankOutOfRange, SizeOutOfRange
from sucdict.oracle import log2_fraction


def test_colex_examples():
    assert subset_rank([0, 1], 5) == 0
    assert subset_rank([3, 4], 5) == comb(3, 1) + comb(4, 2) == 9 == comb(5, 2) - 1
    ranks = sorted(subset_rank(list(c), 5) for c in combinations(range(5), 2))
    assert ranks == list(range(10))


def test_unrank_exhaustive_8_choose_3():
    subs = [list(c) for c in combinations(range(8), 3)]
    assert len(subs) == 56
    for S in subs:
        assert subset_unrank(subset_rank(S, 8), 8, 3) == S


def test_rank_errors():
    with pytest.raises(RankOutOfRange):
        subset_rank([2, 1], 5)
    with pytest.raises(RankOutOfRange):
        subset_unrank(10, 5, 2)


@given(st.integers(1, 300), st.data())
def test_rank_unrank_property(V, data):
    s = data.draw(st.integers(0, min(V, 12)))
    S = sorted(data.draw(st.sets(st.integers(0, V - 1), min_size=s, max_size=s)))
    r = subset_rank(S, V)
    assert 0 <= r < comb(V, s)
    assert subset_unrank(r, V, s) == S


def codec_for(V, sigma, n, sizes, w=32):
    part = SizePartition.for_n(n, realized_distribution(sizes, n))
    return BucketCodec(V, sigma, n, part, w)


def random_instance(rng, V, s, sigma):
    return sorted(rng.sample(range(V), s)), [rng.randrange(sigma) for _ in range(s)]


def check_contract(codec, s, n):
    excess = codec.excess_ratio(s)           # 2^(length - target), exact
    assert excess >= 1
    assert log2_fraction(excess) <= 2 / n ** 2


def test_small_uniform_contract():
    # one size, p(2) = 1: target is log2 C(16, 2)
    n = 4
    codec = codec_for(16, 1, n, [2, 2])
    check_contract(codec, 2, n)
    rng = random.Random(0)
    for _ in range(50):
        k, v = random_instance(rng, 16, 2, 1)
        assert codec.decode(codec.encode(k, v)) == (k, v)


def test_empty_bucket():
    n = 1 << 12
    codec = codec_for(64, 1, n, [0, 1, 1])
    rep = codec.encode([], [])
    assert codec.decode(rep) == ([], [])


@pytest.mark.parametrize("sigma", [1, 16])
def test_space_contract_and_roundtrip(sigma):
    n, V, B = 1 << 12, 1 << 16, 64
    rng = random.Random(sigma)
    sizes = [B + rng.randrange(-12, 13) for _ in range(64)]
    codec = codec_for(V, sigma, n, sizes)
    for s in codec.plans:
        check_contract(codec, s, n)
    for _ in range(1000):
        s = rng.choice(sizes)
        k, v = random_instance(rng, V, s, sigma)
        rep = codec.encode(k, v)
        assert rep.M == codec.plans[s].M and rep.K == codec.plans[s].K
        assert codec.decode(rep) == (k, v)


def test_bijection_exhaustive_small_V():
    V, n = 12, 1 << 6
    codec = codec_for(V, 1, n, [2, 3, 3, 4])
    for s in (2, 3, 4):
        seen = set()
        for c in combinations(range(V), s):
            rep = codec.encode(list(c), [0] * s)
            assert codec.decode(rep) == (list(c), [0] * s)
            seen.add((rep.m, rep.k))
        assert len(seen) == comb(V, s)


def test_size_from_first_word():
    n = 1 << 12
    codec = codec_for(1 << 16, 1, n, [60, 64, 70])
    assert codec.peel == -(-codec.t // codec.w)
    rng = random.Random(2)
    for s in (60, 64, 70):
        k, v = random_instance(rng, 1 << 16, s, 1)
        words = codec.encode(k, v).words(codec.w)
        assert codec.size_from_words(words[:codec.peel]) == s


def test_unknown_size_rejected():
    codec = codec_for(1 << 10, 1, 1 << 8, [5, 6])
    with pytest.raises(SizeOutOfRange):
        codec.encode(list(range(7)), [0] * 7)


def test_query_bucket_exhaustive():
    V, n = 1 << 10, 1 << 10
    codec = codec_for(V, 16, n, [20, 22, 25])
    rng = random.Random(3)
    k, v = random_instance(rng, V, 22, 16)
    rep = codec.encode(k, v)
    words = rep.words(codec.w)
    want = dict(zip(k, v))
    for x in range(V):
        got = query_bucket(words.__getitem__, lambda s: rep.k, x, codec)
        assert got == want.get(x)


def test_membership_only_when_sigma_one():
    V, n = 1 << 10, 1 << 10
    codec = codec_for(V, 1, n, [20])
    k, _ = random_instance(random.Random(4), V, 20, 1)
    rep = codec.encode(k, [0] * 20)
    words = rep.words(codec.w)
    hits = [x for x in range(V) if query_bucket(words.__getitem__, lambda s: rep.k, x, codec) is not None]
    assert hits == k
