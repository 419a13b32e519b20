import math
import random

import pytest

from sucdict.concat import P_MAX, ConcatParams, ConcatStore, inequality_one
from sucdict.errors import ParamViolation
from sucdict.util import BitReader, BitWriter

W = 32


def synthetic(L, types, seed=0, zero_spill=False):
    rng = random.Random(seed)
    words = {s: M for s, (M, K) in types.items()}
    K = {s: K for s, (M, K) in types.items()}
    reps = []
    for i in range(L):
        s = list(types)[i % len(types)] if i < len(types) else rng.choice(list(types))
        reps.append(([rng.getrandbits(W) for _ in range(words[s])],
                     0 if zero_spill else rng.randrange(K[s]), s))
    return reps, ConcatParams(W, 1, words, K)


def readback(st, reps):
    for i, (ws, k, s) in enumerate(reps):
        for j, x in enumerate(ws):
            assert st.read_word(i, j, s=s) == x
            assert st.last_probes <= P_MAX
        assert st.read_spill(i, s=s) == k


def itemized(rep):
    return rep["directory_bits"] + rep["boost_bits"] + rep["conversion_bits"] + rep["prime_rounding_bits"]


def test_single_representation():
    reps, P = synthetic(1, {5: (4, 1000)})
    st = ConcatStore.build(reps, P, 1)
    readback(st, reps)
    rep = st.redundancy_report([5])
    assert rep["redundancy_bits"] == pytest.approx(itemized(rep), abs=1e-6)


def test_sixty_four_reps_three_types():
    reps, P = synthetic(64, {1: (6, 5000), 2: (7, 70000), 3: (9, 1 << 20)}, seed=2)
    st = ConcatStore.build(reps, P, 7)
    readback(st, reps)
    assert st.max_probes <= P_MAX
    rep = st.redundancy_report([s for _, _, s in reps])
    assert rep["redundancy_bits"] == pytest.approx(itemized(rep), abs=1e-6)
    c2 = rep["redundancy_bits"] / W / (rep["S"] * math.log2(rep["L"]))
    assert c2 < 10            # O(S log L) words, constant reported
    assert rep["prime_rounding_bits"] <= 1


def test_zero_spills():
    reps, P = synthetic(16, {4: (5, 300)}, zero_spill=True)
    st = ConcatStore.build(reps, P, 3)
    assert all(st.read_spill(i, s=4) == 0 for i in range(16))


def test_peeled_word_single_probe():
    reps, P = synthetic(20, {1: (3, 50), 2: (4, 90)}, seed=4)
    st = ConcatStore.build(reps, P, 0)
    for i, (ws, _, s) in enumerate(reps):
        assert st.read_word(i, 0, s=s) == ws[0]
        assert st.last_probes == 1


def test_spill_probes_identical_within_type():
    reps, P = synthetic(40, {1: (3, 50), 2: (4, 90)}, seed=5)
    st = ConcatStore.build(reps, P, 0)
    per_type = {}
    for i, (_, _, s) in enumerate(reps):
        st.read_spill(i, s=s)
        per_type.setdefault(s, set()).add(st.last_probes)
    assert all(len(v) == 1 for v in per_type.values())


def test_type_from_size_callback():
    reps, P = synthetic(10, {1: (3, 50), 2: (4, 90)}, seed=6)
    # encode the type in the top bit of the peeled word for this test
    reps = [([ (s - 1) << 31 | (ws[0] & 0x7FFFFFFF)] + ws[1:], k, s) for ws, k, s in reps]
    st = ConcatStore.build(reps, P, 0)
    size_of = lambda peel: (peel[0] >> 31) + 1
    for i, (ws, k, s) in enumerate(reps):
        assert [st.read_word(i, j, size_of=size_of) for j in range(len(ws))] == ws
        assert st.read_spill(i, size_of=size_of) == k


def test_serialization_roundtrip():
    reps, P = synthetic(32, {1: (4, 700), 2: (6, 1 << 15)}, seed=8)
    st = ConcatStore.build(reps, P, 11)
    bw = BitWriter()
    st.write(bw)
    st2 = ConcatStore.read(BitReader(bw.to_bytes()), P)
    readback(st2, reps)


def test_bad_inputs():
    reps, P = synthetic(4, {1: (3, 50)})
    with pytest.raises(ParamViolation):
        ConcatStore.build([], P)
    with pytest.raises(ParamViolation):
        ConcatStore.build([(reps[0][0][:2], 0, 1)], P)


def test_inequality_one():
    assert inequality_one(1000, 1000, 1, 64)
    assert not inequality_one(6, 9, 3, 64)
