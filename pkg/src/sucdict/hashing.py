"""Seeded mixing, k-wise independent hashing and a Feistel permutation."""
from __future__ import annotations

import numpy as np

from .field import M61, mulmod61, addmod61

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_C1 = 0xBF58476D1CE4E5B9
_C2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit word."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _C1) & MASK64
    z = ((z ^ (z >> 27)) * _C2) & MASK64
    return z ^ (z >> 31)


def mix64_np(z):
    """Vectorized :func:`mix64`; agrees bit for bit with the scalar version."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_C1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_C2)
    return z ^ (z >> np.uint64(31))


def derive_seed(master: int, index: int) -> int:
    """Counter-derived child seed; independent of evaluation order."""
    return mix64((master + GOLDEN * (index + 1)) & MASK64)


class KWiseHash:
    """Degree-(k-1) polynomial over F_{2^61-1}, reduced into ``[0, out_range)``.

    Inputs are taken mod 2^61-1, so the family is exactly k-wise independent
    on inputs below that prime (up to the final range reduction).
    """

    def __init__(self, k: int, seed: int, out_range: int):
        if k < 1 or out_range < 1:
            raise ValueError("need k >= 1 and out_range >= 1")
        self.k = k
        self.seed = seed & MASK64
        self.out_range = out_range
        coeffs, s = [], self.seed
        for j in range(k):
            s = mix64(s + GOLDEN)
            hi = mix64(s ^ 0x5851F42D4C957F2D)
            coeffs.append(((hi << 64) | s) % M61)
        self.coeffs = coeffs

    def __call__(self, x: int) -> int:
        x %= M61
        acc = 0
        for c in reversed(self.coeffs):
            acc = (acc * x + c) % M61
        return acc % self.out_range

    def eval_np(self, xs):
        x = np.asarray(xs, dtype=np.uint64) % np.uint64(M61)
        acc = np.zeros_like(x)
        for c in reversed(self.coeffs):
            acc = addmod61(mulmod61(acc, x), np.uint64(c))
        return acc % np.uint64(self.out_range)

    def description_bits(self) -> int:
        return self.k * 61


class FeistelPermutation:
    """Bijection on ``[0, U)``: alternating Feistel rounds on ``ceil(log2 U)``
    bits, with cycle-walking to stay inside the domain."""

    def __init__(self, U: int, seed: int, rounds: int = 4, k: int = 6):
        if U < 2:
            raise ValueError("domain must have at least two points")
        self.U = U
        self.seed = seed & MASK64
        self.bits = max(2, (U - 1).bit_length())
        self.lbits = self.bits // 2
        self.rbits = self.bits - self.lbits
        self.rounds = rounds
        self.fns = []
        for r in range(rounds):
            width = self.rbits if r % 2 else self.lbits
            self.fns.append(KWiseHash(k, derive_seed(self.seed, r), 1 << width))

    def _fwd(self, y: int) -> int:
        lmask = (1 << self.lbits) - 1
        L, R = y >> self.rbits, y & ((1 << self.rbits) - 1)
        for r, f in enumerate(self.fns):
            if r % 2 == 0:
                L ^= f(R)
            else:
                R ^= f(L)
        return ((L & lmask) << self.rbits) | R

    def _bwd(self, y: int) -> int:
        L, R = y >> self.rbits, y & ((1 << self.rbits) - 1)
        for r in reversed(range(self.rounds)):
            if r % 2 == 0:
                L ^= self.fns[r](R)
            else:
                R ^= self.fns[r](L)
        return (L << self.rbits) | R

    def __call__(self, x: int) -> int:
        if not 0 <= x < self.U:
            raise ValueError("input outside the domain")
        y = self._fwd(x)
        while y >= self.U:
            y = self._fwd(y)
        return y

    def inverse(self, y: int) -> int:
        if not 0 <= y < self.U:
            raise ValueError("input outside the domain")
        x = self._bwd(y)
        while x >= self.U:
            x = self._bwd(x)
        return x

    def _fwd_np(self, y):
        sh = np.uint64(self.rbits)
        rmask = np.uint64((1 << self.rbits) - 1)
        L, R = y >> sh, y & rmask
        for r, f in enumerate(self.fns):
            if r % 2 == 0:
                L = L ^ f.eval_np(R)
            else:
                R = R ^ f.eval_np(L)
        return (L << sh) | R

    def eval_np(self, xs):
        """Vectorized forward map for many inputs."""
        y = self._fwd_np(np.asarray(xs, dtype=np.uint64))
        U = np.uint64(self.U)
        out = y >= U
        while out.any():
            y[out] = self._fwd_np(y[out])
            out = y >= U
        return y

    def description_bits(self) -> int:
        return sum(f.description_bits() for f in self.fns)
