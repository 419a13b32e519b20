"""Finite-field arithmetic over prime fields and binary extension fields.

Field elements are plain Python integers in ``[0, order)``.  A field object
carries the arithmetic; elements carry nothing.  Both field kinds expose the
same methods (``add``, ``sub``, ``neg``, ``mul``, ``inv``, ``div``, ``pow``),
so callers never branch on the kind.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import sympy

from .errors import InvOfZero

__all__ = [
    "FieldSpec", "PrimeField", "BinaryField", "PowerTable", "BINARY_POLYS",
    "is_prime", "next_prime", "find_primitive_root", "is_irreducible",
    "clmul", "M61", "mulmod61", "addmod61", "submod61", "powmod61",
]

# x^8+x^4+x^3+x+1, x^16+x^5+x^3+x+1, x^32+x^7+x^3+x^2+1, x^64+x^4+x^3+x+1
BINARY_POLYS = {
    8: (1 << 8) | 0x1B,
    16: (1 << 16) | 0x2B,
    32: (1 << 32) | 0x8D,
    64: (1 << 64) | 0x1B,
}

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin below 2**64; BPSW (sympy) above."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    if n >= 1 << 64:
        return sympy.isprime(n)
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime(k: int) -> int:
    """Smallest prime >= k."""
    if k < 2:
        raise ValueError("next_prime requires k >= 2")
    if k == 2:
        return 2
    c = k | 1
    while not is_prime(c):
        c += 2
    return c


def _prime_factors(n: int) -> list[int]:
    return sorted(sympy.factorint(n))


def find_primitive_root(p: int) -> int:
    """Smallest generator of the multiplicative group of F_p."""
    if p == 2:
        return 1
    qs = _prime_factors(p - 1)
    g = 2
    while True:
        if all(pow(g, (p - 1) // q, p) != 1 for q in qs):
            return g
        g += 1


# -- GF(2)[x] helpers ------------------------------------------------------

def clmul(a: int, b: int) -> int:
    """Carryless (GF(2)[x]) product of two bit masks."""
    if a < b:
        a, b = b, a
    r = 0
    while b:
        low = b & -b
        r ^= a << (low.bit_length() - 1)
        b ^= low
    return r


def _pmod(a: int, m: int) -> int:
    dm = m.bit_length()
    while a.bit_length() >= dm:
        a ^= m << (a.bit_length() - dm)
    return a


def _pgcd(a: int, b: int) -> int:
    while b:
        a, b = b, _pmod(a, b)
    return a


def _pmulmod(a: int, b: int, m: int) -> int:
    return _pmod(clmul(a, b), m)


def _x_pow_2k(k: int, m: int) -> int:
    r = 2  # the polynomial x
    for _ in range(k):
        r = _pmulmod(r, r, m)
    return r


def is_irreducible(poly: int) -> bool:
    """Rabin's irreducibility test over GF(2)."""
    w = poly.bit_length() - 1
    if w < 1:
        return False
    if _x_pow_2k(w, poly) != _pmod(2, poly):
        return False
    for q in _prime_factors(w) if w > 1 else []:
        h = _x_pow_2k(w // q, poly) ^ 2
        if _pgcd(poly, _pmod(h, poly)) != 1:
            return False
    return True


# -- field classes ---------------------------------------------------------

class FieldSpec:
    """Common interface; use :class:`PrimeField` or :class:`BinaryField`."""

    kind: str
    order: int
    zero = 0
    one = 1

    @staticmethod
    def prime(p: int) -> "PrimeField":
        return PrimeField(p)

    @staticmethod
    def binary(w: int, modulus_poly: int | None = None) -> "BinaryField":
        return BinaryField(w, modulus_poly)

    @property
    def elem_bits(self) -> int:
        return (self.order - 1).bit_length()

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        if e < 0:
            return self.pow(self.inv(a), -e)
        r = 1
        while e:
            if e & 1:
                r = self.mul(r, a)
            a = self.mul(a, a)
            e >>= 1
        return r

    def dot(self, coeffs, values) -> int:
        acc = 0
        for c, v in zip(coeffs, values):
            acc = self.add(acc, self.mul(c, v))
        return acc

    def generator(self) -> int:
        raise NotImplementedError


@dataclass(frozen=True, eq=True)
class PrimeField(FieldSpec):
    p: int
    kind: str = field(default="prime", init=False)

    def __post_init__(self):
        if not is_prime(self.p):
            raise ValueError(f"{self.p} is not prime")

    @property
    def order(self) -> int:
        return self.p

    def add(self, a, b):
        return (a + b) % self.p

    def sub(self, a, b):
        return (a - b) % self.p

    def neg(self, a):
        return -a % self.p

    def mul(self, a, b):
        return a * b % self.p

    def inv(self, a):
        if a % self.p == 0:
            raise InvOfZero("inverse of zero")
        return pow(a, self.p - 2, self.p)

    def pow(self, a, e):
        return pow(a, e, self.p)

    def dot(self, coeffs, values):
        return sum(c * v for c, v in zip(coeffs, values)) % self.p

    def generator(self):
        return find_primitive_root(self.p)


@dataclass(frozen=True, eq=True)
class BinaryField(FieldSpec):
    w: int
    modulus_poly: int | None = None
    kind: str = field(default="binary-extension", init=False)

    def __post_init__(self):
        if self.modulus_poly is None:
            if self.w not in BINARY_POLYS:
                raise ValueError(f"no default modulus for GF(2^{self.w})")
            object.__setattr__(self, "modulus_poly", BINARY_POLYS[self.w])
        if self.modulus_poly.bit_length() - 1 != self.w:
            raise ValueError("modulus degree does not match w")

    @property
    def order(self) -> int:
        return 1 << self.w

    def add(self, a, b):
        return a ^ b

    sub = add

    def neg(self, a):
        return a

    def mul(self, a, b):
        return _pmod(clmul(a, b), self.modulus_poly)

    def inv(self, a):
        if a == 0:
            raise InvOfZero("inverse of zero")
        # extended Euclid in GF(2)[x]
        r0, r1 = self.modulus_poly, a
        s0, s1 = 0, 1
        while r1 != 1:
            shift = r0.bit_length() - r1.bit_length()
            if shift < 0:
                r0, r1, s0, s1 = r1, r0, s1, s0
                continue
            r0 ^= r1 << shift
            s0 ^= s1 << shift
            if r0.bit_length() < r1.bit_length():
                r0, r1, s0, s1 = r1, r0, s1, s0
        return _pmod(s1, self.modulus_poly)

    def generator(self):
        qs = _prime_factors(self.order - 1)
        g = 2
        while True:
            if all(self.pow(g, (self.order - 1) // q) != 1 for q in qs):
                return g
            g += 1


class PowerTable:
    """Powers of a generator laid out for O(1/eps)-probe exponentiation.

    ``entries[j][i] == g ** (i * base**j)`` with ``base = ceil(n ** eps)``.
    """

    def __init__(self, spec: FieldSpec, n: int, epsilon: float = 0.25, g: int | None = None):
        self.spec = spec
        self.g = spec.generator() if g is None else g
        self.epsilon = epsilon
        self.base = max(2, math.ceil(n ** epsilon))
        self.group_order = spec.order - 1
        digits = 1
        while self.base ** digits < self.group_order:
            digits += 1
        self.entries: list[list[int]] = []
        step = self.g
        for _ in range(digits):
            row, acc = [], 1
            for _ in range(self.base):
                row.append(acc)
                acc = spec.mul(acc, step)
            self.entries.append(row)
            step = acc  # g ** (base ** (j+1))

    def __len__(self):
        return sum(len(r) for r in self.entries)

    def eval(self, exponent: int) -> int:
        """``g ** exponent`` from one table entry per base-``base`` digit."""
        e = exponent % self.group_order
        r = 1
        for row in self.entries:
            if e == 0:
                break
            e, d = divmod(e, self.base)
            if d:
                r = self.spec.mul(r, row[d])
        return r


def pow_table_eval(table: PowerTable, exponent: int) -> int:
    return table.eval(exponent)


# -- vectorized arithmetic modulo the Mersenne prime 2^61 - 1 --------------

M61 = (1 << 61) - 1
_U = np.uint64
_MASK61 = _U(M61)
_MASK31 = _U((1 << 31) - 1)
_MASK30 = _U((1 << 30) - 1)


def _fold61(x):
    x = (x & _MASK61) + (x >> _U(61))
    return np.where(x >= _MASK61, x - _MASK61, x)


def mulmod61(a, b):
    """Elementwise ``a*b mod 2^61-1`` for uint64 arrays with entries < 2^61."""
    a = np.asarray(a, dtype=_U)
    b = np.asarray(b, dtype=_U)
    a1, a0 = a >> _U(31), a & _MASK31
    b1, b0 = b >> _U(31), b & _MASK31
    mid = a1 * b0 + a0 * b1           # weight 2^31; < 2^62
    # a1*b1 has weight 2^62 == 2; the three terms sum below 2^64
    s = (a1 * b1 << _U(1)) + (mid >> _U(30)) + ((mid & _MASK30) << _U(31)) + a0 * b0
    return _fold61(s)


def addmod61(a, b):
    s = np.asarray(a, dtype=_U) + np.asarray(b, dtype=_U)
    return np.where(s >= _MASK61, s - _MASK61, s)


def submod61(a, b):
    a = np.asarray(a, dtype=_U)
    b = np.asarray(b, dtype=_U)
    return np.where(a >= b, a - b, a + (_MASK61 - b))


def powmod61(a, e: int):
    a = np.asarray(a, dtype=_U)
    r = np.ones_like(a)
    while e:
        if e & 1:
            r = mulmod61(r, a)
        a = mulmod61(a, a)
        e >>= 1
    return r
