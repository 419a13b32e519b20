"""Small shared helpers: probe-counting views and integer bit packing."""
from __future__ import annotations

import math
from fractions import Fraction


class CountingView:
    """Read-only indexable wrapper that counts element reads."""

    def __init__(self, data):
        self.data = data
        self.probes = 0

    def __getitem__(self, i):
        self.probes += 1
        return self.data[i]

    def __len__(self):
        return len(self.data)

    def reset(self) -> int:
        p, self.probes = self.probes, 0
        return p


def ceil_log2(x: int) -> int:
    """Smallest e with 2**e >= x (0 for x <= 1)."""
    return max(0, (int(x) - 1).bit_length())


def log2_int(x: int) -> float:
    """log2 of a possibly huge positive integer."""
    if x <= 0:
        raise ValueError("log of non-positive")
    b = x.bit_length()
    if b <= 1000:
        return math.log2(x)
    shift = b - 64
    return math.log2(x >> shift) + shift


def log2_frac(q: Fraction) -> float:
    return log2_int(q.numerator) - log2_int(q.denominator)


def pack_words(words, w: int) -> int:
    """Little-endian concatenation of w-bit words into one integer."""
    out = 0
    for k, x in enumerate(words):
        out |= int(x) << (k * w)
    return out


def unpack_words(x: int, w: int, count: int) -> list[int]:
    mask = (1 << w) - 1
    return [(x >> (k * w)) & mask for k in range(count)]


class BitWriter:
    """Append-only little-endian bit stream with per-section bit totals."""

    def __init__(self):
        self._parts: list[tuple[int, int]] = []
        self.bits = 0
        self.sections: dict[str, int] = {}
        self._label = "misc"

    def section(self, label: str) -> "BitWriter":
        self._label = label
        return self

    def write(self, x: int, width: int) -> None:
        if width < 0 or x < 0 or x >> width:
            raise ValueError(f"{x} does not fit in {width} bits")
        self._parts.append((x, width))
        self.bits += width
        self.sections[self._label] = self.sections.get(self._label, 0) + width

    def write_many(self, xs, width: int) -> None:
        for x in xs:
            self.write(int(x), width)

    def to_bytes(self) -> bytes:
        value = 0
        for x, width in reversed(self._parts):
            value = (value << width) | x
        return value.to_bytes(-(-self.bits // 8), "little")


class BitReader:
    def __init__(self, data: bytes, pos: int = 0):
        self.value = int.from_bytes(data, "little")
        self.pos = pos
        self.limit = len(data) * 8

    def read(self, width: int) -> int:
        if self.pos + width > self.limit:
            raise ValueError("read past the end of the stream")
        x = (self.value >> self.pos) & ((1 << width) - 1)
        self.pos += width
        return x

    def read_many(self, count: int, width: int) -> list[int]:
        return [self.read(width) for _ in range(count)]
