"""Brute-force reference computations used by the tests.

Nothing here imports the package's field, linear-algebra or encoding code;
modular arithmetic is redone from scratch with plain integers.
"""
from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class OracleConfig:
    max_universe: int = 1 << 16
    max_dim: int = 2048


DEFAULT = OracleConfig()


def _inv(a: int, p: int) -> int:
    # extended Euclid, deliberately not pow(a, -1, p)
    r0, r1, s0, s1 = p, a % p, 0, 1
    while r1:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        s0, s1 = s1, s0 - q * s1
    if r0 != 1:
        raise ZeroDivisionError("not invertible")
    return s0 % p


def dense_rank_reference(matrix, p: int, cfg: OracleConfig = DEFAULT) -> int:
    """Rank over F_p by textbook row reduction (first nonzero pivot)."""
    rows = [[x % p for x in r] for r in matrix]
    if not rows:
        return 0
    ncols = len(rows[0])
    if max(len(rows), ncols) > cfg.max_dim:
        raise ValueError("matrix too large for the reference")
    rank = 0
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col]), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        inv = _inv(rows[rank][col], p)
        rows[rank] = [x * inv % p for x in rows[rank]]
        for r in range(len(rows)):
            if r != rank and rows[r][col]:
                f = rows[r][col]
                rows[r] = [(x - f * y) % p for x, y in zip(rows[r], rows[rank])]
        rank += 1
        if rank == len(rows):
            break
    return rank


def exact_binomial(U: int, n: int) -> int:
    if n < 0 or n > U:
        return 0
    n = min(n, U - n)
    c = 1
    for i in range(n):
        c = c * (U - i) // (i + 1)
    return c


def pascal_binomial(U: int, n: int) -> int:
    """Binomial by the Pascal recurrence; for small arguments only."""
    row = [1]
    for _ in range(U):
        row = [1] + [row[i] + row[i + 1] for i in range(len(row) - 1)] + [1]
    return row[n] if 0 <= n <= U else 0


def log2_big(x: int) -> float:
    b = x.bit_length()
    if b <= 53:
        return math.log2(x)
    shift = b - 60
    return math.log2(x >> shift) + shift


def log2_binomial(U: int, n: int) -> float:
    return log2_big(exact_binomial(U, n))


def log2_fraction(q: Fraction) -> float:
    return log2_big(q.numerator) - log2_big(q.denominator)


def naive_base_convert(A, p: int, q: int) -> list[int]:
    """Digits (most significant first) of sum A[i] p^i in base q, using the
    fewest digits that can hold any sequence of this length."""
    X = 0
    for a in reversed(A):
        X = X * p + a
    top = p ** len(A)
    d = 0
    while q ** d < top:
        d += 1
    out = []
    for _ in range(d):
        X, r = divmod(X, q)
        out.append(r)
    return out[::-1]


def naive_base_decode(digits, q: int, p: int, n: int) -> list[int]:
    X = 0
    for d in digits:
        X = X * q + d
    out = []
    for _ in range(n):
        X, r = divmod(X, p)
        out.append(r)
    return out


def hall_matching_check(pattern) -> bool:
    """True when every row can be matched to a distinct nonzero column
    (a perfect matching for square patterns); Hopcroft-Karp."""
    nl = len(pattern)
    if nl == 0:
        return True
    nr = len(pattern[0])
    adj = [[j for j, x in enumerate(r) if x] for r in pattern]
    INF = float("inf")
    mate_l = [-1] * nl
    mate_r = [-1] * nr

    def bfs():
        dist = [INF] * nl
        dq = deque()
        for u in range(nl):
            if mate_l[u] < 0:
                dist[u] = 0
                dq.append(u)
        found = False
        while dq:
            u = dq.popleft()
            for v in adj[u]:
                w = mate_r[v]
                if w < 0:
                    found = True
                elif dist[w] == INF:
                    dist[w] = dist[u] + 1
                    dq.append(w)
        return found, dist

    def dfs(u, dist):
        for v in adj[u]:
            w = mate_r[v]
            if w < 0 or (dist[w] == dist[u] + 1 and dfs(w, dist)):
                mate_l[u], mate_r[v] = v, u
                return True
        dist[u] = INF
        return False

    size = 0
    while True:
        found, dist = bfs()
        if not found:
            break
        for u in range(nl):
            if mate_l[u] < 0 and dfs(u, dist):
                size += 1
    return size == nl


def random_sparse_rows(n: int, t: int | None, p: int, rng: random.Random):
    """n x n matrix whose rows get t uniform (position, value) samples,
    summed on collisions; ``t=None`` draws every entry uniformly."""
    if t is None:
        return [[rng.randrange(p) for _ in range(n)] for _ in range(n)]
    M = [[0] * n for _ in range(n)]
    for r in range(n):
        for _ in range(t):
            j = rng.randrange(n)
            M[r][j] = (M[r][j] + rng.randrange(p)) % p
    return M


def singularity_rate(n: int, t: int | None, p: int, trials: int, seed: int = 0) -> float:
    """Fraction of trials whose sampled n x n matrix has full rank."""
    rng = random.Random(seed)
    ok = 0
    for _ in range(trials):
        ok += dense_rank_reference(random_sparse_rows(n, t, p, rng), p) == n
    return ok / trials


def dense_full_rank_probability(n: int, p: int) -> float:
    """prod_{k=1..n} (1 - p^-k): chance that a uniform n x n matrix is invertible."""
    out = 1.0
    for k in range(1, n + 1):
        out *= 1 - p ** -k
    return out


def is_prime_reference(k: int) -> bool:
    if k < 2:
        return False
    i = 2
    while i * i <= k:
        if k % i == 0:
            return False
        i += 1
    return True


def prime_sieve(limit: int) -> list[bool]:
    s = [True] * (limit + 1)
    s[0] = s[1] = False
    for i in range(2, math.isqrt(limit) + 1):
        if s[i]:
            s[i * i::i] = [False] * len(range(i * i, limit + 1, i))
    return s


def next_prime_reference(k: int, sieve: list[bool]) -> int:
    x = max(k, 2)
    while not sieve[x]:
        x += 1
    return x
