"""Exact integer arithmetic: sieves, factorization, quadratic symbols.

Everything here is pure and the :class:`PrimeTable` is immutable once built,
so a single table can be shared by any number of callers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import isqrt
from typing import List, Optional, Tuple

import numpy as np

from .errors import CapacityError, DomainError, OutOfRangeError

DEFAULT_LIMIT = 3_000_000
# bytes allowed for the spf array (int32 entries)
DEFAULT_MEMORY_BUDGET = 512 * 1024 * 1024


@dataclass(frozen=True, eq=False)
class PrimeTable:
    """Smallest-prime-factor table for ``0 <= n <= limit``.

    ``spf[0]`` and ``spf[1]`` are 0.
    """

    limit: int
    spf: np.ndarray = field(repr=False)

    @cached_property
    def primes(self) -> np.ndarray:
        idx = np.arange(self.limit + 1)
        return np.nonzero((self.spf == idx) & (idx >= 2))[0]

    def is_prime(self, n: int) -> bool:
        if n > self.limit:
            raise OutOfRangeError(f"{n} exceeds table limit {self.limit}")
        return n >= 2 and int(self.spf[n]) == n

    def first_primes(self, k: int) -> np.ndarray:
        if k > len(self.primes):
            raise OutOfRangeError(f"table holds only {len(self.primes)} primes, asked for {k}")
        return self.primes[:k]

    def nth_prime(self, n: int) -> int:
        """Return p_n with p_1 = 2."""
        if n < 1:
            raise DomainError("prime index starts at 1")
        return int(self.first_primes(n)[n - 1])


@dataclass(frozen=True)
class Factorization:
    n: int
    factors: Tuple[Tuple[int, int], ...]

    @property
    def omega(self) -> int:
        return len(self.factors)

    @property
    def primes(self) -> Tuple[int, ...]:
        return tuple(p for p, _ in self.factors)

    @property
    def squarefree(self) -> bool:
        return all(e == 1 for _, e in self.factors)

    def value(self) -> int:
        out = 1
        for p, e in self.factors:
            out *= p**e
        return out


def build_prime_table(limit: int = DEFAULT_LIMIT, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> PrimeTable:
    """Sieve smallest prime factors up to ``limit``."""
    if limit < 2:
        raise DomainError("limit must be at least 2")
    if 4 * (limit + 1) > memory_budget:
        raise CapacityError(f"spf table for limit={limit} needs {4 * (limit + 1)} bytes, budget is {memory_budget}")
    spf = np.zeros(limit + 1, dtype=np.int32)
    for p in range(2, isqrt(limit) + 1):
        if spf[p] == 0:
            block = spf[p * p :: p]
            block[block == 0] = p
    idx = np.arange(limit + 1, dtype=np.int32)
    unset = spf == 0
    spf[unset] = idx[unset]
    spf[:2] = 0
    spf.setflags(write=False)
    return PrimeTable(limit, spf)


_default_table: Optional[PrimeTable] = None


def default_table(limit: int = DEFAULT_LIMIT) -> PrimeTable:
    """Process-wide table, rebuilt only when a larger limit is requested."""
    global _default_table
    if _default_table is None or _default_table.limit < limit:
        _default_table = build_prime_table(max(limit, 10_000))
    return _default_table


def factor(n: int, table: Optional[PrimeTable] = None) -> Factorization:
    if n < 1:
        raise DomainError("can only factor positive integers")
    if table is None:
        table = default_table(n)
    if n > table.limit:
        raise OutOfRangeError(f"{n} exceeds table limit {table.limit}")
    spf = table.spf
    out: List[Tuple[int, int]] = []
    m = n
    while m > 1:
        p = int(spf[m])
        e = 0
        while m % p == 0:
            m //= p
            e += 1
        out.append((p, e))
    return Factorization(n, tuple(out))


def squarefree_mask(X: int, table: Optional[PrimeTable] = None) -> np.ndarray:
    """Boolean array ``m`` of length X+1 with ``m[n]`` true iff n is square-free (n >= 1)."""
    if table is None:
        table = default_table(X)
    if X > table.limit:
        raise OutOfRangeError(f"{X} exceeds table limit {table.limit}")
    mask = np.ones(X + 1, dtype=bool)
    mask[0] = False
    for p in table.primes:
        q = int(p) * int(p)
        if q > X:
            break
        mask[q::q] = False
    return mask


def enumerate_squarefree(X: int, table: Optional[PrimeTable] = None) -> np.ndarray:
    """All square-free n <= X in increasing order."""
    if X < 1:
        return np.zeros(0, dtype=np.int64)
    return np.nonzero(squarefree_mask(X, table))[0].astype(np.int64)


def is_squarefree(n: int, table: Optional[PrimeTable] = None) -> bool:
    return n >= 1 and factor(n, table).squarefree


def jacobi(a: int, n: int) -> int:
    """Jacobi symbol (a/n) for odd positive n, by reciprocity."""
    if n <= 0 or n % 2 == 0:
        raise DomainError(f"Jacobi symbol needs odd positive modulus, got {n}")
    a %= n
    result = 1
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def sqrt_mod(a: int, p: int) -> int:
    """A square root of ``a`` modulo the odd prime ``p`` (Tonelli-Shanks)."""
    a %= p
    if a == 0:
        return 0
    if pow(a, (p - 1) // 2, p) != 1:
        raise DomainError(f"{a} is not a square mod {p}")
    if p % 4 == 3:
        return pow(a, (p + 1) // 4, p)
    q, s = p - 1, 0
    while q % 2 == 0:
        q //= 2
        s += 1
    z = 2
    while pow(z, (p - 1) // 2, p) != p - 1:
        z += 1
    m, c, t, r = s, pow(z, q, p), pow(a, q, p), pow(a, (q + 1) // 2, p)
    while t != 1:
        i, t2 = 0, t
        while t2 != 1:
            t2 = t2 * t2 % p
            i += 1
        b = pow(c, 1 << (m - i - 1), p)
        m, c = i, b * b % p
        t, r = t * c % p, r * b % p
    return r


def two_squares(p: int) -> Tuple[int, int]:
    """Write a prime p = 1 (mod 4) as a^2 + b^2 with a odd, b even.

    Signs are normalised so that b >= 0 and a + b = 1 (mod 4).
    """
    if p % 4 != 1:
        raise DomainError(f"{p} is not 1 mod 4")
    x = sqrt_mod(p - 1, p)
    # Euclid on (p, x) until the remainder drops below sqrt(p)
    r0, r1 = p, x
    limit = isqrt(p)
    while r1 > limit:
        r0, r1 = r1, r0 % r1
    a = r1
    b = isqrt(p - a * a)
    if a * a + b * b != p:
        raise DomainError(f"{p} is not prime")
    if a % 2 == 0:
        a, b = b, a
    if (a + b) % 4 != 1:
        a = -a
    return a, b
