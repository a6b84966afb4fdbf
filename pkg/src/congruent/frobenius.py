"""Frobenius traces of E_D and of cubic/quartic twist families, and their averages."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import isqrt, sqrt
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .arith import PrimeTable, default_table, enumerate_squarefree, jacobi, two_squares
from .errors import DomainError, InternalConsistencyError, UndefinedAverageError

DFilter = Callable[[np.ndarray], np.ndarray]


def _is_odd_prime(p: int) -> bool:
    if p < 3 or p % 2 == 0:
        return False
    return all(p % q for q in range(3, isqrt(p) + 1, 2))


@lru_cache(maxsize=4096)
def _chi_table(p: int) -> np.ndarray:
    """Quadratic character mod p indexed by residue; chi[0] = 0."""
    x = np.arange(p, dtype=np.int64)
    chi = -np.ones(p, dtype=np.int64)
    chi[(x * x) % p] = 1
    chi[0] = 0
    chi.setflags(write=False)
    return chi


def ap_bruteforce(a4: int, a6: int, p: int) -> int:
    """a_p of y^2 = x^3 + a4 x + a6 by summing the quadratic character."""
    if not _is_odd_prime(p):
        raise DomainError(f"{p} is not an odd prime")
    if (4 * a4**3 + 27 * a6**2) % p == 0:
        raise DomainError(f"curve ({a4}, {a6}) has bad reduction at {p}")
    x = np.arange(p, dtype=np.int64)
    f = ((x * x % p) * x + (a4 % p) * x + (a6 % p)) % p
    return -int(_chi_table(p)[f].sum())


def ap_base(p: int) -> int:
    """a_p(E_1) from the representation p = a^2 + b^2."""
    if p == 2:
        raise DomainError("E_1 has bad reduction at 2")
    if p % 4 == 3:
        return 0
    a, _ = two_squares(p)
    return 2 * a


def ap_twist(D: int, p: int) -> int:
    """a_p(E_D); zero at primes dividing 2D."""
    if (2 * D) % p == 0 or p % 4 == 3:
        return 0
    return jacobi(D, p) * ap_base(p)


@dataclass(frozen=True)
class TraceVector:
    D: int
    primes: Tuple[int, ...]
    a: Tuple[int, ...]

    def validate(self) -> None:
        for p, ap in zip(self.primes, self.a):
            if ap * ap > 4 * p:
                raise InternalConsistencyError(f"Hasse bound violated: a_{p}(E_{self.D}) = {ap}")
            if p > 2 and ap % 2:
                raise InternalConsistencyError(f"odd trace a_{p}(E_{self.D}) = {ap}")
            if p % 4 == 3 and (2 * self.D) % p and ap:
                raise InternalConsistencyError(f"nonzero trace at p = {p} = 3 mod 4")


def trace_vector(D: int, k: int, table: Optional[PrimeTable] = None) -> TraceVector:
    if k < 1:
        raise DomainError("need at least one prime")
    if table is None:
        table = default_table()
    primes = tuple(int(p) for p in table.first_primes(k))
    tv = TraceVector(D, primes, tuple(ap_twist(D, p) for p in primes))
    tv.validate()
    return tv


@dataclass(frozen=True)
class TwistFamilySpec:
    """A one-parameter twist family y^2 = x^3 + a4(d) x + a6(d)."""

    kind: str
    base: Tuple[int, int]

    def coeffs(self, d: int) -> Tuple[int, int]:
        if self.kind == "quadratic":
            return (-d * d, 0)
        if self.kind == "cubic":
            return (0, -d * d)
        if self.kind == "quartic":
            return (-2 * d, 0)
        raise DomainError(f"unknown twist kind {self.kind!r}")

    def trace(self, d: int, p: int) -> int:
        """a_p of the twist by d, zero at bad primes."""
        if p == 2:
            return 0
        a4, a6 = self.coeffs(d)
        if (4 * a4**3 + 27 * a6**2) % p == 0:
            return 0
        return ap_bruteforce(a4, a6, p)


QUADRATIC = TwistFamilySpec("quadratic", (-1, 0))
CUBIC = TwistFamilySpec("cubic", (0, -1))
QUARTIC = TwistFamilySpec("quartic", (-2, 0))
FAMILIES = {f.kind: f for f in (QUADRATIC, CUBIC, QUARTIC)}


def residue_filter(modulus: int, classes: Iterable[int]) -> DFilter:
    allowed = np.zeros(modulus, dtype=bool)
    allowed[list(classes)] = True
    return lambda D: allowed[D % modulus]


def _selected(X: int, table: PrimeTable, filter: Optional[DFilter]) -> np.ndarray:
    Ds = enumerate_squarefree(X, table)
    if filter is not None:
        Ds = Ds[np.asarray(filter(Ds), dtype=bool)]
    if len(Ds) == 0:
        raise UndefinedAverageError(f"no square-free D <= {X} pass the filter")
    return Ds


def _trace_sum(Ds: np.ndarray, p: int, family: TwistFamilySpec) -> int:
    if family.kind == "quadratic":
        if p == 2 or p % 4 == 3:
            return 0
        return ap_base(p) * int(_chi_table(p)[Ds % p].sum())
    # the trace depends only on d mod p, so count the family per residue
    counts = np.bincount(Ds % p, minlength=p)
    return sum(int(c) * family.trace(r, p) for r, c in enumerate(counts) if c)


def frob_average(
    n: int,
    X: int,
    family: TwistFamilySpec = QUADRATIC,
    filter: Optional[DFilter] = None,
    table: Optional[PrimeTable] = None,
) -> float:
    """Mean of a_{p_n} over the twists by square-free d <= X (passing ``filter``)."""
    if table is None:
        table = default_table(X)
    p = table.nth_prime(n)
    Ds = _selected(X, table, filter)
    return _trace_sum(Ds, p, family) / len(Ds)


def decay_curve(
    n: int, Xs: Sequence[int], family: TwistFamilySpec = QUADRATIC, table: Optional[PrimeTable] = None
) -> List[Tuple[int, float]]:
    """(X, f_X(n)) pairs for plotting the decay of the average."""
    return [(X, frob_average(n, X, family, table=table)) for X in Xs]


def legendre_running_average(p: int, n: int) -> Fraction:
    """Exact mean of the Legendre symbols (k/p) for k = 1..n."""
    if n < 1:
        raise DomainError("n must be positive")
    chi = _chi_table(p)
    # whole periods contribute nothing
    return Fraction(int(chi[1 : n % p + 1].sum()), n)


def class_averages(
    X: int, primes: Sequence[int], normalize: bool = False, table: Optional[PrimeTable] = None
) -> Dict[Tuple[int, int], float]:
    """Mean a_p(E_D) (optionally over 2 sqrt(p)) per residue class of D mod 8."""
    if table is None:
        table = default_table(X)
    Ds = enumerate_squarefree(X, table)
    out: Dict[Tuple[int, int], float] = {}
    for cls in (1, 2, 3, 5, 6, 7):
        sub = Ds[Ds % 8 == cls]
        if len(sub) == 0:
            continue
        for p in primes:
            p = int(p)
            value = _trace_sum(sub, p, QUADRATIC) / len(sub)
            if normalize:
                value /= 2 * sqrt(p)
            out[(cls, p)] = value
    return out


def write_plot_csv(path, rows: Iterable[Sequence], header: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def write_class_averages(path, averages: Dict[Tuple[int, int], float]) -> None:
    rows = sorted((p, cls, v) for (cls, p), v in averages.items())
    write_plot_csv(path, rows, ("prime", "class", "value"))
