"""Real period, L(E_D, 1), Tamagawa numbers and the normalized BSD quotient."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional

import numpy as np

from .arith import PrimeTable, default_table, factor
from .errors import ConfigurationError, DomainError, PrecisionAlert
from .frobenius import ap_twist
from .tate import tate

TORSION_SQ = 16
MIN_TOL = 1e-13
MAX_TERMS = 50_000_000
ROUND_TOL = 1e-3
SAFETY = 4.0  # absorbs the divisor-function growth of |a_n|


def agm(a: float, b: float) -> float:
    while abs(a - b) > 1e-15 * a:
        a, b = (a + b) / 2, math.sqrt(a * b)
    return (a + b) / 2


def real_period(D: int) -> float:
    """Integral of dx/y over both real components of y^2 = x^3 - D^2 x."""
    if D < 1:
        raise DomainError("D must be positive")
    return 2 * math.pi / agm(math.sqrt(2 * D), math.sqrt(D))


def conductor(D: int) -> int:
    return (16 if D % 2 == 0 else 32) * D * D


def root_number(D: int) -> int:
    return 1 if D % 8 in (1, 2, 3) else -1


def series_cutoff(D: int, tol: float, t: float = 1.0) -> int:
    """Smallest M whose tail bound for the L(1) series (evaluated at t and 1/t) is below tol."""
    if not tol >= MIN_TOL:
        raise ConfigurationError(f"tolerance {tol} is below the double-precision budget {MIN_TOL}")
    if t <= 0:
        raise DomainError("t must be positive")
    c = 2 * math.pi * min(t, 1 / t) / math.sqrt(conductor(D))
    geo = 1.0 / (1.0 - math.exp(-c))

    def tail(M: int) -> float:
        return 2 * SAFETY * 2 / math.sqrt(M + 1) * math.exp(-c * (M + 1)) * geo

    lo, hi = 1, 1
    while tail(hi) >= tol:
        hi *= 2
        if hi > MAX_TERMS:
            raise ConfigurationError(f"L-series for D={D} at tol={tol} needs more than {MAX_TERMS} terms")
    while lo < hi:
        mid = (lo + hi) // 2
        if tail(mid) < tol:
            hi = mid
        else:
            lo = mid + 1
    return hi


def dirichlet_coefficients(D: int, M: int, table: Optional[PrimeTable] = None) -> np.ndarray:
    """a_n(E_D) for 0 <= n <= M (a_0 = 0), built multiplicatively from the a_p."""
    if table is None:
        table = default_table(M)
    a = np.zeros(M + 1)
    if M < 1:
        return a
    a[1:] = 1.0
    for p in table.primes:
        p = int(p)
        if p > M:
            break
        ap = ap_twist(D, p)
        # a_{p^k} by the Hecke recursion; zero for every k >= 1 when p | 2D
        prev, cur = 1, ap
        pk = p
        while pk <= M:
            idx = np.arange(pk, M + 1, pk)
            exact = idx[(idx // pk) % p != 0]
            a[exact] *= cur
            bad = (2 * D) % p == 0
            prev, cur = cur, 0 if bad else ap * cur - p * prev
            pk *= p
    return a


def _partial(a: np.ndarray, D: int, t: float) -> float:
    n = np.arange(1, len(a))
    return float(np.sum(a[1:] / n * np.exp(-2 * math.pi * n * t / math.sqrt(conductor(D)))))


def l_value_at_1(D: int, tol: float = 1e-10, cutoff: Optional[int] = None, t: float = 1.0) -> float:
    """L(E_D, 1) as A(t) + w A(1/t), A(t) = sum a_n/n exp(-2 pi n t / sqrt N).

    Any t > 0 gives the same value; t = 1 converges fastest.  Choosing
    t != 1 makes the vanishing at w = -1 a genuine numerical statement.
    """
    M = cutoff if cutoff is not None else series_cutoff(D, tol, t)
    a = dirichlet_coefficients(D, M)
    w = root_number(D)
    if t == 1.0:
        return (1 + w) * _partial(a, D, 1.0)
    return _partial(a, D, t) + w * _partial(a, D, 1 / t)


def numeric_root_number(D: int, tol: float = 1e-10, t: float = 1.2) -> float:
    """The sign w solving A(1) + w A(1) = A(t) + w A(1/t); should be +-1 up to rounding.

    Here A(t) = sum a_n/n exp(-2 pi n t / sqrt N).  Independent of the mod-8 rule.
    """
    a = dirichlet_coefficients(D, series_cutoff(D, tol, t))
    A1, At, Ai = _partial(a, D, 1.0), _partial(a, D, t), _partial(a, D, 1 / t)
    # (1 + w) A1 = At + w Ai  =>  w (A1 - Ai) = At - A1
    if abs(A1 - Ai) < 1e-300:
        raise DomainError("degenerate choice of t")
    return (At - A1) / (A1 - Ai)


def tamagawa(D: int, p: int) -> int:
    if D < 1 or p < 2 or (2 * D) % p:
        raise DomainError(f"{p} does not divide 2D = {2 * D}")
    return tate((0, 0, 0, -D * D, 0), p).tamagawa


def tamagawa_product(D: int, table: Optional[PrimeTable] = None) -> int:
    return math.prod(tamagawa(D, p) for p in factor(2 * D, table).primes)


@dataclass(frozen=True)
class BSDParams:
    D: int
    omega: float
    l1: float
    tamagawa: int
    normalized: float
    rounded: Optional[int]
    l_bsd_odd: Optional[bool]
    torsion_sq: int = TORSION_SQ

    @property
    def analytic_sha_like(self) -> float:
        return self.normalized

    def smith_holds(self, s2: int) -> Optional[bool]:
        """Odd normalized value iff s(D) = 0; None when the value did not round."""
        if self.l_bsd_odd is None:
            return None
        return self.l_bsd_odd == (s2 == 0)

    def to_dict(self) -> Dict:
        return asdict(self)


def normalized_bsd(D: int, tol: float = 1e-10, retries: int = 2, table: Optional[PrimeTable] = None) -> BSDParams:
    """16 L(1) / (Omega prod c_p), rounded when it sits within 1e-3 of an integer."""
    omega = real_period(D)
    cp = tamagawa_product(D, table)
    M = series_cutoff(D, tol)
    for attempt in range(retries + 1):
        l1 = l_value_at_1(D, cutoff=M)
        value = TORSION_SQ * l1 / (omega * cp)
        r = round(value)
        if abs(value - r) < ROUND_TOL:
            return BSDParams(D, omega, l1, cp, value, int(r), bool(r % 2))
        M *= 4
    if root_number(D) == 1:
        raise PrecisionAlert(f"normalized BSD value {value!r} for D={D} is not within {ROUND_TOL} of an integer")
    return BSDParams(D, omega, l1, cp, value, None, None)
