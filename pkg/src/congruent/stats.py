"""Rank distributions by residue class and the heuristic models they are compared with."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import DataError, DomainError, SchemaError, UndefinedAverageError

PRODUCT_TOL = 1e-15
MAX_PRODUCT_TERMS = 10_000

# rank column name -> record field
RANK_FIELDS = {"s2": "s2", "s3": "sel3_dim", "mw": "mw_rank", "analytic": "analytic_rank"}


def _infinite_product(factor, start: int = 1) -> float:
    """Product of factor(n) for n >= start, stopped once a factor is within 1e-15 of 1."""
    out = 1.0
    for n in range(start, start + MAX_PRODUCT_TERMS):
        f = factor(n)
        out *= f
        if abs(f - 1.0) < PRODUCT_TOL:
            return out
    return out


ALPHA = _infinite_product(lambda n: 1.0 / (1.0 + 2.0**-n))


# ---------------------------------------------------------------------------
# residue classes


@dataclass(frozen=True)
class ClassKey:
    residues: FrozenSet[int]
    label: str

    @classmethod
    def of(cls, *hs: int) -> "ClassKey":
        for h in hs:
            if h not in (1, 2, 3, 5, 6, 7):
                raise DomainError(f"{h} is not a square-free residue mod 8")
        return cls(frozenset(hs), ",".join(map(str, sorted(hs))))

    def contains(self, D: int) -> bool:
        return D % 8 in self.residues

    @property
    def parity(self) -> Optional[int]:
        """Forced parity of s(D) on this class, or None if it is mixed."""
        ps = {selmer_parity(h) for h in self.residues}
        return ps.pop() if len(ps) == 1 else None


ALL = ClassKey(frozenset({1, 2, 3, 5, 6, 7}), "all")
LOW = ClassKey.of(1, 3)
HIGH = ClassKey.of(5, 7)


def selmer_parity(D: int) -> int:
    """Parity of s(D) predicted by the residue of D mod 8."""
    return 0 if D % 8 in (1, 2, 3) else 1


# ---------------------------------------------------------------------------
# record access


def record_field(record: Any, name: str):
    if isinstance(record, Mapping):
        if name not in record:
            raise SchemaError(f"record has no column {name!r}")
        return record[name]
    if not hasattr(record, name):
        raise SchemaError(f"record has no column {name!r}")
    return getattr(record, name)


def _rank_field(rank_column: str) -> str:
    if rank_column not in RANK_FIELDS:
        raise DomainError(f"unknown rank column {rank_column!r}")
    return RANK_FIELDS[rank_column]


def column_pairs(records: Iterable[Any], rank_column: str, key: ClassKey = ALL) -> Tuple[np.ndarray, np.ndarray]:
    """(D, rank) arrays for records in ``key`` whose rank is present, sorted by D."""
    name = _rank_field(rank_column)
    Ds: List[int] = []
    ranks: List[int] = []
    for rec in records:
        D = int(record_field(rec, "D"))
        v = record_field(rec, name)
        if v is None or not key.contains(D):
            continue
        Ds.append(D)
        ranks.append(int(v))
    order = np.argsort(np.asarray(Ds, dtype=np.int64), kind="stable")
    return np.asarray(Ds, dtype=np.int64)[order], np.asarray(ranks, dtype=np.int64)[order]


# ---------------------------------------------------------------------------
# theoretical models


def hb_moment_constant(k: int) -> int:
    """prod_{j=1}^k (1 + 2^j), the limiting mean of 2^(k s(D))."""
    if k < 1:
        raise DomainError("k must be positive")
    return math.prod(1 + 2**j for j in range(1, k + 1))


# reference list of moment constants; its k=3 entry disagrees with the product formula
REFERENCE_MOMENT_CONSTANTS = {1: 3, 2: 15, 3: 35}


def moment_constant_discrepancies() -> Dict[int, Tuple[int, int]]:
    """{k: (reference, formula)} wherever the two disagree."""
    return {
        k: (v, hb_moment_constant(k)) for k, v in REFERENCE_MOMENT_CONSTANTS.items() if v != hb_moment_constant(k)
    }


def hb_rank_pmf(r: int, variant: str = "odd") -> float:
    """Limiting P(s(D) = r) on a residue class whose parity matches r.

    ``odd`` divides alpha 2^r by prod_{j<r} (2j + 1), ``power`` by
    prod_{j<=r} (2^j + 1).  Neither sums to one over a parity class.
    """
    if r < 0:
        raise DomainError("r must be nonnegative")
    if variant == "odd":
        denom = math.prod(2 * j + 1 for j in range(1, r))
    elif variant == "power":
        denom = math.prod(2**j + 1 for j in range(1, r + 1))
    else:
        raise DomainError(f"unknown variant {variant!r}")
    return ALPHA * 2.0**r / denom


def hb_rank_pmf_mass(parity: int, r_max: int = 5, variant: str = "odd") -> float:
    """Total of hb_rank_pmf over r <= r_max with the given parity (not renormalised)."""
    return sum(hb_rank_pmf(r, variant) for r in range(parity, r_max + 1, 2))


TRAILING_CONSTANT = 1.7313


def trailing_bound(r: int) -> float:
    if r < 0:
        raise DomainError("r must be nonnegative")
    return TRAILING_CONSTANT * 2.0 ** (-(r * r - r) / 2)


# limiting average of s(D); the alternative set keeps the competing h = 3 value for comparison
AVERAGE_RANK_CONSTANTS = {1: 1.2039, 3: 1.2039, 5: 1.3250, 7: 1.3250}
ALTERNATIVE_AVERAGE_RANK = {1: 1.2039, 3: 1.2309, 5: 1.3250, 7: 1.3250}


def average_rank_constant(key: ClassKey) -> float:
    vals = {AVERAGE_RANK_CONSTANTS.get(h) for h in key.residues}
    if None in vals or len(vals) != 1:
        raise DomainError(f"no average-rank constant for class {key.label}")
    return vals.pop()


def average_rank_discrepancies() -> Dict[int, Tuple[float, float]]:
    return {
        h: (AVERAGE_RANK_CONSTANTS[h], ALTERNATIVE_AVERAGE_RANK[h])
        for h in AVERAGE_RANK_CONSTANTS
        if AVERAGE_RANK_CONSTANTS[h] != ALTERNATIVE_AVERAGE_RANK[h]
    }


def pr_pmf(d: int) -> float:
    """Poonen-Rains probability that dim Sel_2 = d: prod_{j>=0} (1 + 2^-j)^-1 * prod_{j<=d} 2 / (2^j - 1)."""
    if d < 0:
        raise DomainError("d must be nonnegative")
    lead = 2.0 * _infinite_product(lambda j: 1.0 + 2.0**-j)  # j = 0 contributes the 2
    return math.prod(2.0 / (2.0**j - 1.0) for j in range(1, d + 1)) / lead


def pr_moment(m: int) -> int:
    if m < 1:
        raise DomainError("m must be positive")
    return math.prod(2**i + 1 for i in range(1, m + 1))


def delaunay_pmf(p: int, r: int, n: int) -> float:
    """Delaunay's predicted probability that dim Sha[p] = 2n for MW rank r."""
    if r not in (0, 1):
        raise DomainError("rank must be 0 or 1")
    if n < 0:
        raise DomainError("n must be nonnegative")
    num = _infinite_product(lambda i: 1.0 - float(p) ** -(2 * r + 2 * i - 1), start=n + 1)
    den = math.prod(1.0 - float(p) ** (-2 * i) for i in range(1, n + 1))
    return float(p) ** (-n * (2 * r + 2 * n - 1)) * num / den


def log_factor(k: int, X: float) -> float:
    """(log log X)^(4^k) / (log X)^(1/4^k)."""
    if X <= math.e:
        raise DomainError("log factor needs X > e")
    return math.log(math.log(X)) ** (4**k) / math.log(X) ** (1 / 4**k)


# ---------------------------------------------------------------------------
# empirical distributions


@dataclass
class DistributionReport:
    key: str
    rank_column: str
    size: int
    counts: Dict[int, int]
    pmf: Dict[int, float]
    moments: Dict[int, float]
    average: float
    trailing: Dict[int, float]
    theoretical: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _moment_base(rank_column: str) -> int:
    return 3 if rank_column == "s3" else 2


def empirical_distribution(
    records: Iterable[Any], rank_column: str = "s2", key: ClassKey = ALL, max_moment: int = 3
) -> DistributionReport:
    _, ranks = column_pairs(records, rank_column, key)
    n = len(ranks)
    if n == 0:
        raise UndefinedAverageError(f"no {rank_column} values in class {key.label}")
    values, cnt = np.unique(ranks, return_counts=True)
    counts = {int(v): int(c) for v, c in zip(values, cnt)}
    pmf = {v: c / n for v, c in counts.items()}
    base = _moment_base(rank_column)
    moments = {k: sum(c * float(base) ** (k * v) for v, c in counts.items()) / n for k in range(1, max_moment + 1)}
    trailing = {}
    tail = n
    for v in range(0, int(values.max()) + 1):
        trailing[v] = tail / n
        tail -= counts.get(v, 0)
    theo: Dict[str, Any] = {}
    if rank_column == "s2":
        par = key.parity
        top = max(int(values.max()), 5)
        rs = range(par if par is not None else 0, top + 1, 2 if par is not None else 1)
        theo["pmf"] = {r: hb_rank_pmf(r) for r in rs}
        theo["trailing"] = {r: trailing_bound(r) for r in rs}
        theo["moments"] = {k: hb_moment_constant(k) for k in range(1, max_moment + 1)}
        try:
            theo["average"] = average_rank_constant(key)
        except DomainError:
            pass
    elif rank_column == "s3":
        theo["moments"] = {k: math.prod(1 + 3**i for i in range(1, k + 1)) for k in range(1, max_moment + 1)}
    return DistributionReport(
        key=key.label,
        rank_column=rank_column,
        size=n,
        counts=counts,
        pmf=pmf,
        moments=moments,
        average=float(ranks.mean()),
        trailing=trailing,
        theoretical=theo,
    )


def average_rank_compare(records: Iterable[Any], key: ClassKey) -> Tuple[float, float]:
    _, ranks = column_pairs(records, "s2", key)
    if len(ranks) == 0:
        raise UndefinedAverageError(f"class {key.label} is empty")
    return float(ranks.mean()), average_rank_constant(key)


def error_normalization(records: Iterable[Any], k: int, h: int, X_grid: Sequence[float]) -> List[Tuple[float, float]]:
    """(X, |sum 2^(k s) - c_k #S(X,h)| / (X lf(k,X))) for each X in the grid."""
    if any(b <= a for a, b in zip(X_grid, X_grid[1:])):
        raise DomainError("X grid must be increasing")
    Ds, ranks = column_pairs(records, "s2", ClassKey.of(h))
    weights = np.cumsum(2.0 ** (k * ranks.astype(np.float64)))
    c = hb_moment_constant(k)
    out = []
    for X in X_grid:
        lf = log_factor(k, X)
        m = int(np.searchsorted(Ds, X, side="right"))
        total = float(weights[m - 1]) if m else 0.0
        out.append((X, abs(total - c * m) / (X * lf)))
    return out


@dataclass(frozen=True)
class ShaDim:
    D: int
    dim: Optional[int]
    anomalous: bool


def sha_dim(records: Iterable[Any], p: int) -> List[ShaDim]:
    """dim Sha[p] = dim Sel_p - rank - dim E(Q)[p] per record; odd or negative results are flagged."""
    if p not in (2, 3):
        raise DomainError("only p = 2 and p = 3 are supported")
    out = []
    for rec in records:
        D = int(record_field(rec, "D"))
        rank = record_field(rec, "mw_rank")
        if p == 2:
            s = record_field(rec, "s2")
            sel = None if s is None else s + 2
            tors = 2
        else:
            sel = record_field(rec, "sel3_dim")
            tors = 0
        if sel is None or rank is None:
            out.append(ShaDim(D, None, False))
            continue
        dim = sel - rank - tors
        out.append(ShaDim(D, dim, dim < 0 or dim % 2 == 1))
    return out


# ---------------------------------------------------------------------------
# chi-square


def _gamma_series(a: float, x: float) -> float:
    """Lower regularized gamma P(a, x) by its power series."""
    term = total = 1.0 / a
    ap = a
    for _ in range(10_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a: float, x: float) -> float:
    """Upper regularized gamma Q(a, x) by Lentz's continued fraction."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        d = tiny if abs(d) < tiny else d
        c = b + an / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def upper_gamma_regularized(a: float, x: float) -> float:
    if a <= 0 or x < 0:
        raise DomainError("need a > 0 and x >= 0")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cf(a, x)


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    p_value: float


def chi_square(observed: Sequence[float], expected: Optional[Sequence[float]] = None) -> ChiSquareResult:
    """Goodness of fit against ``expected`` (uniform split of the total by default)."""
    obs = [float(o) for o in observed]
    if len(obs) < 2:
        raise DataError("need at least two categories")
    if expected is None:
        expected = [sum(obs) / len(obs)] * len(obs)
    if any(e <= 0 for e in expected):
        raise DataError("expected counts must be positive")
    stat = sum((o - e) ** 2 / e for o, e in zip(obs, expected))
    dof = len(obs) - 1
    return ChiSquareResult(stat, dof, upper_gamma_regularized(dof / 2, stat / 2))


@dataclass
class GoldfeldReport:
    n0: int
    n1: int
    n_higher: int
    running: List[Tuple[int, float, float]]
    test: ChiSquareResult

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def goldfeld_report(records: Iterable[Any], rank_column: str = "mw", every: int = 1000) -> GoldfeldReport:
    """Rank 0/1 counts, running proportions in D order, and chi-square against a 50/50 split."""
    Ds, ranks = column_pairs(records, rank_column)
    if len(ranks) == 0:
        raise UndefinedAverageError("no ranks present")
    zero = np.cumsum(ranks == 0)
    one = np.cumsum(ranks == 1)
    running = []
    for i in list(range(every - 1, len(ranks), every)) + ([len(ranks) - 1] if len(ranks) % every else []):
        running.append((int(Ds[i]), float(zero[i] / (i + 1)), float(one[i] / (i + 1))))
    n0, n1 = int(zero[-1]), int(one[-1])
    return GoldfeldReport(n0, n1, len(ranks) - n0 - n1, running, chi_square([n0, n1]))


# ---------------------------------------------------------------------------
# resampling


@dataclass
class ResampleResult:
    proportions: np.ndarray  # NaN marks an empty trial
    mean: float
    min: float
    max: float
    histogram: Tuple[np.ndarray, np.ndarray]
    empty_trials: int


def bernoulli_resample(
    records: Iterable[Any], inclusion_prob: float, trials: int, seed: int, rank_column: str = "mw", bins: int = 20
) -> ResampleResult:
    """Rank-0 proportion among records kept independently with probability ``inclusion_prob``."""
    if not 0 < inclusion_prob <= 1:
        raise DomainError("inclusion probability must lie in (0, 1]")
    if trials < 1:
        raise DomainError("need at least one trial")
    _, ranks = column_pairs(records, rank_column)
    is_zero = ranks == 0
    rng = np.random.default_rng(seed)
    props = np.full(trials, np.nan)
    for t in range(trials):
        keep = rng.random(len(ranks)) < inclusion_prob
        n = int(keep.sum())
        if n:
            props[t] = is_zero[keep].sum() / n
    ok = props[~np.isnan(props)]
    if len(ok) == 0:
        raise UndefinedAverageError("every trial was empty")
    hist = np.histogram(ok, bins=bins, range=(0.0, 1.0))
    return ResampleResult(props, float(ok.mean()), float(ok.min()), float(ok.max()), hist, trials - len(ok))
