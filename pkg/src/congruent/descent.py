"""Complete 2-descent on y^2 = x^3 - D^2 x and the Monsky matrix fast path.

Roots are ordered e = (-D, 0, D) and a point P = (x, y) maps to the pair
(x + D, x) modulo squares.  A pair (b1, b2) lies in the 2-Selmer group iff
the torsor

    b1 z1^2 - b2 z2^2    = D z0^2
    b1 z1^2 - b1 b2 z3^2 = 2D z0^2

has points over R and over Q_p for every p | 2D.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import gcd, isqrt
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from . import gf2
from .arith import PrimeTable, factor, jacobi
from .errors import CapacityError, ConfigurationError, DomainError, InternalConsistencyError

ORACLE = "oracle"
MATRIX = "matrix"

MAX_SUPPORT_PRIMES = 7  # bound on omega(2D) accepted by the oracle
DFS_PRIME_LIMIT = 13  # odd primes above this use the torsion-span image (cross-checked up to 29)
ENUMERATE_LIMIT = 4**6  # brute-force pair enumeration up to this many pairs
DEPTH_SLACK = 4
DEFAULT_SEARCH_HEIGHT = 2000
DEFAULT_TORSOR_BOUND = 300


def _sqfree_mul(a: int, b: int) -> int:
    g = gcd(a, b)
    return (a // g) * (b // g)


def _val(n: int, p: int) -> int:
    if n == 0:
        raise DomainError("valuation of zero")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


@dataclass(frozen=True, order=True)
class SelmerPair:
    b1: int
    b2: int

    def __mul__(self, other: "SelmerPair") -> "SelmerPair":
        return SelmerPair(_sqfree_mul(self.b1, other.b1), _sqfree_mul(self.b2, other.b2))


@dataclass(frozen=True)
class Torsor:
    D: int
    b1: int
    b2: int

    @property
    def q1_coeffs(self) -> Tuple[int, int, int, int]:
        return (-self.D, self.b1, -self.b2, 0)

    @property
    def q2_coeffs(self) -> Tuple[int, int, int, int]:
        return (-2 * self.D, self.b1, 0, -self.b1 * self.b2)

    def values(self, z: Sequence[int]) -> Tuple[int, int]:
        q1 = sum(c * x * x for c, x in zip(self.q1_coeffs, z))
        q2 = sum(c * x * x for c, x in zip(self.q2_coeffs, z))
        return q1, q2

    def jacobian(self, z: Sequence[int]) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
        return (
            tuple(2 * c * x for c, x in zip(self.q1_coeffs, z)),
            tuple(2 * c * x for c, x in zip(self.q2_coeffs, z)),
        )


@dataclass(frozen=True)
class SelmerGroup:
    D: int
    basis: Tuple[SelmerPair, ...]
    elements: FrozenSet[SelmerPair] = field(repr=False)
    method: str = ORACLE

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def s(self) -> int:
        return self.dim - 2


class Status(str, enum.Enum):
    NONCONGRUENT_CERTIFIED = "NONCONGRUENT_CERTIFIED"
    CONGRUENT_CERTIFIED = "CONGRUENT_CERTIFIED"
    UNKNOWN = "UNKNOWN"


@dataclass(frozen=True)
class CongruenceStatus:
    D: int
    status: Status
    witness: Optional[Tuple[Fraction, Fraction]] = None


def torsion_images(D: int) -> Tuple[SelmerPair, ...]:
    """Images of O, (0,0), (-D,0), (D,0)."""
    return (SelmerPair(1, 1), SelmerPair(D, -1), SelmerPair(2, -D), SelmerPair(_sqfree_mul(2, D), D))


def _check_squarefree(D: int, table: Optional[PrimeTable]) -> Tuple[int, ...]:
    if D < 1:
        raise DomainError(f"D must be positive, got {D}")
    if D == 1:
        return ()
    f = factor(D, table)
    if not f.squarefree:
        raise DomainError(f"{D} is not square-free")
    return f.primes


def selmer_support(D: int, table: Optional[PrimeTable] = None) -> List[int]:
    """Generators of Q(S, 2) for S = {inf, 2} and the primes dividing D."""
    primes = _check_squarefree(D, table)
    return [-1, 2] + [p for p in primes if p != 2]


def real_solvable(b1: int, b2: int, D: int) -> bool:
    # x + D >= 0 on every real point
    return b1 > 0


# ---------------------------------------------------------------------------
# p-adic search on the torsor


def _min_depth(t: Torsor, p: int) -> int:
    return 2 * _val(4 * t.D * t.D, p) + 1


def default_depth(t: Torsor, p: int) -> int:
    return _min_depth(t, p) + DEPTH_SLACK


def _solve_affine_mod_p(rows: List[List[int]], rhs: List[int], p: int, n: int) -> List[Tuple[int, ...]]:
    """All w in F_p^n with rows . w = rhs (mod p)."""
    m = [[x % p for x in r] + [b % p] for r, b in zip(rows, rhs)]
    pivots: List[int] = []
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, len(m)) if m[i][c]), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = pow(m[r][c], -1, p)
        m[r] = [x * inv % p for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c]:
                f = m[i][c]
                m[i] = [(x - f * y) % p for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    if any(row[n] for row in m[r:]):
        return []
    free = [c for c in range(n) if c not in pivots]
    out = []
    for vals in itertools.product(range(p), repeat=len(free)):
        w = [0] * n
        for c, v in zip(free, vals):
            w[c] = v
        for i, c in enumerate(pivots):
            w[c] = (m[i][n] - sum(m[i][f] * w[f] for f in free)) % p
        out.append(tuple(w))
    return out


def _hensel_ok(t: Torsor, z: Sequence[int], p: int) -> bool:
    q1, q2 = t.values(z)
    vq = min(_val(q, p) if q else 10**9 for q in (q1, q2))
    j1, j2 = t.jacobian(z)
    best = None
    for a, b in itertools.combinations(range(4), 2):
        minor = j1[a] * j2[b] - j1[b] * j2[a]
        if minor:
            v = _val(minor, p)
            best = v if best is None else min(best, v)
    return best is not None and vq >= 2 * best + 1


def _level_one(t: Torsor, p: int, lead: int) -> Iterator[Tuple[int, int, int, int]]:
    """Primitive residues mod p with z_j = 0 (j < lead), z_lead = 1, on both quadrics."""
    ranges = [[0] if j < lead else [1] if j == lead else range(p) for j in range(4)]
    roots: Dict[int, List[int]] = {}
    for x in range(p):
        roots.setdefault(x * x % p, []).append(x)
    c1, c2 = t.q1_coeffs, t.q2_coeffs

    def solve(coeff: int, rest: int, rng) -> List[int]:
        # coeff * z^2 + rest = 0 (mod p), z restricted to rng
        if len(rng) == 1:
            z = rng[0]
            return [z] if (coeff * z * z + rest) % p == 0 else []
        if coeff % p == 0:
            return list(rng) if rest % p == 0 else []
        target = -rest * pow(coeff, -1, p) % p
        return roots.get(target, [])

    for z0 in ranges[0]:
        for z1 in ranges[1]:
            base1 = c1[0] * z0 * z0 + c1[1] * z1 * z1
            base2 = c2[0] * z0 * z0 + c2[1] * z1 * z1
            for z2 in solve(c1[2], base1, ranges[2]):
                for z3 in solve(c2[3], base2, ranges[3]):
                    yield (z0, z1, z2, z3)


def p_adic_solvable(t: Torsor, p: int, depth: Optional[int] = None) -> bool:
    """Decide whether the torsor has a primitive Q_p-point.

    Depth-first search over the p-adic digits of (z0, z1, z2, z3), scaled so
    the first unit coordinate is exactly 1.  A node is accepted once both
    quadrics vanish to order 2m+1 while some 2x2 Jacobian minor has
    valuation at most m (multivariate Hensel).
    """
    lo = _min_depth(t, p)
    if depth is None:
        depth = lo + DEPTH_SLACK
    if depth < lo:
        raise ConfigurationError(f"depth {depth} below minimum {lo} for p={p}")

    def dfs(z: Tuple[int, ...], k: int, lead: int) -> bool:
        if _hensel_ok(t, z, p):
            return True
        if k >= depth:
            return False
        pk = p**k
        q1, q2 = t.values(z)
        j1, j2 = t.jacobian(z)
        free = [j for j in range(4) if j != lead]
        sols = _solve_affine_mod_p(
            [[j1[j] for j in free], [j2[j] for j in free]],
            [-(q1 // pk), -(q2 // pk)],
            p,
            3,
        )
        for w in sols:
            nz = list(z)
            for j, d in zip(free, w):
                nz[j] += d * pk
            if dfs(tuple(nz), k + 1, lead):
                return True
        return False

    for lead in range(4):
        for z in _level_one(t, p, lead):
            if dfs(z, 1, lead):
                return True
    return False


# ---------------------------------------------------------------------------
# local square classes


def _nonresidue(p: int) -> int:
    n = 2
    while jacobi(n, p) != -1:
        n += 1
    return n


def local_class(b: int, p: int) -> int:
    """Class of b in Q_p*/Q_p*^2 as a bit vector (2 bits for odd p, 3 for p = 2)."""
    v = _val(b, p)
    u = b // p**v
    if p == 2:
        eps = ((u - 1) // 2) & 1
        omega = ((u * u - 1) // 8) & 1
        return (v & 1) | (eps << 1) | (omega << 2)
    return (v & 1) | ((jacobi(u, p) == -1) << 1)


def class_rep(c: int, p: int) -> int:
    """Small integer representing a local class."""
    if p == 2:
        unit = {0: 1, 1: 7, 2: 5, 3: 3}[c >> 1]
    else:
        unit = _nonresidue(p) if c & 2 else 1
    return unit * (p if c & 1 else 1)


def _class_width(p: int) -> int:
    return 3 if p == 2 else 2


@lru_cache(maxsize=None)
def _local_image(p: int, dclass: int, route: str, depth_bump: int) -> FrozenSet[int]:
    """Pair classes (c1 | c2 << w) whose torsor is solvable over Q_p."""
    w = _class_width(p)
    D = class_rep(dclass, p)
    if route == "torsion":
        gens = [local_class(pr.b1, p) | local_class(pr.b2, p) << w for pr in torsion_images(D)]
        image = frozenset(gf2.span(gens))
    else:
        found = set()
        for c1 in range(1 << w):
            for c2 in range(1 << w):
                t = Torsor(D, class_rep(c1, p), class_rep(c2, p))
                if p_adic_solvable(t, p, default_depth(t, p) + depth_bump):
                    found.add(c1 | c2 << w)
        image = frozenset(found)
    expected = 8 if p == 2 else 4
    if len(image) != expected or any(a ^ b not in image for a in image for b in image):
        raise InternalConsistencyError(
            f"local image at p={p} (D class {dclass}, route {route}) is not a group of order {expected}: {sorted(image)}"
        )
    return image


def _route(p: int, dfs_prime_limit: int) -> str:
    return "dfs" if p == 2 or p <= dfs_prime_limit else "torsion"


def local_image(D: int, p: int, *, dfs_prime_limit: int = DFS_PRIME_LIMIT, depth_bump: int = 0) -> FrozenSet[int]:
    return _local_image(p, local_class(D, p), _route(p, dfs_prime_limit), depth_bump)


def locally_solvable(
    D: int, pair: SelmerPair, p: int, *, dfs_prime_limit: int = DFS_PRIME_LIMIT, depth_bump: int = 0
) -> bool:
    w = _class_width(p)
    key = local_class(pair.b1, p) | local_class(pair.b2, p) << w
    return key in local_image(D, p, dfs_prime_limit=dfs_prime_limit, depth_bump=depth_bump)


# ---------------------------------------------------------------------------
# the oracle


def _pair_from_vector(vec: int, support: Sequence[int]) -> SelmerPair:
    k = len(support)
    b1 = b2 = 1
    for i, q in enumerate(support):
        if vec >> i & 1:
            b1 *= q
        if vec >> (k + i) & 1:
            b2 *= q
    return SelmerPair(b1, b2)


def _vector_from_pair(pair: SelmerPair, support: Sequence[int]) -> int:
    k = len(support)
    vec = 0
    for i, q in enumerate(support):
        if q == -1:
            vec |= (pair.b1 < 0) << i | (pair.b2 < 0) << (k + i)
        else:
            vec |= (pair.b1 % q == 0) << i | (pair.b2 % q == 0) << (k + i)
    return vec


def _bad_primes(D: int, support: Sequence[int]) -> List[int]:
    return [2] + [q for q in support if q > 2]


def selmer_rank_oracle(
    D: int,
    *,
    table: Optional[PrimeTable] = None,
    dfs_prime_limit: int = DFS_PRIME_LIMIT,
    depth_bump: int = 0,
    enumerate_pairs: Optional[bool] = None,
) -> SelmerGroup:
    """2-Selmer group of E_D by complete 2-descent.

    With ``enumerate_pairs`` every pair over the support is tested and the
    survivors are checked to form a group; otherwise the local conditions
    are intersected as F2-linear constraints.  ``None`` picks enumeration
    when the support is small.
    """
    support = selmer_support(D, table)
    k = len(support)
    if k - 1 > MAX_SUPPORT_PRIMES:
        raise CapacityError(f"omega(2D) = {k - 1} exceeds oracle bound {MAX_SUPPORT_PRIMES}")
    if enumerate_pairs is None:
        enumerate_pairs = 4**k <= ENUMERATE_LIMIT
    primes = _bad_primes(D, support)
    opts = dict(dfs_prime_limit=dfs_prime_limit, depth_bump=depth_bump)

    if enumerate_pairs:
        elements = set()
        for vec in range(4**k):
            pair = _pair_from_vector(vec, support)
            if real_solvable(pair.b1, pair.b2, D) and all(locally_solvable(D, pair, p, **opts) for p in primes):
                elements.add(pair)
        if any(a * b not in elements for a in elements for b in elements):
            raise InternalConsistencyError(f"locally solvable pairs for D={D} are not closed under multiplication")
        n = len(elements)
        if n & (n - 1):
            raise InternalConsistencyError(f"Selmer set for D={D} has non-power-of-two size {n}")
        vecs = [_vector_from_pair(e, support) for e in elements]
        basis_vecs = gf2.echelon(vecs)
    else:
        rows = [1]  # sign of b1
        for p in primes:
            w = _class_width(p)
            image = local_image(D, p, **opts)
            images_of_units = []
            for i in range(2 * k):
                q = support[i % k]
                c = local_class(q, p)
                images_of_units.append(c if i < k else c << w)
            for f in gf2.nullspace(list(image), 2 * w):
                row = 0
                for i, img in enumerate(images_of_units):
                    row |= gf2.dot(f, img) << i
                rows.append(row)
        basis_vecs = gf2.nullspace(rows, 2 * k)
        elements = {_pair_from_vector(v, support) for v in gf2.span(basis_vecs)}

    basis = tuple(sorted(_pair_from_vector(v, support) for v in basis_vecs))
    group = SelmerGroup(D, basis, frozenset(elements), ORACLE)
    if group.dim < 2 or not set(torsion_images(D)) <= group.elements:
        raise InternalConsistencyError(f"Selmer group for D={D} misses the torsion images")
    return group


# ---------------------------------------------------------------------------
# Monsky matrix


def _legendre_bit(a: int, p: int) -> int:
    return int(jacobi(a, p) == -1)


def monsky_matrix(D: int, table: Optional[PrimeTable] = None) -> Tuple[List[int], int]:
    """Rows (as 2t-bit ints) of the Monsky matrix of an odd square-free D, and t.

    With A[i][j] = [p_j / p_i] (additive) off the diagonal, A[i][i] the row
    sum, and D_u = diag([u / p_i]):

        M = | A + D_2      D_2       |
            | D_2          A + D_-2  |
    """
    primes = _check_squarefree(D, table)
    if D % 2 == 0:
        raise DomainError("Monsky matrix here covers odd D only")
    t = len(primes)
    A = [[0] * t for _ in range(t)]
    for i, pi in enumerate(primes):
        for j, pj in enumerate(primes):
            if i != j:
                A[i][j] = _legendre_bit(pj, pi)
        A[i][i] = sum(A[i]) & 1
    d2 = [_legendre_bit(2, p) for p in primes]
    dm2 = [_legendre_bit(-2, p) for p in primes]

    def pack(bits: Sequence[int]) -> int:
        return sum(b << j for j, b in enumerate(bits))

    rows = []
    for i in range(t):
        left = [A[i][j] ^ (d2[i] if i == j else 0) for j in range(t)]
        right = [d2[i] if i == j else 0 for j in range(t)]
        rows.append(pack(left + right))
    for i in range(t):
        left = [d2[i] if i == j else 0 for j in range(t)]
        right = [A[i][j] ^ (dm2[i] if i == j else 0) for j in range(t)]
        rows.append(pack(left + right))
    return rows, t


def monsky_rank(D: int, table: Optional[PrimeTable] = None) -> int:
    """s(D) for odd square-free D as 2t - rank(M_D); even D falls back to the oracle."""
    if D % 2 == 0:
        return selmer_rank_oracle(D, table=table).s
    rows, t = monsky_matrix(D, table)
    return 2 * t - gf2.rank(rows)


def selmer_rank(D: int, table: Optional[PrimeTable] = None) -> Tuple[int, str]:
    """s(D) and the path used: matrix for odd D, oracle for even D."""
    if D % 2:
        return monsky_rank(D, table), MATRIX
    return selmer_rank_oracle(D, table=table).s, ORACLE


# ---------------------------------------------------------------------------
# point search and certification

_SQUARE_FILTERS = (64, 63, 65, 11, 17, 19, 23, 29, 31)
_SQUARE_TABLES = {q: np.isin(np.arange(q), (np.arange(q) ** 2) % q) for q in _SQUARE_FILTERS}


def on_curve(D: int, x: Fraction, y: Fraction) -> bool:
    return y * y == x**3 - D * D * x


def search_point(D: int, H: int) -> Optional[Tuple[Fraction, Fraction]]:
    """Non-torsion point with x = m/e^2, |m| <= H, 1 <= e <= H, or None.

    Denominators are tried in increasing order; for each one the candidate
    of smallest |m| wins.
    """
    if H < 1:
        raise DomainError("height bound must be positive")
    for e in range(1, H + 1):
        de2 = D * e * e
        neg = np.arange(-min(H, de2 - 1), 0, dtype=np.int64)
        pos = np.arange(de2 + 1, H + 1, dtype=np.int64) if de2 < H else np.zeros(0, dtype=np.int64)
        m = np.concatenate([neg, pos])
        if e > 1:
            m = m[np.gcd(m, e) == 1]
        if m.size == 0:
            continue
        keep = np.ones(m.size, dtype=bool)
        for q in _SQUARE_FILTERS:
            mq = m % q
            r = (mq * ((mq * mq - de2 * de2 % q) % q)) % q
            keep &= _SQUARE_TABLES[q][r]
        hits = []
        for mm in m[keep].tolist():
            v = mm * (mm * mm - de2 * de2)
            k = isqrt(v) if v > 0 else -1
            if k > 0 and k * k == v:
                hits.append((abs(mm), mm, k))
        if hits:
            _, mm, k = min(hits)
            x, y = Fraction(mm, e * e), Fraction(k, e**3)
            if not on_curve(D, x, y):
                raise InternalConsistencyError(f"search produced an invalid point for D={D}")
            return x, y
    return None


def torsor_point_search(D: int, selmer: SelmerGroup, bound: int) -> Optional[Tuple[Fraction, Fraction]]:
    """Non-torsion point found on a descent torsor with 1 <= z0 <= bound, 0 <= z1 <= bound.

    For a Selmer pair (b1, b2) a point has x + D = b1 (z1/z0)^2, x = b2 (z2/z0)^2
    and x - D = b1 b2 (z3/z0)^2, so it suffices to find z0, z1 making
    (b1 z1^2 - D z0^2) / b2 and (b1 z1^2 - 2D z0^2) / (b1 b2) perfect squares.
    """
    if bound < 1:
        raise DomainError("search bound must be positive")
    torsion = set(torsion_images(D))
    z1 = np.arange(0, bound + 1, dtype=np.int64)
    for el in sorted(selmer.elements):
        if el in torsion:
            continue
        b1, b2 = el.b1, el.b2
        b1z = b1 * z1 * z1
        for z0 in range(1, bound + 1):
            v = b1z - D * z0 * z0
            w = b1z - 2 * D * z0 * z0
            ok = (v % b2 == 0) & (w % (b1 * b2) == 0)
            q = np.where(ok, v // b2, 0)
            r = np.where(ok, w // (b1 * b2), 0)
            ok &= (q > 0) & (r > 0)
            if not ok.any():
                continue
            sq = np.rint(np.sqrt(np.maximum(q, 0))).astype(np.int64)
            sr = np.rint(np.sqrt(np.maximum(r, 0))).astype(np.int64)
            ok &= (sq * sq == q) & (sr * sr == r)
            hits = np.nonzero(ok)[0]
            if len(hits):
                i = int(hits[0])
                x = Fraction(b1 * int(z1[i]) ** 2, z0 * z0) - D
                y2 = x * (x - D) * (x + D)
                y = Fraction(isqrt(y2.numerator), isqrt(y2.denominator))
                if not on_curve(D, x, y):
                    raise InternalConsistencyError(f"torsor search produced an invalid point for D={D}")
                return x, y
    return None


def certify_status(
    D: int, selmer: SelmerGroup, H: int = DEFAULT_SEARCH_HEIGHT, torsor_bound: int = DEFAULT_TORSOR_BOUND
) -> CongruenceStatus:
    """s = 0 certifies non-congruence; an explicit point certifies congruence; otherwise UNKNOWN."""
    if selmer.D != D:
        raise DomainError("Selmer group belongs to a different D")
    if selmer.s == 0:
        return CongruenceStatus(D, Status.NONCONGRUENT_CERTIFIED)
    pt = search_point(D, H)
    if pt is None and torsor_bound > 0:
        pt = torsor_point_search(D, selmer, torsor_bound)
    if pt is not None:
        return CongruenceStatus(D, Status.CONGRUENT_CERTIFIED, pt)
    return CongruenceStatus(D, Status.UNKNOWN)


def certify_from_rank(
    D: int,
    s: int,
    H: int = DEFAULT_SEARCH_HEIGHT,
    torsor_bound: int = DEFAULT_TORSOR_BOUND,
    table: Optional[PrimeTable] = None,
) -> CongruenceStatus:
    """Same decision as :func:`certify_status` when only s(D) is at hand.

    The Selmer group is computed only if the plain x-coordinate search fails.
    """
    if s == 0:
        return CongruenceStatus(D, Status.NONCONGRUENT_CERTIFIED)
    pt = search_point(D, H)
    if pt is None and torsor_bound > 0 and len(selmer_support(D, table)) - 1 <= MAX_SUPPORT_PRIMES:
        pt = torsor_point_search(D, selmer_rank_oracle(D, table=table), torsor_bound)
    if pt is not None:
        return CongruenceStatus(D, Status.CONGRUENT_CERTIFIED, pt)
    return CongruenceStatus(D, Status.UNKNOWN)
