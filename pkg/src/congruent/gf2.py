"""Linear algebra over F2 with rows packed into Python ints.

Bit ``j`` of a row is the coefficient of column ``j``.
"""

from __future__ import annotations

from typing import Iterable, List, Sequence


def rank(rows: Iterable[int]) -> int:
    """Rank over F2 by in-place elimination on a pivot basis."""
    basis: List[int] = []
    for row in rows:
        for b in basis:
            row = min(row, row ^ b)
        if row:
            basis.append(row)
            basis.sort(reverse=True)
    return len(basis)


def echelon(rows: Iterable[int]) -> List[int]:
    """Reduced row echelon basis of the row span, pivots at highest set bit."""
    basis: List[int] = []
    for row in rows:
        for b in basis:
            if row & _top(b):
                row ^= b
        if row:
            top = _top(row)
            basis = [b ^ row if b & top else b for b in basis]
            basis.append(row)
    basis.sort(reverse=True)
    return basis


def nullspace(rows: Sequence[int], n_cols: int) -> List[int]:
    """Basis of ``{x : row . x = 0 for every row}`` as bit vectors of width n_cols."""
    basis = echelon(rows)
    pivots = {_top(b).bit_length() - 1: b for b in basis}
    out: List[int] = []
    for free in range(n_cols):
        if free in pivots:
            continue
        vec = 1 << free
        for col, b in pivots.items():
            if (b >> free) & 1:
                vec |= 1 << col
        out.append(vec)
    return out


def span(generators: Iterable[int]) -> List[int]:
    """All elements of the span, sorted."""
    elems = {0}
    for g in echelon(generators):
        elems |= {e ^ g for e in elems}
    return sorted(elems)


def dot(a: int, b: int) -> int:
    return bin(a & b).count("1") & 1


def _top(x: int) -> int:
    return 1 << (x.bit_length() - 1)
