"""Tate's algorithm for an integral Weierstrass model at a single prime."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

from .errors import DomainError, InternalConsistencyError

Model = Tuple[int, int, int, int, int]  # a1, a2, a3, a4, a6


@dataclass(frozen=True)
class LocalReduction:
    p: int
    kodaira: str
    components: int  # irreducible components of the special fibre over the algebraic closure
    tamagawa: int
    disc_valuation: int

    @property
    def conductor_exponent(self) -> int:
        """Ogg's formula."""
        if self.kodaira == "I0":
            return 0
        if self.kodaira[1:].isdigit():
            return 1
        return self.disc_valuation + 1 - self.components


def _val(n: int, p: int) -> int:
    if n == 0:
        return 10**9
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def _invariants(a: Model):
    a1, a2, a3, a4, a6 = a
    b2 = a1 * a1 + 4 * a2
    b4 = 2 * a4 + a1 * a3
    b6 = a3 * a3 + 4 * a6
    b8 = a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4
    c4 = b2 * b2 - 24 * b4
    c6 = -b2**3 + 36 * b2 * b4 - 216 * b6
    disc = -b2 * b2 * b8 - 8 * b4**3 - 27 * b6 * b6 + 9 * b2 * b4 * b6
    return b2, b4, b6, b8, c4, c6, disc


def rst(a: Model, r: int, s: int, t: int) -> Model:
    """Substitute x = x' + r, y = y' + s x' + t."""
    a1, a2, a3, a4, a6 = a
    return (
        a1 + 2 * s,
        a2 - s * a1 + 3 * r - s * s,
        a3 + r * a1 + 2 * t,
        a4 - s * a3 + 2 * r * a2 - (t + r * s) * a1 + 3 * r * r - 2 * s * t,
        a6 + r * a4 + r * r * a2 + r**3 - t * a3 - t * t - r * t * a1,
    )


def _roots_mod_p(coeffs: Tuple[int, ...], p: int) -> int:
    """Number of roots in F_p of the polynomial with ``coeffs`` (highest degree first)."""
    count = 0
    for x in range(p):
        v = 0
        for c in coeffs:
            v = (v * x + c) % p
        count += v == 0
    return count


def tate(a: Model, p: int) -> LocalReduction:
    """Kodaira type, component count and Tamagawa number of the model at p."""
    if p < 2:
        raise DomainError("p must be prime")
    a = tuple(int(x) for x in a)  # type: ignore[assignment]
    inv2 = pow(2, -1, p) if p != 2 else None
    for _ in range(64):
        b2, b4, b6, b8, c4, c6, disc = _invariants(a)
        if disc == 0:
            raise DomainError("singular model")
        n = _val(disc, p)
        if n == 0:
            return LocalReduction(p, "I0", 1, 1, 0)

        # move the singular point to (0, 0)
        if p == 2:
            if b2 % 2 == 0:
                r = a[3] % 2
                t = (r * (1 + a[1] + a[3]) + a[4]) % 2
            else:
                r = a[2] % 2
                t = (r + a[3]) % 2
        elif p == 3:
            r = (-b6 if b2 % 3 == 0 else -b2 * b4) % 3
            t = (a[0] * r + a[2]) % 3
        else:
            if c4 % p == 0:
                r = (-pow(12, -1, p) * b2) % p
            else:
                r = (-pow(12 * c4, -1, p) * (c6 + b2 * c4)) % p
            t = (-inv2 * (a[0] * r + a[2])) % p
        a = rst(a, r, 0, t)

        if _val(c4, p) == 0:
            split = _roots_mod_p((1, a[0], -a[1]), p) > 0
            c = n if split else (2 if n % 2 == 0 else 1)
            return LocalReduction(p, f"I{n}", n, c, n)

        if _val(a[4], p) < 2:
            return LocalReduction(p, "II", 1, 1, n)
        b8 = _invariants(a)[3]
        if _val(b8, p) < 3:
            return LocalReduction(p, "III", 2, 2, n)
        b6 = _invariants(a)[2]
        if _val(b6, p) < 3:
            roots = _roots_mod_p((1, a[2] // p, -a[4] // p**2), p)
            return LocalReduction(p, "IV", 3, 3 if roots else 1, n)

        # now arrange p | a1, a2; p^2 | a3, a4; p^3 | a6
        if p == 2:
            s = a[1] % 2
            t = 2 * ((a[4] // 4) % 2)
        else:
            s = (-a[0] * inv2) % p
            t = p * ((-(a[2] // p) * inv2) % p)
        a = rst(a, 0, s, t)

        b = a[1] // p
        c = a[3] // p**2
        d = a[4] // p**3
        w = 27 * d * d - b * b * c * c + 4 * b**3 * d - 18 * b * c * d + 4 * c**3
        x = 3 * c - b * b
        if _val(w, p) == 0:
            roots = _roots_mod_p((1, b, c, d), p)
            return LocalReduction(p, "I0*", 5, 1 + roots, n)

        if _val(x, p) == 0:
            # put the double root of the cubic at T = 0
            if p == 2:
                r = b
            elif p == 3:
                r = b * c
            else:
                r = (b * c - 9 * d) * pow(2 * x, -1, p)
            a = rst(a, p * (r % p), 0, 0)
            mx = my = p * p
            m = 0
            cp = 0
            while not cp:
                m += 1
                a2t, a3t, a6t = a[1] // p, a[2] // my, a[4] // (mx * my)
                if (a3t * a3t + 4 * a6t) % p:
                    cp = 4 if _roots_mod_p((1, a3t, -a6t), p) else 2
                    break
                t = my * (a6t % 2 if p == 2 else (-a3t * inv2) % p)
                a = rst(a, 0, 0, t)
                my *= p
                m += 1
                a2t, a4t, a6t = a[1] // p, a[3] // (p * mx), a[4] // (mx * my)
                if (a4t * a4t - 4 * a6t * a2t) % p:
                    cp = 4 if _roots_mod_p((a2t, a4t, a6t), p) else 2
                    break
                r = mx * ((a6t * a2t) % 2 if p == 2 else (-a4t * pow(2 * a2t, -1, p)) % p)
                a = rst(a, r, 0, 0)
                mx *= p
            return LocalReduction(p, f"I{m}*", m + 5, cp, n)

        # triple root: move it to T = 0
        if p == 2:
            r = b
        elif p == 3:
            r = -d
        else:
            r = -b * pow(3, -1, p)
        a = rst(a, p * (r % p), 0, 0)
        x3, x6 = a[2] // p**2, a[4] // p**4
        if (x3 * x3 + 4 * x6) % p:
            return LocalReduction(p, "IV*", 7, 3 if _roots_mod_p((1, x3, -x6), p) else 1, n)
        t = p * p * (x6 % 2 if p == 2 else (-x3 * inv2) % p)
        a = rst(a, 0, 0, t)
        if _val(a[3], p) < 4:
            return LocalReduction(p, "III*", 8, 2, n)
        if _val(a[4], p) < 6:
            return LocalReduction(p, "II*", 9, 1, n)
        # not minimal: scale down and start again
        a = tuple(ai // p**i for ai, i in zip(a, (1, 2, 3, 4, 6)))  # type: ignore[assignment]
    raise InternalConsistencyError("Tate's algorithm did not terminate")
