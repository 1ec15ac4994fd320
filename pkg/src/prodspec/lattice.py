"""Sums of squares: shell counts r_n(m), ball counts, and factor arithmetic.

r_n(m) is the number of integer vectors j in Z^n with |j|^2 = m.  Shell
tables are built by iterated convolution of the one-dimensional table
(1 at m = 0, 2 at each positive square); single values come from nested
enumeration.  r_2 additionally has the classical divisor-based evaluation,
which this module computes from an exact factorization.

All arithmetic is exact.  Tables use int64 with an overflow bound checked
before every convolution pass, escalating to Python integers if the bound
fails (not reachable for n <= 10 at table sizes that fit in memory).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import isqrt

import numpy as np

from .errors import ResourceLimitError
from .fitting import ExponentFit, envelope_exponent

__all__ = [
    "Factorization",
    "rn_bruteforce",
    "rn_table",
    "factorize",
    "r2_divisor",
    "ball_count",
    "envelope_exponent",
    "ExponentFit",
]

# Enumeration cap for rn_bruteforce, in estimated visited lattice points.
BRUTEFORCE_POINT_CAP = 300_000_000

_INT64_SAFE = 1 << 62


# ---------------------------------------------------------------------------
# shell tables

def _is_square(m: int) -> bool:
    r = isqrt(m)
    return r * r == m


def rn_bruteforce(n: int, m: int) -> int:
    """Count j in Z^n with |j|^2 = m by nested enumeration.

    Reference oracle: no arithmetic shortcuts.  Estimated work is the
    number of lattice points in the (n-1)-ball of radius sqrt(m); requests
    beyond BRUTEFORCE_POINT_CAP raise ResourceLimitError.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if m < 0:
        return 0
    est = _ball_volume_estimate(n - 1, m)
    if est > BRUTEFORCE_POINT_CAP:
        raise ResourceLimitError(
            f"rn_bruteforce(n={n}, m={m}) would visit ~{est:.2g} points"
        )

    def rec(dim: int, rem: int) -> int:
        if dim == 1:
            if rem == 0:
                return 1
            return 2 if _is_square(rem) else 0
        total = rec(dim - 1, rem)
        x = 1
        while x * x <= rem:
            total += 2 * rec(dim - 1, rem - x * x)
            x += 1
        return total

    return rec(n, m)


def _ball_volume_estimate(n: int, m: int) -> float:
    if n == 0:
        return 1.0
    # volume of the n-ball of radius sqrt(m), plus slack for the shell
    from math import gamma, pi

    return pi ** (n / 2.0) / gamma(n / 2.0 + 1.0) * (m + n) ** (n / 2.0) + 2 * n


def rn_table(n: int, m_max: int) -> np.ndarray:
    """Full table [r_n(0), ..., r_n(m_max)] via iterated convolution of r_1.

    Returns an int64 array unless the overflow bound forces object dtype.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if m_max < 0:
        raise ValueError("m_max must be >= 0")
    table = np.zeros(m_max + 1, dtype=np.int64)
    table[0] = 1
    j = 1
    while j * j <= m_max:
        table[j * j] = 2
        j += 1
    for _ in range(n - 1):
        table = _convolve_r1(table, m_max)
    return table


def _convolve_r1(prev: np.ndarray, m_max: int) -> np.ndarray:
    # out[m] = sum over x in Z with x^2 <= m of prev[m - x^2]
    n_shifts = isqrt(m_max)
    if prev.dtype == np.int64:
        bound = int(prev.max()) * (2 * n_shifts + 1)
        if bound >= _INT64_SAFE:
            prev = prev.astype(object)
    out = prev.copy()
    for j in range(1, n_shifts + 1):
        out[j * j :] += 2 * prev[: m_max + 1 - j * j]
    return out


def ball_count(n: int, radius) -> int:
    """Exact number of j in Z^n with |j| <= radius.

    radius may be an int, Fraction, or float (converted exactly).
    """
    if n < 0:
        raise ValueError("dimension must be >= 0")
    r2 = Fraction(radius) ** 2
    if r2 < 0:
        return 0
    return _ball_count_sq(n, _floor_fraction(r2))


def _floor_fraction(x: Fraction) -> int:
    return x.numerator // x.denominator


def _ball_count_sq(n: int, s: int) -> int:
    """Count j in Z^n with |j|^2 <= s."""
    if s < 0:
        return 0
    if n == 0:
        return 1
    if n == 1:
        return 2 * isqrt(s) + 1
    if n == 2:
        total = 2 * isqrt(s) + 1
        x = 1
        while x * x <= s:
            total += 2 * (2 * isqrt(s - x * x) + 1)
            x += 1
        return total
    if n == 3:
        total = _ball_count_sq(2, s)
        x = 1
        while x * x <= s:
            total += 2 * _ball_count_sq(2, s - x * x)
            x += 1
        return total
    # higher dimensions: cumulative shell table
    table = rn_table(n, s)
    return int(np.cumsum(table, dtype=object)[s]) if table.dtype == object else int(
        np.cumsum(table, dtype=np.int64)[s]
    )


# ---------------------------------------------------------------------------
# factorization

_SMALL_PRIME_LIMIT = 1 << 16


def _small_primes() -> np.ndarray:
    sieve = np.ones(_SMALL_PRIME_LIMIT, dtype=bool)
    sieve[:2] = False
    for p in range(2, isqrt(_SMALL_PRIME_LIMIT) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    return np.flatnonzero(sieve)


_PRIMES = [int(p) for p in _small_primes()]

# Deterministic Miller-Rabin witness set, valid below 3.3 * 10^24.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
_MR_LIMIT = 3_317_044_064_679_887_385_961_981


def is_prime(n: int) -> bool:
    """Deterministic primality test for 0 <= n < 3.3e24."""
    if n >= _MR_LIMIT:
        raise ValueError(f"deterministic witness set only certified below {_MR_LIMIT}")
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d = n - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _pollard_brent(n: int) -> int:
    """Find a nontrivial factor of composite odd n (deterministic schedule)."""
    from math import gcd

    if n % 2 == 0:
        return 2
    for c in range(1, 100):
        y, r, q = 2, 1, 1
        g = 1
        x = ys = y
        while g == 1:
            x = y
            for _ in range(r):
                y = (y * y + c) % n
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(128, r - k)):
                    y = (y * y + c) % n
                    q = q * abs(x - y) % n
                g = gcd(q, n)
                k += 128
            r *= 2
        if g == n:
            g = 1
            while g == 1:
                ys = (ys * ys + c) % n
                g = gcd(abs(x - ys), n)
        if g != n:
            return g
    raise ArithmeticError(f"rho failed to split {n}")


@dataclass(frozen=True)
class Factorization:
    """Prime factorization m = prod p^e with factors sorted by p."""

    m: int
    factors: tuple[tuple[int, int], ...]

    def __post_init__(self):
        prod = 1
        for p, e in self.factors:
            prod *= p**e
        if prod != self.m:
            raise ValueError(f"factors do not multiply to {self.m}")


def factorize(m: int) -> Factorization:
    """Exact factorization of m >= 1.

    Trial division by primes below 2^16, then deterministic Miller-Rabin
    plus Brent's rho for any remaining cofactor.
    """
    if m < 1:
        raise ValueError("factorize requires m >= 1")
    factors: dict[int, int] = {}
    rem = m
    for p in _PRIMES:
        if p * p > rem:
            break
        if rem % p == 0:
            e = 0
            while rem % p == 0:
                rem //= p
                e += 1
            factors[p] = e
    if rem > 1:
        stack = [rem]
        while stack:
            v = stack.pop()
            if v < _SMALL_PRIME_LIMIT * _SMALL_PRIME_LIMIT or is_prime(v):
                factors[v] = factors.get(v, 0) + 1
                continue
            d = _pollard_brent(v)
            stack.append(d)
            stack.append(v // d)
    return Factorization(m, tuple(sorted(factors.items())))


def r2_divisor(m: int, factors: Factorization | None = None) -> int:
    """r_2(m) for m >= 1 from the divisor formula 4(d_1(m) - d_3(m)).

    Zero if any prime = 3 (mod 4) divides m to an odd power, else
    4 * prod (a_p + 1) over primes p = 1 (mod 4).  Powers of 2 are inert.
    """
    if m < 1:
        raise ValueError("r2_divisor requires m >= 1")
    if factors is None:
        factors = factorize(m)
    elif factors.m != m:
        raise ValueError("factorization is for a different integer")
    out = 4
    for p, e in factors.factors:
        r = p & 3
        if r == 1:
            out *= e + 1
        elif r == 3 and e & 1:
            return 0
    return out
