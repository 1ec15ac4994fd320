"""Exact spectra of sqrt(-Laplacian) on spheres, flat tori, and products.

Every eigenvalue lambda that occurs on these spaces has 4*lambda^2 equal
to a nonnegative integer in both supported conventions:

    Shifted    sphere lines lambda = k + (d-1)/2, so 4 lambda^2 = (2k+d-1)^2
    Geometric  sphere lines lambda = sqrt(k(k+d-1)), so 4 lambda^2 = 4k(k+d-1)
    torus      lambda = |j|, j in Z^n, so 4 lambda^2 = 4|j|^2 (both conventions)

Lines are therefore keyed by the exact integer q4 = 4 lambda^2.  Squared
eigenvalues add over product factors, so product spectra are integer
convolutions of factor tables, and window membership reduces to integer
comparisons against rational squared bounds.  No floating point touches
any membership or counting decision.
"""

from __future__ import annotations

import hashlib
import threading
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction
from math import comb, isqrt

import numpy as np

from . import lattice
from .errors import ResourceLimitError, SpecParseError

__all__ = [
    "Sphere",
    "Torus",
    "Product",
    "ManifoldSpec",
    "SpectralConvention",
    "SHIFTED",
    "GEOMETRIC",
    "SpectralLine",
    "Window",
    "GapScan",
    "dimension",
    "parse_spec",
    "format_spec",
    "sphere_harmonic_dim",
    "enumerate_lines",
    "count",
    "window_count",
    "distinct_gap_scan",
    "product_count_convolution",
    "projector_sup_ratio",
    "write_lines_csv",
    "clear_cache",
]

# Dense convolution buffers refuse to exceed this many cells.
MAX_DENSE_CELLS = 1 << 25


# ---------------------------------------------------------------------------
# manifold specs

@dataclass(frozen=True)
class Sphere:
    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("sphere dimension must be >= 1")


@dataclass(frozen=True)
class Torus:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("torus dimension must be >= 1")


@dataclass(frozen=True)
class Product:
    factors: tuple

    def __post_init__(self):
        if not self.factors:
            raise ValueError("product needs at least one factor")
        # canonical factor order: equal products compare and hash equally
        object.__setattr__(
            self, "factors", tuple(sorted(self.factors, key=_sort_key))
        )


ManifoldSpec = Sphere | Torus | Product


def _sort_key(spec):
    if isinstance(spec, Sphere):
        return ("S", spec.d)
    if isinstance(spec, Torus):
        return ("T", spec.n)
    return ("P", tuple(_sort_key(f) for f in spec.factors))


def dimension(spec) -> int:
    if isinstance(spec, Sphere):
        return spec.d
    if isinstance(spec, Torus):
        return spec.n
    return sum(dimension(f) for f in spec.factors)


def format_spec(spec) -> str:
    if isinstance(spec, Sphere):
        return f"S{spec.d}"
    if isinstance(spec, Torus):
        return f"T{spec.n}"
    parts = []
    for f in spec.factors:
        s = format_spec(f)
        parts.append(f"({s})" if isinstance(f, Product) else s)
    return " x ".join(parts)


def parse_spec(text: str):
    """Parse 'S2', 'T3', 'S2 x T2 x S1', ... into a ManifoldSpec.

    Factors are single letters S or T followed by a positive integer,
    joined by 'x'.  Bad tokens raise SpecParseError with the offset.
    """
    factors = []
    pos = 0
    expect_factor = True
    tokens = text.split(" ")
    for tok in tokens:
        if tok == "":
            pos += 1
            continue
        if expect_factor:
            if len(tok) < 2 or tok[0] not in "ST" or not tok[1:].isdigit():
                raise SpecParseError(f"expected S<dim> or T<dim>, got {tok!r}", pos)
            dim = int(tok[1:])
            if dim < 1:
                raise SpecParseError(f"dimension must be positive in {tok!r}", pos)
            factors.append(Sphere(dim) if tok[0] == "S" else Torus(dim))
        else:
            if tok != "x":
                raise SpecParseError(f"expected 'x' between factors, got {tok!r}", pos)
        expect_factor = not expect_factor
        pos += len(tok) + 1
    if expect_factor:
        raise SpecParseError("empty or dangling spec", max(0, pos - 1))
    return factors[0] if len(factors) == 1 else Product(tuple(factors))


# ---------------------------------------------------------------------------
# conventions, lines, windows

class SpectralConvention:
    """Line-value convention: 'shifted' or 'geometric'."""

    def __init__(self, kind: str):
        if kind not in ("shifted", "geometric"):
            raise ValueError(f"unknown convention {kind!r}")
        self.kind = kind

    def __eq__(self, other):
        return isinstance(other, SpectralConvention) and self.kind == other.kind

    def __hash__(self):
        return hash(("SpectralConvention", self.kind))

    def __repr__(self):
        return f"SpectralConvention({self.kind!r})"

    def __str__(self):
        return self.kind


SHIFTED = SpectralConvention("shifted")
GEOMETRIC = SpectralConvention("geometric")


@dataclass(frozen=True)
class SpectralLine:
    """One distinct eigenvalue lambda = sqrt(q4)/2 with its total multiplicity."""

    q4: int
    mult: int

    @property
    def lam(self) -> float:
        return self.q4**0.5 / 2.0


@dataclass(frozen=True)
class Window:
    """Closed window [c-h, c+h] with exact rational membership tests.

    Membership of a line is 4(c-h)^2 <= q4 <= 4(c+h)^2, decided by integer
    cross-multiplication.  sqrt_center builds windows centered at an
    irrational sqrt(m) (the squared endpoints stay rational).
    """

    q4_lo: Fraction  # 4 * (lower edge)^2
    q4_hi: Fraction  # 4 * (upper edge)^2

    def __post_init__(self):
        lo = Fraction(self.q4_lo)
        hi = Fraction(self.q4_hi)
        if lo < 0 or hi < lo:
            raise ValueError("window edges must satisfy 0 <= lo <= hi")
        object.__setattr__(self, "q4_lo", lo)
        object.__setattr__(self, "q4_hi", hi)

    @classmethod
    def around(cls, center, halfwidth) -> "Window":
        c = Fraction(center)
        h = Fraction(halfwidth)
        if c <= 0:
            raise ValueError("window center must be positive")
        if h < 0 or h > c:
            raise ValueError("need 0 <= halfwidth <= center")
        return cls(4 * (c - h) ** 2, 4 * (c + h) ** 2)

    @classmethod
    def sqrt_center(cls, m: int, inv_lambda_width: bool = True, halfwidth=None) -> "Window":
        """Window centered at lambda = sqrt(m).

        With inv_lambda_width (default) the window is
        [sqrt(m) - 1/sqrt(m), sqrt(m) + 1/sqrt(m)], whose squared edges are
        the rationals m -+ 2 + 1/m.  Otherwise halfwidth must be rational.
        """
        if m < 1:
            raise ValueError("need m >= 1")
        if inv_lambda_width:
            lo = Fraction(4) * (m - 2) + Fraction(4, m)
            return cls(max(Fraction(0), lo), Fraction(4) * (m + 2) + Fraction(4, m))
        h = Fraction(halfwidth)
        if h < 0:
            raise ValueError("halfwidth must be >= 0")
        # (sqrt(m) +- h)^2 = m + h^2 +- 2 h sqrt(m): irrational unless h = 0,
        # so only h = 0 is representable here.
        if h != 0:
            raise ValueError("irrational edges; use inv_lambda_width or around()")
        return cls(Fraction(4 * m), Fraction(4 * m))

    def q4_bounds(self) -> tuple[int, int]:
        """Smallest and largest integers q4 inside the window."""
        lo = -((-self.q4_lo.numerator) // self.q4_lo.denominator)  # ceil
        hi = self.q4_hi.numerator // self.q4_hi.denominator        # floor
        return lo, hi

    def contains_q4(self, q4: int) -> bool:
        return self.q4_lo <= q4 <= self.q4_hi


# ---------------------------------------------------------------------------
# leaf line tables

def sphere_harmonic_dim(d: int, k: int) -> int:
    """Dimension of the degree-k spherical harmonics on S^d."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if k < 0:
        raise ValueError("degree must be >= 0")
    if k == 0:
        return 1
    return comb(k + d, d) - comb(k + d - 2, d)


def _sphere_kmax(d: int, conv: SpectralConvention, cap4: int) -> int:
    """Largest k whose line satisfies q4 <= cap4 (or -1 if none)."""
    if cap4 < 0:
        return -1
    if conv.kind == "shifted":
        r = isqrt(cap4)  # need 2k + d - 1 <= r
        return (r - d + 1) // 2 if r >= d - 1 else -1
    # geometric: 4k(k+d-1) <= cap4
    s = cap4 // 4
    k = (isqrt((d - 1) * (d - 1) + 4 * s) - (d - 1)) // 2
    while k * (k + d - 1) > s:
        k -= 1
    while (k + 1) * (k + d) <= s:
        k += 1
    return k


def _sphere_q4(d: int, conv: SpectralConvention, k: np.ndarray) -> np.ndarray:
    if conv.kind == "shifted":
        a = 2 * k + (d - 1)
        return a * a
    return 4 * k * (k + d - 1)


def _sphere_lines(d: int, conv: SpectralConvention, cap4: int):
    kmax = _sphere_kmax(d, conv, cap4)
    if kmax < 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    k = np.arange(0, kmax + 1, dtype=np.int64)
    q4 = _sphere_q4(d, conv, k)
    if d == 1:
        mult = np.where(k == 0, 1, 2).astype(np.int64)
    else:
        mult = np.array([sphere_harmonic_dim(d, int(kk)) for kk in k], dtype=object)
        as64 = mult.astype(np.int64, casting="unsafe")
        if np.array_equal(as64.astype(object), mult):
            mult = as64
    return q4, mult


def _torus_lines(n: int, cap4: int):
    m_max = cap4 // 4
    _check_cap(m_max)
    table = lattice.rn_table(n, m_max)
    m = np.flatnonzero(table)
    return (4 * m).astype(np.int64), table[m]


# ---------------------------------------------------------------------------
# product convolution and the table cache

def _factor_lines(spec, conv: SpectralConvention, cap4: int):
    """(q4 ascending, mult) arrays for all lines of spec with q4 <= cap4."""
    if isinstance(spec, Sphere):
        return _sphere_lines(spec.d, conv, cap4)
    if isinstance(spec, Torus):
        return _torus_lines(spec.n, cap4)
    parts = [_factor_lines(f, conv, cap4) for f in spec.factors]
    return _convolve_lines(parts, cap4)


def _check_cap(cells: int):
    # sphere leaves are sparse in q4 and never materialize a dense buffer,
    # so only torus tables and product convolutions are capped
    if cells + 1 > MAX_DENSE_CELLS:
        raise ResourceLimitError(
            f"line table of {cells + 1} cells exceeds cap {MAX_DENSE_CELLS}"
        )


def _convolve_lines(parts, cap4: int):
    """Exact convolution of factor (q4, mult) tables, truncated at cap4."""
    _check_cap(cap4)
    # overflow bound: every output multiplicity is at most the product of
    # the factor totals, so int64 is safe below 2^62
    totals = [sum(int(v) for v in mult) for _, mult in parts]
    bound = 1
    for t in totals:
        bound *= max(t, 1)
    use_object = bound >= (1 << 62)

    parts = sorted(parts, key=lambda p: len(p[0]), reverse=True)
    dtype = object if use_object else np.int64
    dense = np.zeros(cap4 + 1, dtype=dtype)
    q4_0, mult_0 = parts[0]
    dense[q4_0] = mult_0.astype(dtype) if not use_object else mult_0.astype(object)
    for q4_f, mult_f in parts[1:]:
        out = np.zeros(cap4 + 1, dtype=dtype)
        for qf, mf in zip(q4_f.tolist(), mult_f.tolist()):
            if qf > cap4:
                break
            out[qf:] += mf * dense[: cap4 + 1 - qf]
        dense = out
    q4 = np.flatnonzero(dense)
    return q4.astype(np.int64), dense[q4]


class _CachedTable:
    """Largest table built so far for one (spec, conv), with prefix sums."""

    def __init__(self, cap4: int, q4: np.ndarray, mult: np.ndarray):
        self.cap4 = cap4
        self.q4 = q4
        self.mult = mult
        if mult.dtype == object or (
            len(mult) and float(np.max(mult)) * len(mult) >= 2.0**61
        ):
            self.cum = np.cumsum(mult.astype(object))
        else:
            self.cum = np.cumsum(mult, dtype=np.int64)

    def count_leq(self, q4_bound: int) -> int:
        i = bisect_right(self.q4, min(q4_bound, self.cap4))
        return int(self.cum[i - 1]) if i else 0

    def count_range(self, q4_lo: int, q4_hi: int) -> int:
        if q4_hi < q4_lo:
            return 0
        return self.count_leq(q4_hi) - (self.count_leq(q4_lo - 1) if q4_lo > 0 else 0)


_TABLE_CACHE: dict = {}
_TABLE_LOCK = threading.Lock()


def clear_cache():
    with _TABLE_LOCK:
        _TABLE_CACHE.clear()


def _table(spec, conv: SpectralConvention, cap4: int) -> _CachedTable:
    key = (_sort_key(spec), conv.kind)
    with _TABLE_LOCK:
        hit = _TABLE_CACHE.get(key)
    if hit is not None and hit.cap4 >= cap4:
        return hit
    q4, mult = _factor_lines(spec, conv, cap4)
    built = _CachedTable(cap4, q4, mult)
    with _TABLE_LOCK:
        hit = _TABLE_CACHE.get(key)
        if hit is None or hit.cap4 < cap4:
            _TABLE_CACHE[key] = built
        else:
            built = hit
    return built


def _cap4_of(lam_max) -> int:
    lam = Fraction(lam_max)
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    v = 4 * lam * lam
    return v.numerator // v.denominator


# ---------------------------------------------------------------------------
# public operations

def enumerate_lines(spec, conv: SpectralConvention, lam_max) -> list[SpectralLine]:
    """All distinct lines with lambda <= lam_max, ascending in q4."""
    cap4 = _cap4_of(lam_max)
    t = _table(spec, conv, cap4)
    idx = bisect_right(t.q4, cap4)
    return [
        SpectralLine(int(q), int(m))
        for q, m in zip(t.q4[:idx].tolist(), t.mult[:idx].tolist())
    ]


def count(spec, conv: SpectralConvention, lam) -> int:
    """Number of eigenvalues lambda_j <= lam, counted with multiplicity.

    Leaves use closed forms (lattice ball counts, telescoped harmonic
    dimensions); products go through the convolution line table.  The
    assembly route lives in product_count_convolution, deliberately on a
    different code path.
    """
    lamf = Fraction(lam)
    if lamf < 0:
        raise ValueError("lambda must be >= 0")
    b4 = 4 * lamf * lamf
    b = b4.numerator // b4.denominator
    if isinstance(spec, Product):
        return _table(spec, conv, b).count_leq(b)
    return _count_q4(spec, conv, b4)


def _count_q4(spec, conv: SpectralConvention, q4_bound) -> int:
    """Count of lines with q4 <= q4_bound (exact; bound may be rational).

    Products are evaluated by the assembly sum over the factor with the
    fewest lines, never by a convolution table.
    """
    if q4_bound < 0:
        return 0
    b = q4_bound if isinstance(q4_bound, int) else (
        q4_bound.numerator // q4_bound.denominator
    )
    if isinstance(spec, Torus):
        return lattice._ball_count_sq(spec.n, b // 4)
    if isinstance(spec, Sphere):
        kmax = _sphere_kmax(spec.d, conv, b)
        if kmax < 0:
            return 0
        d = spec.d
        # sum of dim H_k over k <= kmax telescopes
        return comb(kmax + d, d) + comb(kmax + d - 1, d)
    factors = list(spec.factors)
    sizes = [(_line_count_estimate(f, conv, b), i) for i, f in enumerate(factors)]
    sizes.sort()
    first = factors.pop(sizes[0][1])
    rest = factors[0] if len(factors) == 1 else Product(tuple(factors))
    q4f, multf = _factor_lines_capped(first, conv, b)
    total = 0
    for qf, mf in zip(q4f.tolist(), multf.tolist()):
        total += mf * _count_q4(rest, conv, q4_bound - qf)
    return total


def _line_count_estimate(spec, conv, cap4: int) -> float:
    if isinstance(spec, Sphere):
        return isqrt(cap4) / 2 + 1
    if isinstance(spec, Torus):
        return cap4 / 4 + 1
    return min(cap4 + 1.0, float(np.prod([
        _line_count_estimate(f, conv, cap4) for f in spec.factors
    ])))


def _factor_lines_capped(spec, conv, cap4: int):
    if isinstance(spec, Sphere):
        return _sphere_lines(spec.d, conv, cap4)
    if isinstance(spec, Torus):
        return _torus_lines(spec.n, cap4)
    t = _table(spec, conv, cap4)
    idx = bisect_right(t.q4, cap4)
    return t.q4[:idx], t.mult[:idx]


def window_count(spec, conv: SpectralConvention, w: Window) -> int:
    """Multiplicity-weighted number of lines inside the closed window."""
    lo, hi = w.q4_bounds()
    if hi < lo:
        return 0
    t = _table(spec, conv, hi)
    i = bisect_left(t.q4, max(lo, 0))
    j = bisect_right(t.q4, hi)
    return int(np.sum(t.mult[i:j].astype(object))) if j > i else 0


@dataclass(frozen=True)
class GapScan:
    min_normalized_gap: float
    lam: float
    lam_next: float
    n_lines: int


def distinct_gap_scan(spec, conv: SpectralConvention, lam_lo, lam_hi) -> GapScan:
    """Minimum of (lambda' - lambda) * lambda over consecutive distinct lines.

    Both endpoints are included in the scanned range.  Consecutive Shifted
    product-of-sphere lines satisfy q4' - q4 >= 1, which already forces
    (lambda' - lambda) * lambda >= lambda / (4 (lambda + lambda')) > 0.
    """
    flo = Fraction(lam_lo)
    fhi = Fraction(lam_hi)
    if not 0 <= flo < fhi:
        raise ValueError("need 0 <= lam_lo < lam_hi")
    cap4 = _cap4_of(fhi)
    t = _table(spec, conv, cap4)
    lo4 = 4 * flo * flo
    i = bisect_left(t.q4, -((-lo4.numerator) // lo4.denominator))
    j = bisect_right(t.q4, cap4)
    q4s = t.q4[i:j]
    if len(q4s) < 2:
        raise ValueError("fewer than two distinct lines in range")
    lam = np.sqrt(q4s.astype(float)) / 2.0
    gaps = (lam[1:] - lam[:-1]) * lam[:-1]
    a = int(np.argmin(gaps))
    return GapScan(float(gaps[a]), float(lam[a]), float(lam[a + 1]), int(len(q4s)))


def product_count_convolution(specX, specY, conv: SpectralConvention, lam) -> int:
    """The assembly sum over X lines of Y counts at the complementary radius.

    Evaluates sum over lines mu of X with mu <= lam of
    N_Y(sqrt(lam^2 - mu^2)) in exact q4 arithmetic.  Always equals
    count(Product(X, Y), lam); the two sides take different code paths.
    """
    lamf = Fraction(lam)
    if lamf < 0:
        raise ValueError("lambda must be >= 0")
    b4 = 4 * lamf * lamf
    bi = b4.numerator // b4.denominator
    q4x, multx = _factor_lines_capped(specX, conv, bi)
    total = 0
    for qx, mx in zip(q4x.tolist(), multx.tolist()):
        total += mx * _count_q4(specY, conv, b4 - qx)
    return total


def projector_sup_ratio(spec, conv: SpectralConvention, w: Window) -> float:
    """sup-norm of the L2-normalized window projector kernel.

    On a homogeneous space the window projector has constant diagonal
    window_count / Vol, and its L2 -> Linf norm is the square root.
    """
    _require_homogeneous(spec)
    from .weyl import manifold_volume

    n = window_count(spec, conv, w)
    return float(np.sqrt(n / manifold_volume(spec)))


def _require_homogeneous(spec):
    if isinstance(spec, Product):
        for f in spec.factors:
            _require_homogeneous(f)
    elif not isinstance(spec, (Sphere, Torus)):
        raise ValueError(f"not a homogeneous spec: {spec!r}")


# ---------------------------------------------------------------------------
# serialization

def write_lines_csv(path, lines) -> None:
    """Write lines as 'q4,mult' CSV with a header."""
    with open(path, "w") as fh:
        fh.write("q4,mult\n")
        for line in lines:
            fh.write(f"{line.q4},{line.mult}\n")


def cache_key(spec, conv: SpectralConvention, lam_max) -> str:
    """Content hash identifying a line table on disk."""
    text = f"{format_spec(spec)}|{conv.kind}|{Fraction(lam_max)}"
    return hashlib.sha256(text.encode()).hexdigest()


def cached_lines(spec, conv: SpectralConvention, lam_max, cache_dir) -> list[SpectralLine]:
    """enumerate_lines backed by an on-disk .npz cache directory."""
    import os

    path = os.path.join(cache_dir, cache_key(spec, conv, lam_max) + ".npz")
    if os.path.exists(path):
        data = np.load(path, allow_pickle=False)
        return [
            SpectralLine(int(q), int(m))
            for q, m in zip(data["q4"].tolist(), data["mult"].tolist())
        ]
    lines = enumerate_lines(spec, conv, lam_max)
    q4 = np.array([ln.q4 for ln in lines], dtype=np.int64)
    mult = np.array([ln.mult for ln in lines], dtype=np.int64)
    os.makedirs(cache_dir, exist_ok=True)
    tmp = path + ".tmp.npz"
    np.savez_compressed(tmp, q4=q4, mult=mult)
    os.replace(tmp, path)
    return lines
