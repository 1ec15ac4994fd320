"""Weyl main terms, remainder fits, Riesz means, and volume identities.

The counting function N(lambda) on a d-dimensional model space has main
term (2 pi)^-d omega_d Vol lambda^d.  Remainders R = N - main oscillate
and change sign, so their growth claims are checked with the shared
dyadic-envelope fitter.  Riesz means insert the factor
(1 - lambda_j^2/lambda^2)^delta; their main-term coefficient carries the
beta factor (1/2) B(delta+1, d/2), and with delta = d_Y/2 that beta factor
closes the volume identity

    omega_{d_Y} |S^{d_X-1}| (1/2) B(d_Y/2 + 1, d_X/2) = omega_{d_X+d_Y}.

The second beta argument here is d_Y/2 + 1: that is what the product of
the two Gamma-function forms forces, and it is the convention every
routine in this module uses and reports.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import exp, fsum, isqrt, lgamma, log, pi, sqrt

import numpy as np

from . import spectra
from .exponents import EpsSchedule
from .fitting import ExponentFit, envelope_exponent
from .spectra import (
    GEOMETRIC,
    SHIFTED,
    ManifoldSpec,
    Product,
    SpectralConvention,
    Sphere,
    Torus,
    count,
    dimension,
)

__all__ = [
    "RemainderSample",
    "FitReport",
    "ProductWeylReport",
    "unit_ball_volume",
    "unit_ball_volume_exact",
    "sphere_surface",
    "manifold_volume",
    "weyl_main_term",
    "remainder_series",
    "fit_remainder",
    "riesz_diagonal",
    "riesz_main_term",
    "beta_identity_residual",
    "improved_product_weyl_check",
    "sign_changes",
]

SLOPE_TOLERANCE = 0.15


# ---------------------------------------------------------------------------
# volumes

def unit_ball_volume(n: int) -> float:
    """omega_n = pi^(n/2) / Gamma(n/2 + 1)."""
    if n < 0:
        raise ValueError("dimension must be >= 0")
    return exp(0.5 * n * log(pi) - lgamma(0.5 * n + 1.0))


def unit_ball_volume_exact(n: int) -> tuple[Fraction, int]:
    """omega_n as (rational coefficient, power of pi).

    Even n: pi^(n/2) / (n/2)!.  Odd n: pi^((n-1)/2) * 2^((n+1)/2) / n!!.
    """
    if n < 0:
        raise ValueError("dimension must be >= 0")
    if n % 2 == 0:
        half = n // 2
        coef = Fraction(1)
        for j in range(2, half + 1):
            coef /= j
        return coef, half
    dfact = 1
    for j in range(n, 0, -2):
        dfact *= j
    return Fraction(2 ** ((n + 1) // 2), dfact), (n - 1) // 2


def sphere_surface(n: int) -> float:
    """|S^(n-1)| = n * omega_n, the surface area of the unit sphere in R^n."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    return n * unit_ball_volume(n)


def manifold_volume(spec: ManifoldSpec) -> float:
    """Vol(S^d) = |S^d in R^(d+1)|; Vol(T^n) = (2 pi)^n; products multiply."""
    if isinstance(spec, Sphere):
        return sphere_surface(spec.d + 1)
    if isinstance(spec, Torus):
        return (2.0 * pi) ** spec.n
    v = 1.0
    for f in spec.factors:
        v *= manifold_volume(f)
    return v


def weyl_main_term(spec: ManifoldSpec, lam) -> float:
    """(2 pi)^-d omega_d Vol(spec) lambda^d with d the total dimension."""
    lamf = float(lam)
    if lamf < 0:
        raise ValueError("lambda must be >= 0")
    d = dimension(spec)
    return (2.0 * pi) ** (-d) * unit_ball_volume(d) * manifold_volume(spec) * lamf**d


# ---------------------------------------------------------------------------
# remainder series and fits

@dataclass(frozen=True)
class RemainderSample:
    lam: float
    N: int
    main: float
    R: float


def remainder_series(spec, conv: SpectralConvention, lam_grid) -> list[RemainderSample]:
    """Exact N and float remainder R = N - main at each grid point."""
    grid = [float(t) for t in lam_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly increasing")
    if not grid:
        raise ValueError("empty grid")
    if isinstance(spec, Product):
        spectra._table(spec, conv, spectra._cap4_of(Fraction(grid[-1])))
    out = []
    for lam in grid:
        n = count(spec, conv, Fraction(lam))
        main = weyl_main_term(spec, lam)
        out.append(RemainderSample(lam, n, main, float(n) - main))
    return out


@dataclass(frozen=True)
class FitReport:
    fit: ExponentFit
    threshold: float
    verdict: bool
    sigma: float


def _schedule_sigma(schedule: EpsSchedule) -> float:
    return float(schedule.delta) if schedule.kind == "power" else 0.0


def fit_remainder(
    series: list[RemainderSample],
    schedule: EpsSchedule,
    d: int,
    tolerance: float = SLOPE_TOLERANCE,
) -> FitReport:
    """Envelope fit of |R| vs lambda, compared against slope d - 1 - sigma.

    sigma is the power-law exponent of the schedule (0 for unit and log
    schedules).  Counting remainders cannot have an envelope decaying
    below O(1), so the comparison threshold is floored at slope 0.
    """
    lam = np.array([s.lam for s in series])
    r = np.abs(np.array([s.R for s in series]))
    fit = envelope_exponent(lam, r)
    threshold = max(d - 1 - _schedule_sigma(schedule), 0.0) + tolerance
    return FitReport(fit, threshold, bool(fit.slope <= threshold), _schedule_sigma(schedule))


def sign_changes(series: list[RemainderSample]) -> int:
    """Number of sign changes of R along the grid (zeros skipped)."""
    signs = [s.R for s in series if s.R != 0.0]
    return sum(1 for a, b in zip(signs, signs[1:]) if (a > 0) != (b > 0))


@dataclass(frozen=True)
class ProductWeylReport:
    y_fit: FitReport
    product_fit: FitReport
    verdict: bool


def improved_product_weyl_check(
    specX,
    specY,
    conv: SpectralConvention,
    schedule: EpsSchedule,
    lam_grid,
    tolerance: float = SLOPE_TOLERANCE,
) -> ProductWeylReport:
    """Check the schedule-improved remainder bound on a product.

    First fits Y's own remainder against the schedule hypothesis (the
    assembly argument consumes exactly that bound), then fits the product
    remainder and compares its slope with d - 1 - sigma.
    """
    y_series = remainder_series(specY, conv, lam_grid)
    y_fit = fit_remainder(y_series, schedule, dimension(specY), tolerance)
    if not y_fit.verdict:
        return ProductWeylReport(y_fit, y_fit, False)
    prod = Product((specX, specY))
    p_series = remainder_series(prod, conv, lam_grid)
    p_fit = fit_remainder(p_series, schedule, dimension(prod), tolerance)
    return ProductWeylReport(y_fit, p_fit, p_fit.verdict)


# ---------------------------------------------------------------------------
# Riesz means

def riesz_diagonal(spec, conv: SpectralConvention, delta, lam) -> float:
    """S^delta_lambda(x, x) = (1/Vol) sum (1 - lambda_j^2/lambda^2)^delta.

    Constant on the diagonal by homogeneity.  Terms are accumulated in
    ascending q4 order (descending magnitude) with compensated summation;
    one- and two-dimensional tori use a direct lattice scan with row-wise
    partial sums so that lambda up to a few thousand stays cheap.
    """
    lamf = Fraction(lam)
    if lamf <= 0:
        raise ValueError("lambda must be positive")
    deltaf = float(delta)
    if deltaf < 0:
        raise ValueError("delta must be >= 0")
    spectra._require_homogeneous(spec)
    lam2 = float(lamf) ** 2
    if isinstance(spec, Torus) and spec.n <= 2:
        total = _riesz_torus_scan(spec.n, lamf, deltaf, lam2)
    else:
        cap4 = spectra._cap4_of(lamf)
        q4, mult = spectra._factor_lines_capped(spec, conv, cap4)
        x = 1.0 - q4.astype(float) / (4.0 * lam2)
        x[x < 0.0] = 0.0
        terms = mult.astype(float) * x**deltaf if deltaf != 0 else mult.astype(float)
        total = fsum(terms.tolist())
    return total / manifold_volume(spec)


def _riesz_torus_scan(n: int, lamf: Fraction, delta: float, lam2: float) -> float:
    s = (lamf * lamf).numerator // (lamf * lamf).denominator
    xmax = isqrt(s)
    if n == 1:
        j = np.arange(-xmax, xmax + 1, dtype=np.int64)
        vals = 1.0 - j.astype(float) ** 2 / lam2
        vals[vals < 0.0] = 0.0
        return fsum((vals**delta if delta != 0 else np.ones_like(vals)).tolist())
    rows = []
    for x in range(-xmax, xmax + 1):
        ymax = isqrt(s - x * x)
        y = np.arange(-ymax, ymax + 1, dtype=np.int64)
        vals = 1.0 - (x * x + y * y).astype(float) / lam2
        vals[vals < 0.0] = 0.0
        if delta == 0:
            rows.append(float(len(vals)))
        elif delta == 1.0:
            rows.append(float(np.sum(vals)))
        else:
            rows.append(float(np.sum(vals**delta)))
    return fsum(rows)


def riesz_main_term(d: int, delta, lam) -> float:
    """(2 pi)^-d |S^(d-1)| (1/2) B(delta+1, d/2) lambda^d.

    The guaranteed O(lambda^(d-2)) remainder needs delta >= 1; smaller
    delta still evaluates (callers flag it as informational).
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    deltaf = float(delta)
    lamf = float(lam)
    lb = lgamma(deltaf + 1.0) + lgamma(0.5 * d) - lgamma(deltaf + 1.0 + 0.5 * d)
    return (2.0 * pi) ** (-d) * sphere_surface(d) * 0.5 * exp(lb) * lamf**d


def beta_identity_residual(d_x: int, d_y: int) -> float:
    """|omega_dY |S^(dX-1)| (1/2) B(dY/2+1, dX/2) - omega_(dX+dY)|."""
    if d_x < 1 or d_y < 1:
        raise ValueError("dimensions must be >= 1")
    lb = lgamma(0.5 * d_y + 1.0) + lgamma(0.5 * d_x) - lgamma(0.5 * (d_x + d_y) + 1.0)
    left = unit_ball_volume(d_y) * sphere_surface(d_x) * 0.5 * exp(lb)
    return abs(left - unit_ball_volume(d_x + d_y))
