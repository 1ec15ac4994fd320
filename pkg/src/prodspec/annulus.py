"""Exact decomposition of the joint-spectrum annulus of a product.

For a product X x Y, joint frequencies sqrt(mu^2 + nu^2) inside the
annulus [lambda - eps, lambda + eps] are partitioned by the size of the
Y-component nu into a high region (nu >= lambda/2), a low region
(nu <= 1), and dyadic shells nu in (lambda 2^-l, lambda 2^(-l+1)] for
2^-l between 1/lambda and 1/4.  All membership and region decisions are
made on the integers mu_q4 = 4 mu^2, nu_q4 = 4 nu^2 against rational
bounds, so they are exact.

Shell indices l are clamped into the admissible range: points falling
below the smallest shell are assigned the largest admissible l, and
specs too small to admit any shell (lambda < 4) fall back to l = 2, so
the three families always partition the annulus exactly.
"""

from __future__ import annotations

import csv
from bisect import bisect_left, bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, floor, sqrt

import numpy as np

from .exponents import EpsSchedule
from .spectra import (
    ManifoldSpec,
    Product,
    SpectralConvention,
    Window,
    _factor_lines_capped,
    _require_homogeneous,
    window_count,
)

__all__ = [
    "JointPoint",
    "AnnulusDecomposition",
    "PartitionReport",
    "RegionStats",
    "decompose",
    "verify_partition",
    "region_stats",
    "schedule_epsilon",
    "write_decomposition_csv",
]

EPS_DENOMINATOR = 10**9


@dataclass(frozen=True)
class JointPoint:
    """One joint line: squared factor frequencies x4 and pair multiplicity."""

    mu_q4: int
    nu_q4: int
    mult_pair: int


@dataclass(frozen=True)
class AnnulusDecomposition:
    specX: ManifoldSpec
    specY: ManifoldSpec
    conv: SpectralConvention
    lam: Fraction
    eps: Fraction
    omega_high: tuple[JointPoint, ...]
    omega_low: tuple[JointPoint, ...]
    omega_ell: dict[int, tuple[JointPoint, ...]] = field(default_factory=dict)

    def all_points(self):
        yield from self.omega_high
        yield from self.omega_low
        for ell in sorted(self.omega_ell):
            yield from self.omega_ell[ell]


def schedule_epsilon(schedule: EpsSchedule, lam: Fraction) -> Fraction:
    """Rational width eps(lambda), clamped into [1/lambda, 1].

    Irrational schedule values are rounded to a 1e-9 grid; the clamp
    restores the wavelength floor if rounding undershoots it.
    """
    e = schedule.eval(lam)
    if not isinstance(e, Fraction):
        e = Fraction(round(float(e) * EPS_DENOMINATOR), EPS_DENOMINATOR)
    return min(max(e, 1 / lam), Fraction(1))


def _ell_max(lam: Fraction) -> int:
    # largest l with 2^l <= lambda, never below the smallest shell index
    ell = 2
    while 2 ** (ell + 1) <= lam:
        ell += 1
    return ell


def _classify(nu_q4: int, lam2_4: Fraction, ell_cap: int) -> int:
    """Shell index for a point that is neither high nor low."""
    ell = 2
    while ell < ell_cap and nu_q4 * (4**ell) <= lam2_4:
        ell += 1
    return ell


def decompose(
    specX: ManifoldSpec,
    specY: ManifoldSpec,
    conv: SpectralConvention,
    lam,
    eps,
    threads: int = 1,
) -> AnnulusDecomposition:
    """Exact annulus partition of the joint spectrum of specX x specY.

    Work is sharded by X-line; shard results are concatenated in X order
    so the output is identical for every thread count.
    """
    lamf = Fraction(lam)
    epsf = Fraction(eps)
    if not (epsf <= 1 <= lamf):
        raise ValueError("need eps <= 1 <= lambda")
    if epsf < 1 / lamf:
        raise ValueError("eps is below the wavelength floor 1/lambda")
    _require_homogeneous(specX)
    _require_homogeneous(specY)

    hi = 4 * (lamf + epsf) ** 2
    lo = 4 * (lamf - epsf) ** 2
    cap4 = hi.numerator // hi.denominator
    xq4, xmult = _factor_lines_capped(specX, conv, cap4)
    yq4, ymult = _factor_lines_capped(specY, conv, cap4)
    yq4_list = yq4.tolist()
    ymult_list = ymult.tolist()

    lam2_4 = 4 * lamf * lamf
    ell_cap = _ell_max(lamf)

    def shard(rows):
        high, low, shells = [], [], {}
        for mq4, mm in rows:
            lo_y = lo - mq4
            hi_y = hi - mq4
            i = bisect_left(yq4_list, ceil(lo_y))
            j = bisect_right(yq4_list, floor(hi_y))
            for idx in range(i, j):
                nq4 = yq4_list[idx]
                pt = JointPoint(int(mq4), int(nq4), int(mm) * int(ymult_list[idx]))
                if 4 * nq4 >= lam2_4:
                    high.append(pt)
                elif nq4 <= 4:
                    low.append(pt)
                else:
                    shells.setdefault(_classify(nq4, lam2_4, ell_cap), []).append(pt)
        return high, low, shells

    rows = list(zip(xq4.tolist(), xmult.tolist()))
    if threads <= 1 or len(rows) < 2:
        parts = [shard(rows)]
    else:
        nshards = min(threads * 4, len(rows))
        chunks = [rows[k::nshards] for k in range(nshards)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(shard, chunks))

    high, low, shells = [], [], {}
    for h, l, s in parts:
        high.extend(h)
        low.extend(l)
        for ell, pts in s.items():
            shells.setdefault(ell, []).extend(pts)
    key = lambda p: (p.mu_q4, p.nu_q4)
    return AnnulusDecomposition(
        specX,
        specY,
        conv,
        lamf,
        epsf,
        tuple(sorted(high, key=key)),
        tuple(sorted(low, key=key)),
        {ell: tuple(sorted(pts, key=key)) for ell, pts in sorted(shells.items())},
    )


@dataclass(frozen=True)
class PartitionReport:
    c_high: float
    c_ell_max: float
    interval_ratio_max: float
    c_small_max: float
    partition_ok: bool


def _independent_totals(d: AnnulusDecomposition) -> tuple[int, int]:
    """Annulus point and multiplicity totals by a direct outer-sum scan."""
    hi = 4 * (d.lam + d.eps) ** 2
    lo = 4 * (d.lam - d.eps) ** 2
    cap4 = hi.numerator // hi.denominator
    xq4, xm = _factor_lines_capped(d.specX, d.conv, cap4)
    yq4, ym = _factor_lines_capped(d.specY, d.conv, cap4)
    s = np.add.outer(xq4.astype(np.int64), yq4.astype(np.int64))
    mask = (s >= ceil(lo)) & (s <= floor(hi))
    n_pairs = int(np.count_nonzero(mask))
    xm = xm.astype(object) if xm.dtype == object else xm.astype(np.int64)
    ym = ym.astype(object) if ym.dtype == object else ym.astype(np.int64)
    if (
        xm.dtype == object
        or ym.dtype == object
        or (len(xm) and len(ym) and float(max(xm)) * float(max(ym)) * max(n_pairs, 1) >= 2.0**62)
    ):
        prod = np.outer(xm.astype(object), ym.astype(object))
        total = int(sum(prod[mask].tolist()))
    else:
        total = int(np.outer(xm, ym)[mask].sum())
    return n_pairs, total


def verify_partition(d: AnnulusDecomposition) -> PartitionReport:
    """Closeness constants over the decomposition, with mu, nu >= 0 reps.

    c_high: max |sqrt(lam^2 - mu^2) - nu| / eps over the high region.
    c_ell_max: same quantity over shell l, scaled by 1 / (2^l eps).
    interval_ratio_max: observed mu-extent of shell l relative to
        lam 2^-2l, shells with 2^-l >= lam^-1/2 only.
    c_small_max: max |sqrt(lam^2 - nu^2) - mu| over the low region and
        the shells with 2^-l <= lam^-1/2.
    partition_ok: the region lists are pairwise disjoint, every listed
        point satisfies the exact annulus inequalities, and the point and
        multiplicity totals match an independent outer-sum scan of the
        full joint spectrum.
    """
    lamf = float(d.lam)
    epsf = float(d.eps)
    lam2 = lamf * lamf

    def vertical_gap(p: JointPoint) -> float:
        mu = sqrt(p.mu_q4) / 2.0
        nu = sqrt(p.nu_q4) / 2.0
        return abs(sqrt(max(lam2 - mu * mu, 0.0)) - nu)

    def horizontal_gap(p: JointPoint) -> float:
        mu = sqrt(p.mu_q4) / 2.0
        nu = sqrt(p.nu_q4) / 2.0
        return abs(sqrt(max(lam2 - nu * nu, 0.0)) - mu)

    c_high = max((vertical_gap(p) / epsf for p in d.omega_high), default=0.0)
    c_ell = 0.0
    ratio = 0.0
    c_small = max((horizontal_gap(p) for p in d.omega_low), default=0.0)
    for ell, pts in d.omega_ell.items():
        if not pts:
            continue
        scale = (2**ell) * epsf
        c_ell = max(c_ell, max(vertical_gap(p) for p in pts) / scale)
        big_shell = d.lam >= 4**ell  # 2^-l >= lam^-1/2, exact
        small_shell = d.lam <= 4**ell
        if big_shell:
            mus = [sqrt(p.mu_q4) / 2.0 for p in pts]
            extent = max(mus) - min(mus)
            ratio = max(ratio, extent / (lamf * 2.0 ** (-2 * ell)))
        if small_shell:
            c_small = max(c_small, max(horizontal_gap(p) for p in pts))

    hi = 4 * (d.lam + d.eps) ** 2
    lo = 4 * (d.lam - d.eps) ** 2
    lo_i, hi_i = ceil(lo), floor(hi)
    seen: set[tuple[int, int]] = set()
    ok = True
    total_mult = 0
    for p in d.all_points():
        k = (p.mu_q4, p.nu_q4)
        if k in seen or not (lo_i <= p.mu_q4 + p.nu_q4 <= hi_i):
            ok = False
        seen.add(k)
        total_mult += p.mult_pair
    n_pairs, total = _independent_totals(d)
    partition_ok = ok and len(seen) == n_pairs and total_mult == total
    return PartitionReport(c_high, c_ell, ratio, c_small, partition_ok)


@dataclass(frozen=True)
class RegionStats:
    points: dict[str, int]
    mult_sums: dict[str, int]
    total_points: int
    total_mult: int


def _region_items(d: AnnulusDecomposition):
    yield "high", d.omega_high
    yield "low", d.omega_low
    for ell in sorted(d.omega_ell):
        yield f"ell{ell}", d.omega_ell[ell]


def region_stats(d: AnnulusDecomposition) -> RegionStats:
    """Per-region point counts and multiplicity sums.

    The grand multiplicity total equals the product window count on
    [lambda - eps, lambda + eps]; tests assert that identity against the
    convolution-table route.
    """
    points = {}
    mults = {}
    for name, pts in _region_items(d):
        points[name] = len(pts)
        mults[name] = sum(p.mult_pair for p in pts)
    return RegionStats(points, mults, sum(points.values()), sum(mults.values()))


def annulus_window_total(d: AnnulusDecomposition) -> int:
    """Independent total via the product convolution table."""
    prod = Product((d.specX, d.specY))
    return window_count(prod, d.conv, Window.around(d.lam, d.eps))


def write_decomposition_csv(d: AnnulusDecomposition, path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mu_q4", "nu_q4", "mult", "region", "ell"])
        for p in d.omega_high:
            w.writerow([p.mu_q4, p.nu_q4, p.mult_pair, "high", ""])
        for p in d.omega_low:
            w.writerow([p.mu_q4, p.nu_q4, p.mult_pair, "low", ""])
        for ell in sorted(d.omega_ell):
            for p in d.omega_ell[ell]:
                w.writerow([p.mu_q4, p.nu_q4, p.mult_pair, "shell", ell])
