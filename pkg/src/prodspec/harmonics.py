"""Extremal spherical-harmonic families and their L^q growth.

Two families realize the two branches of the cluster exponent: zonal
harmonics (concentrating at poles, upper branch for large q) and
highest-weight harmonics (concentrating on the equator, lower branch).
Norms are computed by Gauss quadrature on the polar angle; growth
exponents come from log-log fits against lambda = k + (d-1)/2.

All L^q integrands of even integer q are polynomials in cos(theta), so
Gauss rules of sufficient degree evaluate them exactly; node sets are
bucketed to multiples of 512 and cached, since criterion-scale sweeps
revisit nearby degrees many times.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from math import acos, cos, exp, inf, lgamma, log, pi, sqrt

import numpy as np
from scipy.integrate import quad
from scipy.special import roots_gegenbauer, roots_legendre

from .fitting import ExponentFit, envelope_exponent, loglog_slope
from .spectra import sphere_harmonic_dim
from .weyl import sphere_surface

__all__ = [
    "HarmonicFamily",
    "QuadratureRule",
    "MultiplierReport",
    "zonal",
    "highest_weight",
    "quadrature_rule",
    "zonal_values",
    "lq_norm",
    "fit_growth",
    "tensor_growth",
    "multiplier_value",
    "multiplier_decay",
]

_BUCKET = 512
_RULE_CACHE: dict = {}
_RULE_LOCK = threading.Lock()


@dataclass(frozen=True)
class HarmonicFamily:
    """One extremal family on S^d at degree k, normalized to unit L^2."""

    kind: str  # "zonal" | "highest"
    d: int
    k: int

    def __post_init__(self):
        if self.kind not in ("zonal", "highest"):
            raise ValueError(f"unknown family kind {self.kind!r}")
        if self.d < 2 or self.k < 0:
            raise ValueError("need d >= 2 and k >= 0")

    @property
    def lam(self) -> float:
        return self.k + 0.5 * (self.d - 1)


def zonal(d: int, k: int) -> HarmonicFamily:
    return HarmonicFamily("zonal", d, k)


def highest_weight(d: int, k: int) -> HarmonicFamily:
    return HarmonicFamily("highest", d, k)


# ---------------------------------------------------------------------------
# quadrature on [0, pi] with weight sin^(d-1)

@dataclass(frozen=True)
class QuadratureRule:
    """Gauss nodes for integrating f(cos theta) sin^(d-1)(theta) d(theta).

    Exact for polynomials f of degree <= degree.  cos_nodes carries the
    raw Gauss abscissae so evaluators avoid the arccos/cos round trip.
    """

    d: int
    theta: np.ndarray
    weights: np.ndarray
    cos_nodes: np.ndarray
    degree: int

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


def _bucket(n: int) -> int:
    if n <= 64:
        return 64
    return ((n + _BUCKET - 1) // _BUCKET) * _BUCKET


def quadrature_rule(d: int, degree: int) -> QuadratureRule:
    """Cached rule exact for cos-polynomials up to the requested degree."""
    if d < 2:
        raise ValueError("need d >= 2")
    n = _bucket(degree // 2 + 1)
    key = (d, n)
    with _RULE_LOCK:
        hit = _RULE_CACHE.get(key)
    if hit is None:
        if d == 2:
            x, w = roots_legendre(n)
        else:
            # weight (1-x^2)^((d-2)/2) is Gegenbauer with alpha=(d-1)/2
            x, w = roots_gegenbauer(n, 0.5 * (d - 1))
        hit = QuadratureRule(d, np.arccos(x[::-1]), w[::-1], x[::-1], 2 * n - 1)
        with _RULE_LOCK:
            _RULE_CACHE.setdefault(key, hit)
    return hit


def _legendre(degree: int):
    """Plain Gauss-Legendre pair on [-1, 1], bucketed and cached."""
    return quadrature_rule(2, degree)


# ---------------------------------------------------------------------------
# evaluation

def _zonal_ratio(d: int, k: int, x: np.ndarray) -> np.ndarray:
    """C_k(x)/C_k(1) for the ultraspherical family of S^d; bounded by 1."""
    x = np.asarray(x, dtype=float)
    if k == 0:
        return np.ones_like(x)
    lam_g = 0.5 * (d - 1)
    prev = np.ones_like(x)
    cur = x.copy()
    for j in range(2, k + 1):
        a = 2.0 * (j + lam_g - 1.0) / (j + 2.0 * lam_g - 1.0)
        b = (j - 1.0) / (j + 2.0 * lam_g - 1.0)
        prev, cur = cur, a * x * cur - b * prev
    return cur


def _zonal_amplitude(d: int, k: int) -> float:
    return sqrt(sphere_harmonic_dim(d, k) / sphere_surface(d + 1))


def zonal_values(d: int, k: int, theta) -> np.ndarray:
    """L^2-normalized zonal harmonic sampled on a polar-angle grid.

    The value at theta=0 is sqrt(dim H_k / Vol), the reproducing-kernel
    identity that ties this module back to the dimension counts.
    """
    if d < 2 or k < 0:
        raise ValueError("need d >= 2 and k >= 0")
    theta = np.asarray(theta, dtype=float)
    return _zonal_amplitude(d, k) * _zonal_ratio(d, k, np.cos(theta))


# ---------------------------------------------------------------------------
# highest-weight reduction to a 1-D u-integral

def _hw_moment(p: float, d: int) -> float:
    """integral_0^(pi/2) sin^(2p+1) cos^(d-2) = (1/2) B(p+1, (d-1)/2).

    Computed as (1/2) integral_0^1 u^p (1-u)^((d-3)/2) du by Gauss
    quadrature; even-d cases substitute u = 1-s^2 to clear the
    half-integer power.  Exact for integer p within the rule degree.
    """
    if d % 2 == 0:
        # beta integral = int_-1^1 (1-s^2)^p |s|^(d-2) ds, even polynomial
        deg = int(2 * p) + d - 2
        rule = _legendre(deg)
        s = rule.cos_nodes
        beta_val = rule.integrate((1.0 - s * s) ** p * np.abs(s) ** (d - 2))
    else:
        deg = int(p) + (d - 3) // 2
        rule = _legendre(max(deg, 1))
        u = 0.5 * (rule.cos_nodes + 1.0)
        beta_val = 0.5 * rule.integrate(u**p * (1.0 - u) ** ((d - 3) // 2))
    return 0.5 * beta_val


def _hw_moment_exact(p: float, d: int) -> float:
    """(1/2) B(p+1, (d-1)/2); the lgamma oracle for _hw_moment."""
    return 0.5 * exp(lgamma(p + 1.0) + lgamma(0.5 * (d - 1)) - lgamma(p + 0.5 * (d + 1)))


def _hw_area(d: int) -> float:
    # |S^1| x |S^(d-2)| from the bipolar splitting of S^d
    return sphere_surface(2) * sphere_surface(d - 1)


# ---------------------------------------------------------------------------
# norms

def lq_norm(family: HarmonicFamily, q, rule: QuadratureRule | None = None) -> float:
    """(integral |f|^q dV)^(1/q) on S^d, or the sup for q = inf.

    Finite q reduces to one polar integral; a supplied rule must cover
    degree q*k + d + 10.  The sup is taken on a dense theta grid with
    local refinement (relative tolerance about 1e-6), though for these
    families it sits at a known point and the grid confirms it.
    """
    d, k = family.d, family.k
    if q == inf:
        return _sup_norm(family)
    qf = float(q)
    if qf < 2:
        raise ValueError("need q >= 2")
    needed = int(qf * k) + d + 10
    if rule is not None and rule.degree < needed:
        raise ValueError(f"rule degree {rule.degree} < required {needed}")

    if family.kind == "highest":
        area = _hw_area(d)
        norm2_sq = area * _hw_moment(k, d)
        val_q = area * _hw_moment(0.5 * qf * k, d)
        return val_q ** (1.0 / qf) / sqrt(norm2_sq)

    if rule is None:
        rule = quadrature_rule(d, needed)
    vals = np.abs(_zonal_amplitude(d, k) * _zonal_ratio(d, k, rule.cos_nodes))
    total = rule.integrate(vals**qf) * sphere_surface(d)
    return total ** (1.0 / qf)


def _sup_norm(family: HarmonicFamily) -> float:
    d, k = family.d, family.k
    if family.kind == "zonal":
        f = lambda th: np.abs(zonal_values(d, k, th))
    else:
        c = 1.0 / sqrt(_hw_area(d) * _hw_moment(k, d))
        f = lambda th: c * np.abs(np.sin(th)) ** k
    lo, hi = 0.0, pi
    best = 0.0
    for _ in range(7):
        grid = np.linspace(lo, hi, 257)
        vals = f(grid)
        i = int(np.argmax(vals))
        best = max(best, float(vals[i]))
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, len(grid) - 1)]
    return best


# ---------------------------------------------------------------------------
# growth fits

def _span_ok(k_range) -> list[int]:
    ks = sorted(set(int(k) for k in k_range))
    if len(ks) < 4 or ks[0] < 1:
        raise ValueError("need at least 4 positive degrees")
    if ks[-1] / ks[0] < 10**1.5 - 1e-9:
        raise ValueError("degree range must span at least 1.5 decades")
    return ks


def fit_growth(kind: str, d: int, q, k_range) -> ExponentFit:
    """Slope of log ||f_k||_q against log lambda over the degree range."""
    ks = _span_ok(k_range)
    lam = np.array([k + 0.5 * (d - 1) for k in ks])
    norms = np.array([lq_norm(HarmonicFamily(kind, d, k), q) for k in ks])
    return loglog_slope(lam, norms)


def tensor_growth(dims, kinds, q, k_range, fixed_degrees=None) -> ExponentFit:
    """Growth of a tensor product of factor families, all at shared degree k.

    L^q norms over a product measure factor exactly, so the product norm
    is the product of factor norms.  fixed_degrees pins chosen factors at
    a constant degree (None entries follow k); the abscissa is the joint
    frequency sqrt(sum lambda_i^2).
    """
    if len(dims) != len(kinds):
        raise ValueError("dims and kinds must align")
    if fixed_degrees is None:
        fixed_degrees = [None] * len(dims)
    ks = _span_ok(k_range)
    lam_joint = []
    norms = []
    for k in ks:
        lam2 = 0.0
        prod = 1.0
        for d, kind, fixed in zip(dims, kinds, fixed_degrees):
            kk = k if fixed is None else int(fixed)
            fam = HarmonicFamily(kind, d, kk)
            lam2 += fam.lam**2
            prod *= lq_norm(fam, q)
        lam_joint.append(sqrt(lam2))
        norms.append(prod)
    return loglog_slope(np.array(lam_joint), np.array(norms))


# ---------------------------------------------------------------------------
# Riesz multiplier decay

@dataclass(frozen=True)
class MultiplierReport:
    delta: float
    t: np.ndarray
    values: np.ndarray
    fit: ExponentFit
    threshold: float
    ok: bool
    quad_fail: bool


def multiplier_value(delta: float, t: float, n: int = 256) -> complex:
    """m_hat(t) = integral_(-1)^1 (1-tau^2)^delta e^(-i t tau) d tau.

    Direct complex Gauss evaluation without exploiting symmetry, so
    realness and evenness remain checkable facts rather than built-in.
    Accurate while n comfortably exceeds |t|/3; the decay sweep uses the
    oscillatory QUADPACK route instead.
    """
    rule = _legendre(2 * n - 1)
    tau = rule.cos_nodes
    vals = (1.0 - tau * tau) ** float(delta) * np.exp(-1j * float(t) * tau)
    return complex(np.dot(rule.weights, vals))


def multiplier_decay(delta, t_grid) -> MultiplierReport:
    """Envelope decay of |m_hat| on the grid, checked against -1-delta.

    Oscillatory integrals use the cos-weighted QUADPACK routine; any
    reported absolute error above 1e-8 of the value sets quad_fail.
    """
    deltaf = float(delta)
    if deltaf <= 0:
        raise ValueError("need delta > 0")
    t = np.asarray(sorted(float(x) for x in t_grid), dtype=float)
    if t.size and t[-1] > 1e4 + 1e-9:
        raise ValueError("grid must stay within t <= 1e4")
    vals = np.empty_like(t)
    quad_fail = False
    f = lambda u: (1.0 - u * u) ** deltaf
    for i, ti in enumerate(t):
        if ti < 1e-12:
            v, err = quad(f, -1.0, 1.0)
        else:
            v, err = quad(f, 0.0, 1.0, weight="cos", wvar=ti)
            v *= 2.0
            err *= 2.0
        vals[i] = v
        if err > 1e-8 * max(1.0, abs(v)):
            quad_fail = True
    pos = t > 0
    fit = envelope_exponent(t[pos], np.abs(vals[pos]))
    threshold = -1.0 - deltaf + 0.1
    return MultiplierReport(
        deltaf, t, vals, fit, threshold, bool(fit.slope <= threshold), quad_fail
    )
