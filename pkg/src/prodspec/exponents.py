"""Exact exponent arithmetic for spectral cluster bounds.

The universal exponent

    alpha(q, d) = max(d(1/2 - 1/q) - 1/2, (d-1)/2 * (1/2 - 1/q))

is piecewise linear in 1/q with its kink at the critical exponent
q_crit(d) = 2(d+1)/(d-1).  Everything here is affine in 1/q, so q is
stored as the rational inv_q = 1/q with 0 encoding q = infinity, and all
results are exact Fractions.

Growth laws lambda^a (log lambda)^b track only the two exponents (a, b);
multiplicative constants are deliberately dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

__all__ = [
    "QExponent",
    "EpsSchedule",
    "GrowthLaw",
    "ScheduleReport",
    "alpha",
    "q_crit",
    "validate_schedule",
    "product_cluster_law",
    "sphere_product_exponent",
    "interpolated_delta",
]


@dataclass(frozen=True, order=True)
class QExponent:
    """Lebesgue exponent q >= 2, stored as inv_q = 1/q; inv_q = 0 means q = inf."""

    inv_q: Fraction

    def __post_init__(self):
        object.__setattr__(self, "inv_q", Fraction(self.inv_q))
        if not (0 <= self.inv_q <= Fraction(1, 2)):
            raise ValueError(f"1/q = {self.inv_q} outside [0, 1/2]")

    @classmethod
    def from_q(cls, q) -> "QExponent":
        """Build from q itself; accepts int, Fraction, float('inf'), or 'inf'."""
        if q == math.inf or q == "inf":
            return cls(Fraction(0))
        return cls(1 / Fraction(q))

    @property
    def q(self):
        """q as a Fraction, or math.inf."""
        return math.inf if self.inv_q == 0 else 1 / self.inv_q

    @property
    def is_infinite(self) -> bool:
        return self.inv_q == 0

    def __str__(self) -> str:
        return "inf" if self.is_infinite else str(self.q)


def _as_qexp(q) -> QExponent:
    if isinstance(q, QExponent):
        return q
    return QExponent.from_q(q)


def alpha(q, d: int) -> Fraction:
    """Universal cluster exponent max(d s - 1/2, (d-1)/2 s), s = 1/2 - 1/q.

    Exact rational in 1/q; the two branches meet at q = q_crit(d).
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    s = Fraction(1, 2) - _as_qexp(q).inv_q
    return max(d * s - Fraction(1, 2), Fraction(d - 1, 2) * s)


def q_crit(d: int):
    """Critical exponent 2(d+1)/(d-1).

    For d = 1 the formula has a pole; by convention math.inf is returned
    (the d = 1 small-q branch is identically the larger one, so the kink
    sits at q = infinity).
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if d == 1:
        return math.inf
    return Fraction(2 * (d + 1), d - 1)


# ---------------------------------------------------------------------------
# epsilon schedules

_POWER, _LOG, _UNIT = "power", "log", "unit"


@dataclass(frozen=True)
class EpsSchedule:
    """A width schedule epsilon(lambda): lambda^-delta, (log lambda)^-delta, or 1.

    Admissible schedules keep t * eps(t) non-decreasing (power laws need
    delta <= 1 for that); construction only requires delta > 0 so that
    validate_schedule can exhibit the failure of an inadmissible one.
    """

    kind: str
    delta: Fraction = Fraction(0)

    def __post_init__(self):
        if self.kind not in (_POWER, _LOG, _UNIT):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        object.__setattr__(self, "delta", Fraction(self.delta))
        if self.kind != _UNIT and self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.kind == _UNIT and self.delta != 0:
            raise ValueError("unit schedule takes no exponent")

    @classmethod
    def power(cls, delta) -> "EpsSchedule":
        return cls(_POWER, Fraction(delta))

    @classmethod
    def log_power(cls, delta) -> "EpsSchedule":
        return cls(_LOG, Fraction(delta))

    @classmethod
    def unit(cls) -> "EpsSchedule":
        return cls(_UNIT)

    @classmethod
    def parse(cls, text: str) -> "EpsSchedule":
        """Parse 'pow:<delta>', 'log:<delta>', or 'unit'."""
        if text == "unit":
            return cls.unit()
        head, sep, tail = text.partition(":")
        if sep and head in ("pow", "log"):
            try:
                delta = Fraction(tail)
            except (ValueError, ZeroDivisionError) as exc:
                raise ValueError(f"bad schedule exponent {tail!r}") from exc
            return cls.power(delta) if head == "pow" else cls.log_power(delta)
        raise ValueError(f"bad schedule {text!r} (want pow:d, log:d, or unit)")

    def eval(self, lam: float) -> float:
        """epsilon(lambda) as a float; lambda must exceed 1 for log schedules."""
        if self.kind == _UNIT:
            return 1.0
        if self.kind == _POWER:
            return float(lam) ** (-float(self.delta))
        if lam <= 1.0:
            raise ValueError("log schedule needs lambda > 1")
        return math.log(lam) ** (-float(self.delta))

    def __str__(self) -> str:
        if self.kind == _UNIT:
            return "unit"
        tag = "pow" if self.kind == _POWER else "log"
        return f"{tag}:{self.delta}"


@dataclass(frozen=True)
class ScheduleReport:
    ok: bool
    worst_violation: float


def validate_schedule(s: EpsSchedule, lam_grid) -> ScheduleReport:
    """Check eps non-increasing and t*eps(t) non-decreasing on a grid.

    worst_violation is the largest relative ratio by which either
    monotonicity fails between consecutive grid points (0 when clean).
    A tiny tolerance absorbs float rounding in the exactly-constant case.
    """
    grid = [float(t) for t in lam_grid]
    if not grid:
        raise ValueError("empty grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly increasing")
    if grid[0] < math.e:
        raise ValueError("grid must start at or above e")
    worst = 0.0
    prev_t = grid[0]
    prev_e = s.eval(prev_t)
    for t in grid[1:]:
        e = s.eval(t)
        if e > prev_e:
            worst = max(worst, e / prev_e - 1.0)
        if t * e < prev_t * prev_e:
            worst = max(worst, (prev_t * prev_e) / (t * e) - 1.0)
        prev_t, prev_e = t, e
    return ScheduleReport(ok=worst <= 1e-12, worst_violation=worst)


# ---------------------------------------------------------------------------
# growth laws

@dataclass(frozen=True, order=True)
class GrowthLaw:
    """lambda^power (log lambda)^log_power, constants dropped.

    Ordering is lexicographic in (power, log_power), matching eventual
    domination as lambda grows.
    """

    power: Fraction
    log_power: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "power", Fraction(self.power))
        object.__setattr__(self, "log_power", Fraction(self.log_power))

    def __mul__(self, other: "GrowthLaw") -> "GrowthLaw":
        return GrowthLaw(self.power + other.power, self.log_power + other.log_power)

    def eval(self, lam: float) -> float:
        v = float(lam) ** float(self.power)
        if self.log_power:
            v *= math.log(lam) ** float(self.log_power)
        return v

    def __str__(self) -> str:
        s = f"lam^{self.power}"
        if self.log_power:
            s += f" log^{self.log_power}"
        return s


def _sqrt_schedule_law(s: EpsSchedule) -> GrowthLaw:
    """Growth law of sqrt(eps(lambda))."""
    if s.kind == _POWER:
        return GrowthLaw(-s.delta / 2)
    if s.kind == _LOG:
        return GrowthLaw(Fraction(0), -s.delta / 2)
    return GrowthLaw(Fraction(0))


def product_cluster_law(B: GrowthLaw, s: EpsSchedule, q, d_X: int) -> GrowthLaw:
    """Growth law of sqrt(eps) * B * lambda^(alpha(q, d_X) + 1/2).

    This is the cluster bound shape on a product whose second factor has
    eigenvalue counts governed by B with window schedule eps.
    """
    lam_part = GrowthLaw(alpha(q, d_X) + Fraction(1, 2))
    return B * lam_part * _sqrt_schedule_law(s)


def sphere_product_exponent(q, dims) -> Fraction:
    """Sum of alpha(q, d_i) over the factor dimensions.

    For q at or above every factor's critical exponent this collapses to
    (sum d_i)(1/2 - 1/q) - len(dims)/2, strictly below alpha(q, sum d_i).
    """
    dims = list(dims)
    if not dims:
        raise ValueError("dims must be nonempty")
    return sum((alpha(q, d) for d in dims), Fraction(0))


def interpolated_delta(q, d: int, q_hi, hi_exponent) -> Fraction:
    """Improvement over the interpolated bound between q_crit(d) and q_hi.

    Linear interpolation in 1/q between (1/q_crit(d), alpha(q_crit(d), d))
    and (1/q_hi, hi_exponent) gives a bound for intermediate q; the return
    value is alpha(q, d) minus that bound.  Positive whenever
    hi_exponent < alpha(q_hi, d) and q lies strictly between the anchors;
    zero at the left anchor by construction.  q may equal either endpoint.
    """
    qe = _as_qexp(q)
    qh = _as_qexp(q_hi)
    qc = q_crit(d)
    if qc == math.inf:
        raise ValueError("d = 1 has no finite critical exponent to anchor at")
    x_lo = Fraction(1) / qc          # 1/q at the critical anchor (largest x)
    x_hi = qh.inv_q                  # 1/q at the high anchor (smallest x)
    x = qe.inv_q
    if not (x_hi <= x <= x_lo):
        raise ValueError(f"q = {qe} outside [{qc}, {qh}]")
    if x_hi == x_lo:
        raise ValueError("q_hi must differ from q_crit(d)")
    a_lo = alpha(qc, d)
    t = (x_lo - x) / (x_lo - x_hi)
    interp = a_lo + t * (Fraction(hi_exponent) - a_lo)
    return alpha(qe, d) - interp
