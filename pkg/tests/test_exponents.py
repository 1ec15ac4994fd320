import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prodspec.exponents import (
    EpsSchedule,
    GrowthLaw,
    QExponent,
    alpha,
    interpolated_delta,
    product_cluster_law,
    q_crit,
    sphere_product_exponent,
    validate_schedule,
)


# ---------------------------------------------------------------------------
# alpha and q_crit

def test_alpha_frozen_values():
    assert alpha(QExponent.from_q(6), 2) == Fraction(1, 6)
    assert alpha(QExponent.from_q(4), 3) == Fraction(1, 4)
    assert alpha(QExponent.from_q(8), 3) == Fraction(5, 8)
    assert alpha(QExponent.from_q(10), 2) == Fraction(3, 10)
    assert alpha(QExponent.from_q(math.inf), 2) == Fraction(1, 2)
    assert alpha(QExponent.from_q(math.inf), 5) == 2
    assert alpha(QExponent.from_q(2), 9) == 0


def test_q_crit_values():
    assert q_crit(2) == 6
    assert q_crit(3) == 4
    assert q_crit(5) == 3
    assert q_crit(1) == math.inf


@pytest.mark.parametrize("d", range(2, 21))
def test_branches_cross_exactly_at_critical(d):
    qc = q_crit(d)
    s = Fraction(1, 2) - 1 / qc
    assert d * s - Fraction(1, 2) == Fraction(d - 1, 2) * s
    assert alpha(QExponent.from_q(qc), d) == d * s - Fraction(1, 2)


def test_alpha_accepts_plain_rationals():
    assert alpha(Fraction(10), 2) == Fraction(3, 10)
    assert alpha(10, 2) == Fraction(3, 10)


@given(
    q=st.fractions(min_value=Fraction(201, 100), max_value=400),
    d1=st.integers(min_value=1, max_value=12),
    d2=st.integers(min_value=1, max_value=12),
)
@settings(max_examples=120, deadline=None)
def test_alpha_strictly_superadditive(q, d1, d2):
    # exact rational comparison; q > 2 keeps the gap strict
    assert alpha(q, d1) + alpha(q, d2) < alpha(q, d1 + d2)


@given(d=st.integers(min_value=2, max_value=15))
@settings(max_examples=30, deadline=None)
def test_alpha_infinite_q_matches_upper_branch(d):
    assert alpha(QExponent.from_q(math.inf), d) == Fraction(d - 1, 2)


def test_qexponent_roundtrip_and_order():
    q = QExponent.from_q(Fraction(7, 2))
    assert q.q == Fraction(7, 2)
    assert not q.is_infinite
    assert QExponent.from_q("inf").is_infinite
    assert QExponent.from_q(math.inf).inv_q == 0
    # ordering follows 1/q, so larger q sorts first
    assert QExponent.from_q(10) < QExponent.from_q(4)


def test_qexponent_rejects_sub_l2():
    with pytest.raises(ValueError):
        QExponent.from_q(Fraction(3, 2))


# ---------------------------------------------------------------------------
# schedules

def test_schedule_parse_and_str_roundtrip():
    for text in ["pow:1", "pow:1/2", "log:1", "log:3/2", "unit"]:
        assert str(EpsSchedule.parse(text)) == text
    with pytest.raises(ValueError):
        EpsSchedule.parse("pow:0")
    with pytest.raises(ValueError):
        EpsSchedule.parse("exp:1")


def test_schedule_eval():
    assert EpsSchedule.unit().eval(37.0) == 1.0
    assert EpsSchedule.power(1).eval(50.0) == pytest.approx(0.02)
    assert EpsSchedule.power(Fraction(1, 2)).eval(100.0) == pytest.approx(0.1)
    assert EpsSchedule.log_power(1).eval(math.e) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        EpsSchedule.log_power(1).eval(1.0)


def test_admissible_schedules_validate():
    import numpy as np

    grid = np.geomspace(math.e, 1e4, 200)
    for s in [EpsSchedule.power(1), EpsSchedule.power(Fraction(1, 2)),
              EpsSchedule.log_power(1), EpsSchedule.unit()]:
        rep = validate_schedule(s, grid)
        assert rep.ok, (str(s), rep.worst_violation)


def test_super_linear_power_schedule_fails():
    import numpy as np

    # violations are reported per consecutive pair, so magnitude depends
    # on grid spacing; the two-point grid exposes the full drop
    rep = validate_schedule(EpsSchedule.power(2), np.geomspace(math.e, 1e3, 50))
    assert not rep.ok and rep.worst_violation > 0.05
    rep2 = validate_schedule(EpsSchedule.power(2), [math.e, 1e3])
    assert rep2.worst_violation > 100


def test_log_squared_dips_between_e_and_e_squared():
    import numpy as np

    # t/(log t)^2 decreases on [e, e^2]; a fine grid must see it, a grid
    # skipping that stretch genuinely satisfies both monotonicities
    fine = validate_schedule(EpsSchedule.log_power(2), np.geomspace(math.e, 1e4, 400))
    assert not fine.ok and fine.worst_violation > 0
    spanning = validate_schedule(EpsSchedule.log_power(2), [math.e, math.e**2, 1e4])
    assert not spanning.ok and spanning.worst_violation > 0.3
    coarse = validate_schedule(EpsSchedule.log_power(2), [math.e, 100.0, 1e4])
    assert coarse.ok


def test_validate_schedule_grid_preconditions():
    with pytest.raises(ValueError):
        validate_schedule(EpsSchedule.unit(), [2.0, 3.0])  # starts below e
    with pytest.raises(ValueError):
        validate_schedule(EpsSchedule.unit(), [3.0, 3.0])


# ---------------------------------------------------------------------------
# growth laws

def test_growth_law_algebra():
    a = GrowthLaw(Fraction(3, 2))
    b = GrowthLaw(Fraction(1, 2), Fraction(-1))
    ab = a * b
    assert ab == GrowthLaw(2, -1)
    assert ab.eval(100.0) == pytest.approx(100.0**2 / math.log(100.0))
    assert GrowthLaw(1) < GrowthLaw(2) and GrowthLaw(1, -1) < GrowthLaw(1)


def test_product_cluster_law_shapes():
    law = product_cluster_law(
        GrowthLaw(1), EpsSchedule.power(1), QExponent.from_q(math.inf), 2
    )
    assert law == GrowthLaw(Fraction(3, 2))
    law2 = product_cluster_law(
        GrowthLaw(1), EpsSchedule.log_power(1), QExponent.from_q(6), 2
    )
    assert law2 == GrowthLaw(Fraction(1) + Fraction(1, 6) + Fraction(1, 2), Fraction(-1, 2))


def test_sphere_product_exponent_below_joint_alpha():
    q = QExponent.from_q(math.inf)
    assert sphere_product_exponent(q, [2, 3]) == Fraction(3, 2)
    assert alpha(q, 5) - sphere_product_exponent(q, [2, 3]) == Fraction(1, 2)
    with pytest.raises(ValueError):
        sphere_product_exponent(q, [])


# ---------------------------------------------------------------------------
# interpolation gain

def test_interpolated_delta_hand_value():
    # d=7: anchors q_c=8/3 with alpha=3/8, and q_hi=12 with bound 23/12;
    # at q=8 the interpolation gives 95/56 against alpha=17/8
    assert interpolated_delta(8, 7, 12, Fraction(23, 12)) == Fraction(3, 7)


def test_interpolated_delta_endpoints():
    assert interpolated_delta(q_crit(7), 7, 12, Fraction(23, 12)) == 0
    assert interpolated_delta(12, 7, 12, Fraction(23, 12)) == alpha(12, 7) - Fraction(23, 12)


def test_interpolated_delta_domain():
    with pytest.raises(ValueError):
        interpolated_delta(2, 7, 12, Fraction(23, 12))  # below q_crit
    with pytest.raises(ValueError):
        interpolated_delta(20, 7, 12, Fraction(23, 12))  # above q_hi
    with pytest.raises(ValueError):
        interpolated_delta(3, 1, 12, Fraction(1, 2))  # d=1 has no anchor


@given(
    d=st.integers(min_value=2, max_value=9),
    x=st.fractions(min_value=0, max_value=1),
)
@settings(max_examples=60, deadline=None)
def test_interpolated_delta_nonnegative_for_true_alpha_anchor(d, x):
    # anchoring at the true alpha(q_hi) makes the gain the concavity gap
    # of the piecewise-linear alpha in 1/q, which is >= 0
    q_hi = Fraction(4) * q_crit(d)
    lo, hi = Fraction(1) / q_crit(d), Fraction(1, q_hi)
    inv_q = hi + x * (lo - hi)
    if inv_q == 0:
        q = QExponent.from_q(math.inf)
    else:
        q = QExponent.from_q(1 / inv_q)
    gain = interpolated_delta(q, d, q_hi, alpha(q_hi, d))
    assert gain >= 0
