import math
from math import exp, inf, lgamma, sqrt

import numpy as np
import pytest
from scipy.special import eval_legendre

from prodspec.harmonics import (
    HarmonicFamily,
    highest_weight,
    lq_norm,
    multiplier_decay,
    multiplier_value,
    quadrature_rule,
    fit_growth,
    tensor_growth,
    zonal,
    zonal_values,
)
from prodspec.spectra import sphere_harmonic_dim
from prodspec.weyl import sphere_surface


def _half_beta(p: float, d: int) -> float:
    return 0.5 * exp(lgamma(p + 1.0) + lgamma(0.5 * (d - 1)) - lgamma(p + 0.5 * (d + 1)))


def _hw_norm_exact(d: int, k: int, q: float) -> float:
    area = sphere_surface(2) * sphere_surface(d - 1)
    return (area * _half_beta(0.5 * q * k, d)) ** (1.0 / q) / sqrt(area * _half_beta(k, d))


# ---------------------------------------------------------------------------
# families and zonal evaluation

def test_family_validation():
    with pytest.raises(ValueError):
        HarmonicFamily("radial", 2, 1)
    with pytest.raises(ValueError):
        HarmonicFamily("zonal", 1, 1)
    with pytest.raises(ValueError):
        HarmonicFamily("zonal", 2, -1)
    assert zonal(2, 5).lam == 5.5
    assert highest_weight(4, 3).lam == 4.5


def test_zonal_pole_value_is_kernel_amplitude():
    got = zonal_values(2, 3, [0.0])[0]
    assert got == pytest.approx(math.sqrt(7.0 / (4.0 * math.pi)), rel=1e-13)
    got5 = zonal_values(5, 2, [0.0])[0]
    want5 = math.sqrt(sphere_harmonic_dim(5, 2) / sphere_surface(6))
    assert got5 == pytest.approx(want5, rel=1e-13)


def test_zonal_on_s2_is_legendre():
    theta = np.linspace(0.1, 3.0, 9)
    amp = math.sqrt(7.0 / (4.0 * math.pi))
    want = amp * eval_legendre(3, np.cos(theta))
    assert np.max(np.abs(zonal_values(2, 3, theta) - want)) < 1e-14


def test_zonal_parity():
    theta = np.linspace(0.0, math.pi, 33)
    for k in (2, 5):
        a = zonal_values(3, k, theta)
        b = zonal_values(3, k, math.pi - theta)
        assert np.allclose(b, (-1.0) ** k * a, atol=1e-12)


def test_zonal_bounded_by_pole():
    theta = np.linspace(0.0, math.pi, 2001)
    for d, k in [(2, 10), (3, 7), (6, 4)]:
        vals = np.abs(zonal_values(d, k, theta))
        assert np.max(vals) <= vals[0] + 1e-12


# ---------------------------------------------------------------------------
# quadrature

def test_rules_are_bucketed_and_cached():
    assert quadrature_rule(2, 10) is quadrature_rule(2, 100)
    assert quadrature_rule(2, 10).degree == 127
    assert quadrature_rule(2, 200) is not quadrature_rule(2, 10)


def test_rule_moments_match_gamma():
    for d in (2, 3, 4, 5):
        rule = quadrature_rule(d, 20)
        x = rule.cos_nodes
        for j in (0, 1, 3):
            got = rule.integrate(x ** (2 * j))
            want = math.gamma(j + 0.5) * math.gamma(0.5 * d) / math.gamma(j + 0.5 + 0.5 * d)
            assert got == pytest.approx(want, rel=1e-13)


def test_rule_nodes_consistent():
    rule = quadrature_rule(3, 40)
    assert np.allclose(np.cos(rule.theta), rule.cos_nodes, atol=1e-14)
    with pytest.raises(ValueError):
        quadrature_rule(1, 10)


# ---------------------------------------------------------------------------
# norms

@pytest.mark.parametrize("kind", ["zonal", "highest"])
@pytest.mark.parametrize("d,k", [(2, 4), (3, 7), (5, 3)])
def test_l2_normalization(kind, d, k):
    assert lq_norm(HarmonicFamily(kind, d, k), 2) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("d,k,q", [(2, 6, 4), (3, 5, 6), (4, 8, 10)])
def test_highest_weight_norm_matches_gamma_form(d, k, q):
    assert lq_norm(highest_weight(d, k), q) == pytest.approx(_hw_norm_exact(d, k, q), rel=1e-12)


def test_highest_weight_sup():
    for d, k in [(2, 6), (3, 5)]:
        area = sphere_surface(2) * sphere_surface(d - 1)
        want = 1.0 / sqrt(area * _half_beta(k, d))
        assert lq_norm(highest_weight(d, k), inf) == pytest.approx(want, rel=1e-9)


def test_zonal_sup_attained_at_pole():
    for d, k in [(2, 5), (3, 4)]:
        got = lq_norm(zonal(d, k), inf)
        assert got == pytest.approx(zonal_values(d, k, [0.0])[0], rel=1e-12)


def test_lq_norm_argument_checks():
    with pytest.raises(ValueError):
        lq_norm(zonal(2, 3), 1.5)
    small = quadrature_rule(2, 10)
    with pytest.raises(ValueError):
        lq_norm(zonal(2, 200), 4, rule=small)


def test_volume_normalized_norms_increase_with_q():
    qs = [2.0, 4.0, 6.0, 10.0]
    for fam, vol in [(zonal(2, 8), sphere_surface(3)), (highest_weight(3, 6), sphere_surface(4))]:
        vals = [lq_norm(fam, q) * vol ** (-1.0 / q) for q in qs]
        vals.append(lq_norm(fam, inf))
        assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------------------
# growth fits

KS = sorted(set(int(round(x)) for x in np.geomspace(10, 400, 12)))


def test_zonal_sup_growth_is_half():
    # sup equals sqrt(2 lam / 4 pi) on S^2, an exact power of lambda
    fit = fit_growth("zonal", 2, inf, KS)
    assert fit.slope == pytest.approx(0.5, abs=1e-9)


def test_growth_slopes_near_cluster_exponents():
    assert fit_growth("highest", 2, 10, KS).slope == pytest.approx(0.2, abs=0.02)
    assert fit_growth("zonal", 2, 10, KS).slope == pytest.approx(0.3, abs=0.01)


def test_growth_range_checks():
    with pytest.raises(ValueError):
        fit_growth("zonal", 2, 4, [10, 20, 40])
    with pytest.raises(ValueError):
        fit_growth("zonal", 2, 4, [10, 20, 40, 80])
    with pytest.raises(ValueError):
        fit_growth("zonal", 2, 4, [0, 5, 50, 500])


def test_tensor_growth_adds_factor_exponents():
    fit = tensor_growth([2, 2], ["zonal", "zonal"], inf, KS)
    assert fit.slope == pytest.approx(1.0, abs=1e-9)


def test_tensor_growth_with_fixed_factor():
    fit = tensor_growth([2, 2], ["zonal", "zonal"], inf, KS, fixed_degrees=[None, 5])
    assert fit.slope == pytest.approx(0.5, abs=0.05)
    with pytest.raises(ValueError):
        tensor_growth([2, 2], ["zonal"], inf, KS)


# ---------------------------------------------------------------------------
# multiplier decay

def test_multiplier_value_at_zero():
    got = multiplier_value(1, 0.0)
    assert got.real == pytest.approx(4.0 / 3.0, rel=1e-12)
    assert abs(got.imag) < 1e-14


def test_multiplier_closed_form_delta1():
    for t in (2.0, 5.0, 17.0):
        want = 4.0 * (math.sin(t) - t * math.cos(t)) / t**3
        got = multiplier_value(1, t)
        assert got.real == pytest.approx(want, abs=1e-12)
        assert abs(got.imag) < 1e-14


def test_multiplier_even_in_t():
    for t in (3.0, 11.5):
        assert multiplier_value(2, t) == pytest.approx(multiplier_value(2, -t), abs=1e-14)


def test_multiplier_decay_report():
    rep = multiplier_decay(1, np.geomspace(10.0, 1000.0, 60))
    assert rep.threshold == pytest.approx(-1.9)
    assert rep.ok and not rep.quad_fail
    assert rep.fit.slope == pytest.approx(-2.0, abs=0.1)
    closed = 4.0 * (np.sin(rep.t) - rep.t * np.cos(rep.t)) / rep.t**3
    assert np.max(np.abs(rep.values - closed)) < 1e-12


def test_multiplier_decay_handles_zero_and_checks_grid():
    grid = np.concatenate([[0.0], np.geomspace(1.0, 100.0, 40)])
    rep = multiplier_decay(2, grid)
    assert rep.values[0] == pytest.approx(16.0 / 15.0, rel=1e-10)
    with pytest.raises(ValueError):
        multiplier_decay(1, [1.0, 2e4])
    with pytest.raises(ValueError):
        multiplier_decay(0, [1.0, 10.0])
