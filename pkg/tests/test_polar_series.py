import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from softrh.polar_series import (AnnulusSpec, CircleSeries, PolarizedSeries, dbar_w,
                                 divisibility_defect, restrict_circle, restrict_diagonal,
                                 rho_of_sigma, series_exp, sup_norm, weierstrass_divide)

N, K, H, SIG = 12, 12, 0.5, 0.2


def mono(terms, sigma=SIG):
    return PolarizedSeries.from_monomials(terms, N, K, H, sigma)


def random_zs(rng, jmax=3, nmax=3, decay=0.5, sigma=SIG):
    terms = {(j, n): complex(*rng.normal(size=2)) * decay ** (abs(j) + n)
             for j in range(-jmax, jmax + 1) for n in range(nmax + 1)}
    return PolarizedSeries.from_zs(terms, N, K, H, sigma)


seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


# rho(sigma)

def test_rho_examples():
    assert rho_of_sigma(0.75) == pytest.approx(0.5, abs=1e-15)
    assert rho_of_sigma(1e-9) == pytest.approx(1.0, abs=1e-8)
    ann = AnnulusSpec.from_sigma(0.3)
    assert ann.rho == rho_of_sigma(0.3)
    assert ann.outer == pytest.approx(1 / ann.rho)


def test_rho_identity_many():
    rng = np.random.default_rng(1)
    sig = rng.uniform(1e-6, 1 - 1e-6, 10_000)
    rho = np.array([rho_of_sigma(s) for s in sig])
    assert np.max(np.abs(1 / rho - rho - 2 * sig)) <= 1e-15
    assert np.all(np.diff(rho[np.argsort(sig)]) <= 0)


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 2.0])
def test_rho_domain(bad):
    with pytest.raises(ValueError):
        rho_of_sigma(bad)


# algebra

def test_multiply_unit_and_monomials():
    rng = np.random.default_rng(2)
    b = random_zs(rng)
    one = mono({(0, 0): 1.0})
    assert np.allclose((one * b).coeffs, b.coeffs, atol=1e-15)
    zw = mono({(1, 0): 1.0}) * mono({(0, 1): 1.0})
    assert np.allclose(zw.coeffs, mono({(1, 1): 1.0}).coeffs, atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_submultiplicative(seed):
    rng = np.random.default_rng(seed)
    a, b = random_zs(rng), random_zs(rng)
    lhs = sup_norm(a * b, SIG)
    assert lhs <= sup_norm(a, SIG) * sup_norm(b, SIG) * (1 + 1e-12)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_circle_restriction_is_homomorphism(seed):
    rng = np.random.default_rng(seed)
    a, b = random_zs(rng), random_zs(rng)
    lhs = restrict_circle(a * b)
    rhs = restrict_circle(a) * restrict_circle(b)
    assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) <= 1e-13


# dbar

def test_dbar_monomials():
    d = dbar_w(mono({(0, 2): 1.0}), 0.1)
    assert np.allclose(d.coeffs, mono({(0, 1): 2.0}).coeffs, atol=1e-14)
    assert np.all(dbar_w(mono({(3, 0): 1.0}), 0.1).coeffs == 0)
    assert d.sigma == 0.1


def test_dbar_scale_error():
    with pytest.raises(ValueError):
        dbar_w(mono({(0, 1): 1.0}), SIG)


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(min_value=0.3, max_value=0.9))
def test_cauchy_estimate_constant(seed, frac):
    rng = np.random.default_rng(seed)
    f = random_zs(rng, jmax=4, nmax=5, decay=0.7)
    s1 = frac * SIG
    ratio = sup_norm(dbar_w(f, s1), s1) / (sup_norm(f, SIG) / (SIG - s1))
    assert ratio <= 6.0 * 1.05


# restrictions

def test_restrict_diagonal_examples():
    a = mono({(1, 1): 1.0})
    z = 0.9 * np.exp(0.7j)
    assert restrict_diagonal(a, z) == pytest.approx(0.81, abs=1e-14)
    assert restrict_diagonal(mono({(0, 0): 1.0}), 1.1j) == pytest.approx(1.0)
    with pytest.warns(RuntimeWarning):
        restrict_diagonal(a, 0.3)


def test_restrict_circle_examples():
    c = restrict_circle(mono({(1, 1): 1.0}))
    assert c.coeff(0) == pytest.approx(1.0) and np.count_nonzero(np.round(c.coeffs, 14)) == 1
    c2 = restrict_circle(mono({(2, 0): 1.0}))
    assert c2.coeff(2) == 1.0 and np.count_nonzero(c2.coeffs) == 1


# Weierstrass division

def test_weierstrass_examples():
    one_minus_q = mono({(0, 0): 1.0, (1, 1): -1.0})
    assert np.allclose(weierstrass_divide(one_minus_q).coeffs, mono({(0, 0): 1.0}).coeffs, atol=1e-14)
    q_minus_one = mono({(0, 0): -1.0, (1, 1): 1.0})
    assert np.allclose(weierstrass_divide(q_minus_one).coeffs, mono({(0, 0): -1.0}).coeffs, atol=1e-14)
    g = mono({(1, 0): 1.0, (0, 1): 1.0})
    assert np.allclose(weierstrass_divide(one_minus_q * g).coeffs, g.coeffs, atol=1e-14)


def test_weierstrass_not_divisible():
    with pytest.raises(ValueError, match="not divisible"):
        weierstrass_divide(mono({(1, 0): 1.0}))


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_multiply_back(seed):
    rng = np.random.default_rng(seed)
    a = random_zs(rng).times_one_minus_q()
    assert divisibility_defect(a) == 0
    back = weierstrass_divide(a).times_one_minus_q()
    assert sup_norm(back - a, SIG / 2) <= 1e-12 * sup_norm(a, SIG)


# sup norm

def test_sup_norm_examples():
    assert sup_norm(mono({(0, 0): 3 - 4j}), SIG) == pytest.approx(5.0)
    s = 0.05
    z = PolarizedSeries.from_monomials({(1, 0): 1.0}, N, K, H, s)
    assert sup_norm(z, s) == pytest.approx(1 / rho_of_sigma(s), rel=1e-12)
    with pytest.raises(ValueError):
        sup_norm(z, 0.1)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_sup_norm_nesting(seed):
    a = random_zs(np.random.default_rng(seed))
    assert sup_norm(a, SIG / 2) <= sup_norm(a, SIG) * (1 + 1e-14)


# CircleSeries

def test_circle_basics():
    f = CircleSeries.from_dict({2: 1.0, 0: 3.0, -1: 1.0}, 8)
    assert f.coeff(0) == 3.0 and f.coeff(5) == 0
    z = np.exp(0.3j)
    assert f.evaluate(z) == pytest.approx(z ** 2 + 3 + 1 / z)
    assert f.at_infinity() == 3.0
    g = f.conj_on_circle()
    assert g.evaluate(z) == pytest.approx(np.conj(f.evaluate(z)))


def test_circle_inverse_log_exp():
    f = CircleSeries.from_dict({0: 2.0, -1: 0.5, 1: 0.3}, 32)
    inv = f.inverse()
    assert np.max(np.abs((f * inv - 1.0).coeffs)) < 1e-13
    g = f.log().exp()
    assert np.max(np.abs((g - f).coeffs)) < 1e-12


def test_series_exp_matches_numpy():
    f = CircleSeries.from_dict({-1: 0.4, 0: 0.1, 2: -0.2j}, 32)
    z = np.exp(1j * np.linspace(0, 6, 7))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        e = series_exp(f)
    assert np.allclose(e.evaluate(z), np.exp(f.evaluate(z)), atol=1e-13)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_text_round_trips(seed):
    rng = np.random.default_rng(seed)
    a = random_zs(rng)
    b = PolarizedSeries.from_text(a.to_text())
    assert np.array_equal(a.coeffs, b.coeffs) and (b.N, b.K, b.s_scale, b.sigma) == (a.N, a.K, a.s_scale, a.sigma)
    c = restrict_circle(a)
    d = CircleSeries.from_text(c.to_text())
    assert np.array_equal(c.coeffs, d.coeffs)
    assert PolarizedSeries.from_text(a.to_text()).to_text() == a.to_text()


def test_tail_mass_monitor():
    a = mono({(0, 0): 1.0})
    assert a.tail_mass() == 0.0
    b = PolarizedSeries.from_zs({(N, 0): 1.0, (0, 0): 1.0}, N, K, H, SIG)
    assert b.tail_mass() == pytest.approx(0.5)


def test_evaluate_matches_monomial_definition():
    rng = np.random.default_rng(5)
    terms = {(j, k): complex(*rng.normal(size=2)) for j in range(-2, 3) for k in range(0, 3)}
    a = mono(terms)
    z, w = 0.95 * np.exp(0.4j), 1.02 * np.exp(0.5j)
    direct = sum(c * z ** j * np.conj(w) ** k for (j, k), c in terms.items())
    assert a.evaluate(z, w)[0] == pytest.approx(direct, rel=1e-13)
