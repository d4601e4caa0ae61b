import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from softrh.circle_ops import (SUBSPACES, harmonic_extension_polarized, herglotz_exterior,
                               herglotz_jump_solve, mean_on_circle, project,
                               smoothing_quotient_M, szego_split)
from softrh.polar_series import (CircleSeries, PolarizedSeries, restrict_circle, rho_of_sigma,
                                 sup_norm)

N, K, H, SIG = 16, 12, 0.5, 0.2
seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


def cs(d, n=N):
    return CircleSeries.from_dict(d, n)


def rand_circle(rng, n=N):
    return CircleSeries(rng.normal(size=2 * n + 1) + 1j * rng.normal(size=2 * n + 1), n)


def rand_polar(rng, jmax=4, nmax=4, decay=0.6):
    terms = {(j, k): complex(*rng.normal(size=2)) * decay ** (abs(j) + k)
             for j in range(-jmax, jmax + 1) for k in range(nmax + 1)}
    return PolarizedSeries.from_zs(terms, N, K, H, SIG)


def test_szego_split_examples():
    sp = szego_split(cs({2: 1, 0: 3, -1: 1}))
    assert np.array_equal(sp.plus.coeffs, cs({2: 1}).coeffs)
    assert np.array_equal(sp.minus.coeffs, cs({0: 3, -1: 1}).coeffs)
    sp = szego_split(cs({0: 5.0}))
    assert not np.any(sp.plus.coeffs) and sp.minus.coeff(0) == 5.0


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_split_reproduces_and_bound(seed):
    rng = np.random.default_rng(seed)
    a = rand_polar(rng)
    f = restrict_circle(a)
    sp = szego_split(f)
    assert np.array_equal((sp.plus + sp.minus).coeffs, f.coeffs)
    assert not np.any(sp.plus.coeffs[sp.plus.modes <= 0])
    assert not np.any(sp.minus.coeffs[sp.minus.modes >= 1])
    rho = rho_of_sigma(SIG)
    bound = 3 * sup_norm(a, SIG) / SIG
    assert sp.plus.sup_on_annulus(rho) <= bound
    assert sp.minus.sup_on_annulus(rho) <= bound


def test_project_examples():
    f = cs({2: 1, 0: 3, -1: 1})
    assert np.array_equal(project(f, "H2_minus").coeffs, cs({0: 3, -1: 1}).coeffs)
    assert not np.any(project(cs({0: 4.0}), "H2_minus_0").coeffs)
    with pytest.raises(ValueError):
        project(f, "H3")


def test_projector_algebra_100():
    rng = np.random.default_rng(7)
    for _ in range(100):
        f = rand_circle(rng)
        for s in SUBSPACES:
            p = project(f, s)
            assert np.array_equal(project(p, s).coeffs, p.coeffs)
        assert np.array_equal((project(f, "H2_0") + project(f, "H2_minus")).coeffs, f.coeffs)
        assert np.array_equal((project(f, "H2") + project(f, "H2_minus_0")).coeffs, f.coeffs)


def test_herglotz_examples():
    cos = cs({1: 0.5, -1: 0.5})
    assert np.allclose(herglotz_exterior(cos).coeffs, cs({-1: 1.0}).coeffs)
    assert herglotz_exterior(cs({0: 1.0})).coeff(0) == 1.0
    c = math.log(0.5)
    assert herglotz_exterior(cs({0: c})).coeff(0) == pytest.approx(c)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_herglotz_real_part(seed):
    f = rand_circle(np.random.default_rng(seed))
    g = 0.5 * (f + f.conj_on_circle())
    h = herglotz_exterior(g)
    assert np.max(np.abs(h.samples(4 * N).real - g.samples(4 * N).real)) <= 1e-12
    assert h.coeff(0).imag == 0.0
    assert not np.any(h.coeffs[h.modes >= 1])


def test_herglotz_non_hermitian_warns():
    with pytest.warns(RuntimeWarning):
        herglotz_exterior(cs({1: 1.0}))


def test_mean_on_circle():
    assert mean_on_circle(cs({0: 3, -1: 1})) == 3
    assert mean_on_circle(cs({1: 1.0})) == 0


def polar_mono(terms):
    return PolarizedSeries.from_monomials(terms, N, K, H, SIG)


def test_harmonic_extension_examples():
    u = harmonic_extension_polarized(polar_mono({(1, 1): 1.0}))
    assert np.allclose(u.coeffs, polar_mono({(0, 0): 1.0}).coeffs, atol=1e-14)
    z, w = 0.95 * np.exp(0.3j), 1.05 * np.exp(0.1j)
    # |t| is about 0.4 here, so the binomial row needs more t-degree than K
    ext = harmonic_extension_polarized(PolarizedSeries.from_monomials({(2, 0): 1.0}, N, 48, H, SIG))
    assert ext.evaluate(z, w)[0] == pytest.approx(1 / np.conj(w) ** 2, rel=1e-12)
    # the Poisson extension of Re z^2 to the exterior disk is Re z^-2
    zz = 1.1 * np.exp(0.7j)
    re_z2 = PolarizedSeries.from_monomials({(2, 0): 0.5, (0, 2): 0.5}, N, 48, H, SIG)
    val = harmonic_extension_polarized(re_z2).evaluate(zz, zz)[0]
    assert val == pytest.approx((zz ** -2).real, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_harmonic_extension_fixed_point_and_trace(seed):
    a = rand_polar(np.random.default_rng(seed))
    u = harmonic_extension_polarized(a)
    assert np.array_equal(restrict_circle(u).coeffs, restrict_circle(a).coeffs)
    uu = harmonic_extension_polarized(u)
    assert np.max(np.abs(uu.coeffs - u.coeffs)) <= 1e-14 * max(1.0, np.max(np.abs(u.coeffs)))


def test_M_examples():
    m = smoothing_quotient_M(polar_mono({(1, 1): 1.0}))
    assert np.allclose(m.coeffs, polar_mono({(0, 0): -1.0}).coeffs, atol=1e-14)
    hol = polar_mono({(0, 0): 2.0, (-1, 0): 1.0, (-3, 0): 0.5j})
    assert np.max(np.abs(smoothing_quotient_M(hol).coeffs)) == 0


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(min_value=0.3, max_value=0.9))
def test_M_bound_and_multiply_back(seed, frac):
    a = rand_polar(np.random.default_rng(seed))
    m = smoothing_quotient_M(a)
    resid = m.times_one_minus_q() - (a - harmonic_extension_polarized(a))
    assert sup_norm(resid, SIG / 2) <= 1e-12 * sup_norm(a, SIG)
    s1 = frac * SIG
    assert sup_norm(m.with_sigma(s1), s1) <= 42 * sup_norm(a, SIG) / (SIG * (SIG - s1))


def test_jump_solve_examples():
    zero = cs({})
    f = herglotz_jump_solve(cs({-1: 1, 0: 5, 2: 1}), zero, zero, 0.0)
    assert np.allclose(f.coeffs, cs({-1: 1.0}).coeffs)
    f = herglotz_jump_solve(zero, zero, zero, 7.0)
    assert np.allclose(f.coeffs, cs({0: 7.0}).coeffs)
    with pytest.raises(ValueError):
        herglotz_jump_solve(zero, cs({-1: 1.0}), zero)


def test_jump_solve_membership_100():
    rng = np.random.default_rng(11)
    n = 32
    worst = 0.0
    for _ in range(100):
        u = CircleSeries.from_dict({d: 0.3 * complex(*rng.normal(size=2)) for d in range(3)}, n)
        v = CircleSeries.from_dict({d: 0.3 * complex(*rng.normal(size=2)) for d in range(3)}, n)
        G = CircleSeries.from_dict({d: complex(*rng.normal(size=2)) for d in range(-3, 4)}, n)
        f = herglotz_jump_solve(G, u, v, complex(*rng.normal(size=2)))
        jump = (u + v.conj_on_circle()).exp() * f - G
        inner = (jump.modes < 0) & (jump.modes > -n + 10)
        worst = max(worst, np.max(np.abs(f.coeffs[f.modes > 0])), np.max(np.abs(jump.coeffs[inner])))
    assert worst <= 1e-10
