"""Hardy projections, Herglotz transform, harmonic extension and M.

All operators act on coefficients, so projections are exact by construction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .polar_series import (CircleSeries, PolarizedSeries, lift_winv, lift_z,
                           restrict_circle, series_exp, weierstrass_divide)

SUBSPACES = ("H2", "H2_0", "H2_minus", "H2_minus_0")


@dataclass(frozen=True)
class HardySplit:
    plus: CircleSeries   # modes d >= 1
    minus: CircleSeries  # modes d <= 0


def _mask(f: CircleSeries, keep) -> CircleSeries:
    c = np.where(keep(f.modes), f.coeffs, 0)
    return CircleSeries(c, f.N, f.annulus)


def szego_split(f: CircleSeries) -> HardySplit:
    return HardySplit(_mask(f, lambda d: d >= 1), _mask(f, lambda d: d <= 0))


def project(f: CircleSeries, subspace: str) -> CircleSeries:
    """Orthogonal projection onto H2 (d>=0), H2_0 (d>=1), H2_minus (d<=0) or H2_minus_0 (d<=-1)."""
    keep = {
        "H2": lambda d: d >= 0,
        "H2_0": lambda d: d >= 1,
        "H2_minus": lambda d: d <= 0,
        "H2_minus_0": lambda d: d <= -1,
    }
    try:
        return _mask(f, keep[subspace])
    except KeyError:
        raise ValueError(f"unknown subspace {subspace!r}; expected one of {SUBSPACES}") from None


def mean_on_circle(f: CircleSeries) -> complex:
    return f.coeff(0)


def herglotz_exterior(f: CircleSeries, tol: float = 1e-12) -> CircleSeries:
    """<f> + 2 P_{H2_minus_0}[f]: holomorphic off the disk, real part f on T."""
    if f.hermitian_defect() > tol * max(1.0, float(np.max(np.abs(f.coeffs)))):
        warnings.warn("herglotz_exterior on a non-Hermitian series", RuntimeWarning, stacklevel=2)
    out = 2.0 * project(f, "H2_minus_0")
    return out + mean_on_circle(f).real


def harmonic_extension_polarized(a: PolarizedSeries) -> PolarizedSeries:
    """(U f)(z, w) = f_plus(1/conj w) + f_minus(z) for f = a on T."""
    sp = szego_split(restrict_circle(a))
    return (lift_winv(sp.plus, a.K, a.s_scale, a.sigma)
            + lift_z(sp.minus, a.K, a.s_scale, a.sigma))


def smoothing_quotient_M(a: PolarizedSeries, tol: float = 1e-9) -> PolarizedSeries:
    """(a - U a) / (1 - z conj w)."""
    return weierstrass_divide(a - harmonic_extension_polarized(a), tol=tol)


def herglotz_jump_solve(G: CircleSeries, u: CircleSeries, v: CircleSeries,
                        C: complex = 0.0) -> CircleSeries:
    """f in H2_minus with e^(u + conj v) f - G in H2.

    u and v must carry modes d >= 0 only.
    """
    for name, s in (("u", u), ("v", v)):
        if np.any(s.coeffs[s.modes < 0] != 0):
            raise ValueError(f"{name} must have only modes d >= 0")
    e_mvbar = series_exp(-v.conj_on_circle())
    e_mu = series_exp(-u)
    return C * e_mvbar + e_mvbar * project(e_mu * G, "H2_minus_0")
