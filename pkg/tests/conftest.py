import math
import warnings

import mpmath as mp
import numpy as np
import pytest

from softrh.expansion import Expansion
from softrh.potential import build_droplet, build_model


@pytest.fixture(autouse=True)
def _quiet_threshold_warnings():
    # kappa clamping below 25*M1 is expected at desk-scale m
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*validity threshold.*")
        warnings.filterwarnings("ignore", message=".*series exponential tail mass.*")
        warnings.filterwarnings("ignore", message=".*exceeds the order budget.*")
        yield


@pytest.fixture(scope="session")
def radial_geo():
    return build_droplet("radial_gaussian")


@pytest.fixture(scope="session")
def elliptic_geo():
    return build_droplet("elliptic", {"t": 0.2})


@pytest.fixture(scope="session")
def radial_model(radial_geo):
    return build_model(radial_geo, N=64, sigma0=0.2)


@pytest.fixture(scope="session")
def elliptic_model(elliptic_geo):
    return build_model(elliptic_geo, N=64)


@pytest.fixture(scope="session")
def radial_expansion(radial_model):
    return Expansion(radial_model)


@pytest.fixture(scope="session")
def elliptic_expansion(elliptic_model):
    return Expansion(elliptic_model)


def hermite_monic(m, t, z, dps=60):
    """Monic OP of degree m for Q = |z|^2 + t Re z^2 (closed form, Hermite)."""
    with mp.workdps(dps):
        v = mp.mpf(t) * -1 / (2 * m * (1 - mp.mpf(t) ** 2))
        sv = mp.sqrt(mp.mpc(v))
        out = []
        for zz in np.atleast_1d(z):
            P = sv ** m * mp.hermite(m, mp.mpc(zz) / (sv * mp.sqrt(2))) * mp.mpf(2) ** (-mp.mpf(m) / 2)
            out.append(complex(P))
        return np.array(out)


def hermite_F(geo, m, t, w, dps=60):
    """varphi'(w) P(varphi(w)) / (c_m w^m e^(m scrQ(w))) for the elliptic family."""
    with mp.workdps(dps):
        a = mp.mpf(geo.varphi_coeffs[1])
        b = mp.mpf(geo.varphi_coeffs.get(-1, 0.0))
        v = mp.mpf(t) * -1 / (2 * m * (1 - mp.mpf(t) ** 2))
        sv = mp.sqrt(mp.mpc(v))
        cm = a ** (m + 1) * mp.e ** (-m * mp.mpf(0.5))
        out = []
        for ww in np.atleast_1d(w):
            ww = mp.mpc(ww)
            z = a * ww + b / ww
            P = sv ** m * mp.hermite(m, z / (sv * mp.sqrt(2))) * mp.mpf(2) ** (-mp.mpf(m) / 2)
            scrQ = mp.mpf(0.5) - mp.mpf(t) / 2 / ww ** 2
            out.append(complex((a - b / ww ** 2) * P / (cm * ww ** m * mp.e ** (m * scrQ))))
        return np.array(out)


def annulus_grid(rho, n_r=5, n_th=128):
    r = np.geomspace(rho, 1 / rho, n_r)
    th = 2 * np.pi * np.arange(n_th) / n_th
    return (r[:, None] * np.exp(1j * th)[None, :]).ravel()
