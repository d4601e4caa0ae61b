"""Brute-force ground truth: moment matrices, monic orthogonal polynomials,
Cauchy potentials, and the comparison against the expansion.

The planar measure is dA = dx dy / pi throughout.  Extended precision goes
through python-flint (arb/acb); precision 53 runs the same scheme in numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from flint import acb, acb_mat, acb_poly, arb, ctx

from .expansion import ExpansionArtifacts, smooth_ramp
from .potential import DropletGeometry, PotentialModel, R_diagonal, log_c_constant

DOUBLE = 53


class PrecisionError(RuntimeError):
    pass


@dataclass
class QuadratureScheme:
    """Gauss-Legendre in r on [0, R_max] times the trapezoid rule in angle."""

    R_max: float
    n_radial: int
    n_angular: int
    precision: int = 256
    nodes: list = field(default_factory=list, repr=False)
    weights: list = field(default_factory=list, repr=False)

    @classmethod
    def build(cls, geo: DropletGeometry, m: float, n: int, precision: int = 256,
              n_radial: int | None = None, n_angular: int | None = None) -> "QuadratureScheme":
        R = choose_R_max(geo, m, n, precision)
        if n_radial is None:
            n_radial = int(max(60, 40 + 3 * math.sqrt(m) * R + precision / 4))
        if n_angular is None:
            t = _angular_spread(geo, m, R)
            n_angular = _pow2(2 * n + 2 + int(4 * t) + precision // 2)
        q = cls(R, n_radial, n_angular, precision)
        q._make_nodes()
        return q

    def _make_nodes(self):
        if self.precision <= DOUBLE:
            x, w = np.polynomial.legendre.leggauss(self.n_radial)
            self.nodes = list(0.5 * self.R_max * (x + 1))
            self.weights = list(0.5 * self.R_max * w)
            return
        with _prec(self.precision):
            half = arb(self.R_max) / 2
            nodes, weights = [], []
            for k in range(self.n_radial):
                x, w = arb.legendre_p_root(self.n_radial, k, weight=True)
                nodes.append((x + 1) * half)
                weights.append(w * half)
            self.nodes, self.weights = nodes, weights

    def refined(self) -> "QuadratureScheme":
        q = QuadratureScheme(self.R_max, 2 * self.n_radial, self.n_angular, self.precision)
        q._make_nodes()
        return q


def _pow2(n):
    m = 1
    while m < n:
        m *= 2
    return m


class _prec:
    def __init__(self, bits):
        self.bits = bits

    def __enter__(self):
        self.old = ctx.prec
        ctx.prec = self.bits

    def __exit__(self, *exc):
        ctx.prec = self.old


def _angular_spread(geo: DropletGeometry, m, R):
    """Size of the angular Fourier content of e^(-2mQ) on |z| = R."""
    amp = sum(abs(c) * R ** (j + k) for (j, k), c in geo.Q_poly.items() if j != k)
    return 2 * m * amp


def _Q_min_on_circle(geo: DropletGeometry, r, n_ang=64):
    th = 2 * np.pi * np.arange(n_ang) / n_ang
    return float(np.min(geo.Q(r * np.exp(1j * th))))


def choose_R_max(geo: DropletGeometry, m, n, precision):
    """Radius past which r^(2n+1) e^(-2m Q) sits 2^(-precision) below its peak."""
    rs = np.linspace(0.05, 50.0, 20000)
    logf = np.array([(2 * n + 1) * math.log(r) - 2 * m * _Q_min_on_circle(geo, r, 32) for r in rs])
    peak = float(np.max(logf))
    target = peak - (precision * math.log(2.0) + 20.0)
    ip = int(np.argmax(logf))
    for i in range(ip, len(rs)):
        if logf[i] < target:
            return float(rs[i])
    raise PrecisionError("could not bracket the quadrature radius")


# ---------------------------------------------------------------------------
# moment matrix


def _angular_sums(geo: DropletGeometry, m, quad: QuadratureScheme, dmax: int):
    """A[i, d + dmax] = (1/M) sum_l e^{i d th_l} e^{-2m Q(r_i e^{i th_l})}."""
    M = quad.n_angular
    if quad.precision <= DOUBLE:
        r = np.asarray(quad.nodes)[:, None]
        th = 2 * np.pi * np.arange(M) / M
        E = np.exp(-2 * m * geo.Q(r * np.exp(1j * th)[None, :]))
        d = np.arange(-dmax, dmax + 1)
        F = np.exp(1j * np.outer(th, d))
        return E @ F / M
    with _prec(quad.precision):
        two_m = 2 * arb(m)
        pis = [arb.pi() * 2 * l / M for l in range(M)]
        cis = [(p.cos(), p.sin()) for p in pis]
        rows = []
        for r in quad.nodes:
            row = []
            for c, s in cis:
                row.append((-two_m * _Q_arb(geo, r * c, r * s)).exp())
            rows.append(row)
        E = acb_mat(rows)
        Fm = acb_mat([[acb(c, s) ** d for d in range(-dmax, dmax + 1)] for c, s in cis])
        return (E * Fm) * (arb(1) / M)


def _Q_arb(geo: DropletGeometry, x, y):
    z = acb(x, y)
    zb = acb(x, -y)
    tot = arb(0)
    for (j, k), c in geo.Q_poly.items():
        tot += (arb(c) * z ** j * zb ** k).real
    return tot


def moment_matrix(geo: DropletGeometry, m, n: int, quad: QuadratureScheme):
    """G[j, k] = int z^j conj(z)^k e^(-2mQ) dA for 0 <= j, k <= n."""
    dm = n
    A = _angular_sums(geo, m, quad, dm)
    if quad.precision <= DOUBLE:
        r = np.asarray(quad.nodes)
        w = np.asarray(quad.weights)
        U = (r[None, :] ** np.arange(2 * n + 1)[:, None]) * (2 * w * r)[None, :]
        UA = U @ A
        G = np.empty((n + 1, n + 1), complex)
        for j in range(n + 1):
            for k in range(n + 1):
                G[j, k] = UA[j + k, j - k + dm]
        return 0.5 * (G + G.conj().T)
    with _prec(quad.precision):
        U = acb_mat([[2 * w * r ** (p + 1) for w, r in zip(quad.weights, quad.nodes)]
                     for p in range(2 * n + 1)])
        UA = U * A
        rows = [[UA[j + k, j - k + dm] for k in range(n + 1)] for j in range(n + 1)]
        # enforce exact Hermitian symmetry
        for j in range(n + 1):
            rows[j][j] = acb(rows[j][j].real)
            for k in range(j):
                rows[j][k] = rows[k][j].conjugate()
        return acb_mat(rows)


# ---------------------------------------------------------------------------
# orthogonal polynomial


def monic_orthogonal_polynomial(G, n: int, precision: int = 256):
    """Coefficients p_0..p_n (p_n = 1) with <P, z^k> = 0 for k < n, plus diagnostics."""
    if n == 0:
        return _one_poly(precision), 0.0
    if precision <= DOUBLE:
        G = np.asarray(G)
        p = np.linalg.solve(G[:n, :n].T, -G[n, :n])
        p = np.concatenate([p, [1.0]])
        return p, _orth_residual_np(G, p)
    with _prec(precision):
        Gs = acb_mat([[G[k, j] for j in range(n)] for k in range(n)]).transpose()
        rhs = acb_mat([[-G[n, k]] for k in range(n)])
        try:
            sol = Gs.solve(rhs, algorithm="approx")
        except ZeroDivisionError as exc:  # pragma: no cover - precision breakdown
            raise PrecisionError(str(exc)) from exc
        p = [sol[k, 0].mid() for k in range(n)] + [acb(1)]
        return p, _orth_residual_acb(G, p, n)


def _one_poly(precision):
    return np.array([1.0 + 0j]) if precision <= DOUBLE else [acb(1)]


def _orth_residual_np(G, p):
    n = len(p) - 1
    inner = p @ G[:, :n]  # <P, z^k> = sum_j p_j G[j, k]
    normP = math.sqrt(abs((p @ G @ p.conj()).real))
    return float(np.max(np.abs(inner) / (np.sqrt(np.abs(np.diag(G)[:n])) * normP)))


def _orth_residual_acb(G, p, n):
    worst = 0.0
    normP2 = arb(0)
    for j in range(n + 1):
        for k in range(n + 1):
            normP2 += (p[j] * G[j, k] * p[k].conjugate()).real
    normP = normP2.sqrt()
    for k in range(n):
        s = acb(0)
        for j in range(n + 1):
            s += p[j] * G[j, k]
        rel = abs(s) / (G[k, k].real.sqrt() * normP)
        worst = max(worst, float(rel.mid()))
    return worst


def poly_norm(G, p) -> float:
    if isinstance(G, np.ndarray):
        return math.sqrt(abs((p @ G @ np.conj(p)).real))
    n = len(p) - 1
    s = arb(0)
    for j in range(n + 1):
        for k in range(n + 1):
            s += (p[j] * G[j, k] * p[k].conjugate()).real
    return float(s.sqrt().mid())


@dataclass
class OracleResult:
    m: float
    n: int
    precision: int
    coeffs: list
    norm: float
    orth_residual: float
    condition_estimate: float
    quad: QuadratureScheme
    geometry: DropletGeometry
    D_m: dict | None = None
    comparison: dict | None = None

    def coeffs_complex(self) -> np.ndarray:
        return np.array([complex(c) for c in self.coeffs])

    def F_ratio(self, w) -> np.ndarray:
        """P(varphi(w)) / (c_m w^m e^(m scrQ(w))), evaluated in working precision."""
        geo = self.geometry
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        if self.precision <= DOUBLE:
            z = geo.varphi(w)
            P = np.polyval(self.coeffs_complex()[::-1], z)
            scale = np.exp(log_c_constant(geo, self.m, self.n) + self.n * np.log(w)
                           + self.m * geo.scrQ_w(w))
            return P / scale
        with _prec(self.precision):
            poly = acb_poly(list(self.coeffs))
            logc = arb(log_c_constant(geo, self.m, self.n))
            out = np.empty(w.shape, complex)
            for i, wi in enumerate(w):
                wa = acb(wi.real, wi.imag)
                z = sum((acb(complex(c).real, complex(c).imag) * wa ** k
                         for k, c in geo.varphi_coeffs.items()), acb(0))
                q = sum((acb(complex(c).real, complex(c).imag) * wa ** k
                         for k, c in geo.scrQ_coeffs.items()), acb(0))
                val = poly(z) / (logc.exp() * wa ** self.n * (q * self.m).exp())
                out[i] = complex(val.mid())
            return out

    def evaluate(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if self.precision <= DOUBLE:
            return np.polyval(self.coeffs_complex()[::-1], z)
        with _prec(self.precision):
            poly = acb_poly(list(self.coeffs))
            return np.array([complex(poly(acb(v.real, v.imag)).mid()) for v in z])


def run_oracle(geo: DropletGeometry, m, n: int | None = None, precision: int = 256,
               max_precision: int = 1024, quad: QuadratureScheme | None = None) -> OracleResult:
    """Monic OP of degree n for the weight e^(-2mQ), escalating precision on failure."""
    if n is None:
        n = int(m)
    target = 2.0 ** (-precision / 4)
    bits = precision
    while True:
        q = quad if (quad is not None and quad.precision == bits) else \
            QuadratureScheme.build(geo, m, n, precision=bits)
        G = moment_matrix(geo, m, n, q)
        try:
            p, res = monic_orthogonal_polynomial(G, n, bits)
        except (PrecisionError, np.linalg.LinAlgError):
            res = math.inf
        if res <= target:
            break
        if bits * 2 > max_precision:
            raise PrecisionError(f"orthogonality residual {res:.3e} above {target:.3e} "
                                 f"at the precision cap {bits} bits")
        bits *= 2
    cond = _condition_estimate(G, n)
    return OracleResult(m, n, bits, p, poly_norm(G, p), res, cond, q, geo)


def _condition_estimate(G, n):
    if isinstance(G, np.ndarray):
        d = np.sqrt(np.abs(np.diag(G)))
        Gs = G / np.outer(d, d)
        return float(np.linalg.cond(Gs))
    Gn = np.array([[complex(G[j, k].mid()) for k in range(n + 1)] for j in range(n + 1)])
    d = np.sqrt(np.abs(np.diag(Gn)))
    with np.errstate(all="ignore"):
        return float(np.linalg.cond(Gn / np.outer(d, d)))


# ---------------------------------------------------------------------------
# Cauchy potential


def cauchy_potential(coeffs, m, geo: DropletGeometry, z, quad: QuadratureScheme):
    """Psi(z) = int conj(P(xi)) e^(-2m Q(xi)) / (z - xi) dA(xi), double precision.

    z must lie off the quadrature support (|z| > R_max keeps the integrand smooth).
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(np.abs(z) <= quad.R_max):
        raise ValueError("cauchy_potential samples must lie outside the quadrature disk")
    r = np.array([float(x) for x in quad.nodes])
    w = np.array([float(x) for x in quad.weights])
    M = quad.n_angular
    th = 2 * np.pi * np.arange(M) / M
    xi = (r[:, None] * np.exp(1j * th)[None, :]).ravel()
    dA = ((2 * w * r)[:, None] * np.full(M, 1.0 / M)[None, :]).ravel()
    c = np.asarray([complex(x) for x in coeffs])
    dens = np.conj(np.polyval(c[::-1], xi)) * np.exp(-2 * m * geo.Q(xi)) * dA
    return np.array([np.sum(dens / (zz - xi)) for zz in z])


def cauchy_moments(coeffs, m, geo, quad, count: int, radius: float | None = None, M: int = 64):
    """First count coefficients of Psi(z) = sum_k c_k z^(-k-1), read off by FFT on a circle."""
    if radius is None:
        radius = 1.5 * quad.R_max
    z = radius * np.exp(2j * np.pi * np.arange(M) / M)
    psi = cauchy_potential(coeffs, m, geo, z, quad)
    # c_k = (1/M) sum_l psi(z_l) z_l^(k+1)
    ks = np.arange(count)
    return np.array([np.mean(psi * z ** (k + 1)) for k in ks])


def inner_with_monomials(G, coeffs, count: int):
    """<P, z^k> = sum_j p_j G[j, k] for k < count."""
    c = [complex(x) for x in coeffs]
    if not isinstance(G, np.ndarray):
        n = len(coeffs) - 1
        G = np.array([[complex(G[j, k].mid()) for k in range(n + 1)] for j in range(n + 1)])
    return np.array([sum(c[j] * G[j, k] for j in range(len(c))) for k in range(count)])


# ---------------------------------------------------------------------------
# comparison


def critical_radius(geo: DropletGeometry) -> float:
    """Largest |w| with varphi'(w) = 0 (0 if none)."""
    coeffs = {k - 1: k * c for k, c in geo.varphi_coeffs.items() if k != 0}
    lo = min(coeffs)
    # varphi'(w) w^(-lo) is a polynomial in w
    deg = max(coeffs) - lo
    poly = np.zeros(deg + 1, complex)
    for k, c in coeffs.items():
        poly[deg - (k - lo)] += c
    roots = np.roots(poly) if deg > 0 else np.array([])
    return float(np.max(np.abs(roots))) if roots.size else 0.0


def cutoff_radii(model: PotentialModel):
    """(rho1, rho2) for the radial cut-off chi11 in circle coordinates."""
    rc = critical_radius(model.geometry)
    rho1 = max(0.5, rc + 0.15)
    return rho1, rho1 + 0.1


def chi11(model: PotentialModel, w):
    rho1, rho2 = cutoff_radii(model)
    r = np.abs(np.asarray(w, dtype=complex))
    return smooth_ramp((r - rho1) / (rho2 - rho1)) ** 2


def dm_region(model: PotentialModel, m, epsilon: float, n_radii: int = 24, n_angles: int = 64,
              r_out: float = 1.6) -> dict:
    """Grid points with R_minus(w) <= eps m^(-1/2) / 2 and |w| > rho2, plus their images."""
    _, rho2 = cutoff_radii(model)
    level = 0.5 * epsilon / math.sqrt(m)
    # inner edge: solve R(r) = level by bisection along each ray (R increases inward)
    th = 2 * np.pi * np.arange(n_angles) / n_angles
    geo = model.geometry
    inner = np.empty(n_angles)
    for i, t in enumerate(th):
        lo, hi = rho2, 1.0
        if R_diagonal(geo, lo * np.exp(1j * t)) <= level:
            inner[i] = lo
            continue
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if R_diagonal(geo, mid * np.exp(1j * t)) > level:
                lo = mid
            else:
                hi = mid
        inner[i] = hi
    ws = []
    for i, t in enumerate(th):
        rr = np.concatenate([np.linspace(inner[i], 1.0, n_radii // 2, endpoint=False),
                             np.geomspace(1.0, r_out, n_radii - n_radii // 2)])
        ws.append(rr * np.exp(1j * t))
    w = np.concatenate(ws)
    return {"w": w, "z": geo.varphi(w), "level": level, "inner_radius": inner,
            "rho2": rho2, "epsilon": epsilon}


def fitted_epsilon(M1: float) -> float:
    return 2.0 * math.exp(-1.0) / math.sqrt(M1)


def _w_quadrature(model: PotentialModel, m, n_radial=None, n_angular=256):
    """Gauss-Legendre in |w| over [rho1, R_out] times trapezoid in angle (dA = dxdy/pi)."""
    rho1, _ = cutoff_radii(model)
    R_out = 1.0 + 9.0 / math.sqrt(m) + 0.1
    if n_radial is None:
        n_radial = int(60 + 2 * math.sqrt(m))
    x, wt = np.polynomial.legendre.leggauss(n_radial)
    r = rho1 + 0.5 * (R_out - rho1) * (x + 1)
    wr = 0.5 * (R_out - rho1) * wt
    th = 2 * np.pi * np.arange(n_angular) / n_angular
    w = (r[:, None] * np.exp(1j * th)[None, :]).ravel()
    dA = ((2 * wr * r)[:, None] * np.full(n_angular, 1.0 / n_angular)[None, :]).ravel()
    return w, dA


def norm_ratio(model: PotentialModel, art: ExpansionArtifacts, **kw) -> float:
    """m^(1/2) c_m^(-2) |chi11 P~|^2 / a1^2, computed in circle coordinates."""
    m = art.m
    w, dA = _w_quadrature(model, m, **kw)
    F = art.F_approx.evaluate(w)
    R = model.R_diag(w)
    val = np.sum(chi11(model, w) ** 2 * np.abs(F) ** 2 * np.exp(-2 * m * R) * dA)
    return float(math.sqrt(m) * val / model.a1 ** 2)


def l2_defect(model: PotentialModel, art: ExpansionArtifacts, orc: OracleResult, **kw) -> float:
    """|P - chi11 P~| / |P| in L2(e^(-2mQ) dA)."""
    m = art.m
    w, dA = _w_quadrature(model, m, **kw)
    geo = model.geometry
    ratio = orc.F_ratio(w)
    vp = geo.varphi_prime(w)
    F = art.F_approx.evaluate(w)
    R = model.R_diag(w)
    weight = np.abs(vp) ** 2 * np.exp(-2 * m * R) * dA
    c2 = math.exp(2 * log_c_constant(geo, m, orc.n))
    diff2 = c2 * np.sum(np.abs(ratio - chi11(model, w) * F / vp) ** 2 * weight)
    outer2 = c2 * np.sum(np.abs(ratio) ** 2 * weight)
    inner2 = max(orc.norm ** 2 - outer2, 0.0)
    return float(math.sqrt(diff2 + inner2) / orc.norm)


def compare(orc: OracleResult, model: PotentialModel, art: ExpansionArtifacts,
            epsilon: float | None = None, region: dict | None = None) -> dict:
    """F-scale error over D_m, norm ratio, L2 defect and a sample table."""
    if orc.m != art.m:
        raise ValueError("oracle and expansion built for different m")
    if epsilon is None:
        epsilon = fitted_epsilon(art.M1_estimate)
    if region is None:
        region = dm_region(model, art.m, epsilon)
    w = region["w"]
    geo = model.geometry
    true_ratio = orc.F_ratio(w)
    approx_ratio = art.F_approx.evaluate(w) / geo.varphi_prime(w)
    err = np.abs(true_ratio - approx_ratio)
    logscale = log_c_constant(geo, art.m, orc.n) + art.m * (np.log(np.abs(w)) + geo.scrQ_w(w).real)
    absP = np.abs(true_ratio) * np.exp(logscale)
    absPa = np.abs(approx_ratio) * np.exp(logscale)
    samples = np.column_stack([region["z"].real, region["z"].imag, absP, absPa,
                               err / np.maximum(np.abs(true_ratio), 1e-300)])
    return {
        "sup_defect_Dm": float(np.max(err)),
        "norm_ratio": norm_ratio(model, art),
        "l2_defect": l2_defect(model, art, orc),
        "samples": samples,
        "epsilon": epsilon,
        "n_points": int(w.size),
    }
