"""Circle-coordinate potential data: droplet geometry, R, Rhat, H_R, W_R, B0.

Everything downstream of the geometry works with the pulled-back potential
R(w) = (R o varphi)(w), which vanishes to second order on the unit circle.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .circle_ops import herglotz_exterior, project
from .polar_series import (AnnulusSpec, CircleSeries, PolarizedSeries, dbar_keep,
                           divisibility_defect, from_evaluator, lift_winv, lift_z,
                           polar_s_radius, restrict_circle, restrict_diagonal,
                           sup_norm, weierstrass_divide)

ELLIPTIC_T_MAX = 0.3


class GeometryError(ValueError):
    pass


def _laurent_eval(coeffs: dict, w):
    w = np.asarray(w, dtype=complex)
    out = np.zeros(w.shape, complex)
    for k, c in coeffs.items():
        out = out + c * w ** k
    return out


def _laurent_deriv(coeffs: dict) -> dict:
    return {k - 1: k * c for k, c in coeffs.items() if k != 0}


def _conj_coeffs(coeffs: dict) -> dict:
    """Coefficients of u -> conj(f(conj u))."""
    return {k: np.conj(c) for k, c in coeffs.items()}


@dataclass(frozen=True)
class DropletGeometry:
    """Exterior conformal data of a droplet with analytic boundary.

    varphi maps the exterior disk onto the droplet exterior (Laurent polynomial
    in w, leading coefficient 1/phi'(inf) > 0); scrQ_w holds the Laurent
    coefficients of scrQ o varphi in w; Q_poly holds real coefficients of
    z^j conj(z)^k.
    """

    name: str
    varphi_coeffs: dict
    scrQ_coeffs: dict
    Q_poly: dict
    params: dict = field(default_factory=dict)

    # circle-coordinate evaluators
    def varphi(self, w):
        return _laurent_eval(self.varphi_coeffs, w)

    def varphi_prime(self, w):
        return _laurent_eval(_laurent_deriv(self.varphi_coeffs), w)

    def scrQ_w(self, w):
        return _laurent_eval(self.scrQ_coeffs, w)

    # physical-plane evaluators
    def Q(self, z):
        z = np.asarray(z, dtype=complex)
        zb = np.conj(z)
        out = np.zeros(z.shape)
        for (j, k), c in self.Q_poly.items():
            out = out + (c * z ** j * zb ** k).real
        return out

    def phi(self, z, iters: int = 60):
        """Exterior inverse of varphi by Newton iteration."""
        z = np.asarray(z, dtype=complex)
        a = self.varphi_coeffs.get(1, 1.0)
        w = (z - self.varphi_coeffs.get(0, 0.0)) / a
        # start outside the unit circle so we stay on the exterior branch
        w = np.where(np.abs(w) < 1.0, w / np.maximum(np.abs(w), 1e-300), w)
        dcoef = _laurent_deriv(self.varphi_coeffs)
        for _ in range(iters):
            f = _laurent_eval(self.varphi_coeffs, w) - z
            step = f / _laurent_eval(dcoef, w)
            w = w - step
            if np.all(np.abs(step) <= 1e-15 * np.abs(w)):
                break
        return w

    def phi_inv(self, w):
        return self.varphi(w)

    def phi_prime(self, z):
        return 1.0 / self.varphi_prime(self.phi(z))

    def scrQ(self, z):
        return self.scrQ_w(self.phi(z))

    @property
    def phi_prime_inf(self) -> float:
        return float(1.0 / np.real(self.varphi_coeffs[1]))

    @property
    def scrQ_inf(self) -> complex:
        return complex(self.scrQ_coeffs.get(0, 0.0))

    def validate(self, n_samples: int = 512, tol: float = 1e-10):
        th = 2 * np.pi * np.arange(n_samples) / n_samples
        w = np.exp(1j * th)
        lead = self.varphi_coeffs.get(1, 0.0)
        if abs(np.imag(lead)) > 0 or np.real(lead) <= 0:
            raise GeometryError("varphi must have a positive leading coefficient")
        if abs(self.scrQ_inf.imag) > tol:
            raise GeometryError("Im scrQ(inf) must vanish")
        if np.any(np.abs(self.varphi_prime(w)) < 1e-8):
            raise GeometryError("varphi' vanishes on the unit circle")
        gamma = self.varphi(w)
        turn = np.sum(np.angle(np.roll(gamma, -1) / gamma)) / (2 * np.pi)
        if abs(turn - 1.0) > 1e-6:
            raise GeometryError("boundary curve does not wind once")
        # simple-curve check: varphi' keeps w-winding 0 on T
        dturn = np.sum(np.angle(np.roll(self.varphi_prime(w), -1) / self.varphi_prime(w)))
        if abs(dturn) > 1e-6:
            raise GeometryError("boundary curve is not a Jordan curve (varphi' winds)")
        back = self.phi(gamma)
        if np.max(np.abs(np.abs(back) - 1.0)) > tol:
            raise GeometryError("|phi| != 1 on the boundary samples")
        gap = np.max(np.abs(self.scrQ_w(w).real - self.Q(gamma)))
        if gap > tol:
            raise GeometryError(f"Re scrQ != Q on the boundary (gap {gap:.2e})")
        return self

    def growth_margin(self, radii=(10.0, 100.0, 1000.0), n_ang: int = 64) -> float:
        """min of Q(z)/log|z| - 1 over a few large circles."""
        th = 2 * np.pi * np.arange(n_ang) / n_ang
        worst = math.inf
        for r in radii:
            q = self.Q(r * np.exp(1j * th))
            worst = min(worst, float(np.min(q)) / math.log(r) - 1.0)
        if worst <= 0:
            raise GeometryError("Q does not grow faster than log|z|")
        return worst

    # file format
    def to_text(self) -> str:
        lines = ["# droplet"]
        for k, c in sorted(self.varphi_coeffs.items()):
            lines.append(f"varphi {k} {float(np.real(c))!r} {float(np.imag(c))!r}")
        for k, c in sorted(self.scrQ_coeffs.items()):
            lines.append(f"scrQ {k} {float(np.real(c))!r} {float(np.imag(c))!r}")
        for (j, k), c in sorted(self.Q_poly.items()):
            lines.append(f"Q {j} {k} {float(np.real(c))!r}")
        return "\n".join(lines) + "\n"


def parse_geometry(text: str, name: str = "user_file") -> DropletGeometry:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "# droplet":
        raise GeometryError("geometry file must start with '# droplet'")
    varphi, scrQ, Q = {}, {}, {}
    for ln in lines[1:]:
        if ln.startswith("#"):
            continue
        parts = ln.split()
        tag = parts[0]
        if tag == "varphi":
            varphi[int(parts[1])] = complex(float(parts[2]), float(parts[3]))
        elif tag == "scrQ":
            scrQ[int(parts[1])] = complex(float(parts[2]), float(parts[3]))
        elif tag == "Q":
            Q[(int(parts[1]), int(parts[2]))] = float(parts[3])
        else:
            raise GeometryError(f"unknown geometry line: {ln!r}")
    if any(k > 1 for k in varphi) or 1 not in varphi:
        raise GeometryError("varphi must be a Laurent polynomial with top power w^1")
    if any(k > 0 for k in scrQ):
        raise GeometryError("scrQ must be an exterior series (powers <= 0)")
    if not Q:
        raise GeometryError("geometry file needs Q coefficients")
    for (j, k), c in Q.items():
        if abs(Q.get((k, j), 0.0) - c) > 1e-14:
            raise GeometryError("Q coefficients must be symmetric (Q real)")
    return DropletGeometry(name, varphi, scrQ, Q)


def build_droplet(family: str, params: dict | None = None) -> DropletGeometry:
    """Built-in families: radial_gaussian, elliptic (param t), user_file (param path)."""
    params = dict(params or {})
    if family == "radial_gaussian":
        geo = DropletGeometry("radial_gaussian", {1: 1 / math.sqrt(2)}, {0: 0.5},
                              {(1, 1): 1.0}, {})
    elif family == "elliptic":
        t = float(params.get("t", 0.0))
        if abs(t) > ELLIPTIC_T_MAX:
            raise GeometryError(f"elliptic family needs |t| <= {ELLIPTIC_T_MAX}, got t={t}")
        a = 1.0 / math.sqrt(2.0 * (1.0 - t * t))
        b = -t * a
        varphi = {1: a} if t == 0 else {1: a, -1: b}
        scrQ = {0: 0.5} if t == 0 else {0: 0.5, -2: -t / 2}
        Q = {(1, 1): 1.0} if t == 0 else {(1, 1): 1.0, (2, 0): t / 2, (0, 2): t / 2}
        geo = DropletGeometry("elliptic", varphi, scrQ, Q, {"t": t})
    elif family == "user_file":
        path = params.get("path")
        if path is None:
            raise GeometryError("user_file geometry needs a path")
        with open(path, encoding="utf-8") as fh:
            geo = parse_geometry(fh.read())
        geo = DropletGeometry("user_file", geo.varphi_coeffs, geo.scrQ_coeffs, geo.Q_poly,
                              {"path": str(path)})
    else:
        raise GeometryError(f"unknown potential family {family!r}")
    return geo.validate()


def polarized_R_evaluator(geo: DropletGeometry):
    """(z, u) -> R(z, conj w = u) in circle coordinates, closed form."""
    X_c = geo.varphi_coeffs
    Y_c = _conj_coeffs(geo.varphi_coeffs)
    Qw = geo.scrQ_coeffs
    Qw_star = _conj_coeffs(geo.scrQ_coeffs)

    def R(z, u):
        X = _laurent_eval(X_c, z)
        Y = _laurent_eval(Y_c, u)
        val = np.zeros(np.broadcast(X, Y).shape, complex)
        for (j, k), c in geo.Q_poly.items():
            val = val + c * X ** j * Y ** k
        val = val - 0.5 * (_laurent_eval(Qw, z) + _laurent_eval(Qw_star, u))
        return val - 0.5 * np.log1p(z * u - 1.0)

    return R


def R_diagonal(geo: DropletGeometry, w):
    """R(w) = Q(varphi(w)) - Re scrQ(w) - log|w| (closed form)."""
    w = np.asarray(w, dtype=complex)
    return geo.Q(geo.varphi(w)) - geo.scrQ_w(w).real - np.log(np.abs(w))


def polarize(evaluator, N: int, sigma0: float, K: int | None = None,
             s_scale: float | None = None, tol: float = 1e-10, seed: int = 0):
    """Sample the closed-form polarization on the torus and extract coefficients.

    Held-out random points on the polarized annulus check the reconstruction.
    """
    ann = AnnulusSpec.from_sigma(sigma0)
    if K is None:
        K = N
    if s_scale is None:
        s_scale = default_s_scale(sigma0)
    series = from_evaluator(evaluator, N, K, s_scale, sigma0)
    rng = np.random.default_rng(seed)
    r = np.exp(rng.uniform(np.log(ann.rho), np.log(ann.outer), 64))
    z = r * np.exp(2j * np.pi * rng.uniform(size=64))
    delta = 2 * sigma0 * np.sqrt(rng.uniform(size=64)) * np.exp(2j * np.pi * rng.uniform(size=64))
    w = z + delta
    keep = (np.abs(w) > ann.rho) & (np.abs(w) < ann.outer)
    z, w = z[keep], w[keep]
    exact = evaluator(z, np.conj(w))
    approx = series.evaluate(z, w)
    scale = max(1.0, float(np.max(np.abs(exact))))
    err = float(np.max(np.abs(exact - approx))) / scale
    if err > tol:
        raise ValueError(f"insufficient degree N={N}, K={K}: reconstruction error {err:.2e}")
    return series


def default_s_scale(sigma0: float) -> float:
    return 1.02 * polar_s_radius(AnnulusSpec.from_sigma(sigma0))


def build_Rhat(R_polar: PolarizedSeries, tol: float = 1e-9) -> PolarizedSeries:
    """Square root of R, positive outside the circle: -(1 - z conj w) sqrt(S)."""
    S = weierstrass_divide(weierstrass_divide(R_polar, tol), tol)
    S_T = restrict_circle(S)
    vals = S_T.samples()
    if np.min(vals.real) <= 0:
        raise ValueError("Delta Q <= 0 on interface: R does not have positive second-order contact")
    return -(S.sqrt().times_one_minus_q())


def boundary_laplacian(R_polar: PolarizedSeries) -> CircleSeries:
    """Laplacian of R on the unit circle, d_z d_wbar R restricted to T."""
    lap = restrict_circle(dbar_keep(R_polar).dz())
    vals = lap.samples()
    scale = float(np.max(np.abs(vals)))
    if np.max(np.abs(vals.imag)) > 1e-8 * scale:
        warnings.warn("boundary Laplacian has a non-negligible imaginary part", RuntimeWarning,
                      stacklevel=2)
    if np.min(vals.real) <= 0:
        raise ValueError("Delta R is not positive on the unit circle")
    # keep the Hermitian part; the representee is real
    return CircleSeries(0.5 * (lap.coeffs + lap.conj_on_circle().coeffs), lap.N, lap.annulus)


def build_HR(lap: CircleSeries):
    """Outer function with |H|^2 = pi^(-1/2) sqrt(Delta R) on T, and a1 = 1/H(inf)."""
    vals = lap.samples().real
    if np.min(vals) <= 0:
        raise ValueError("Delta R must be positive on the unit circle")
    logd = CircleSeries.from_samples(np.log(vals), lap.N, lap.annulus)
    logd = CircleSeries(0.5 * (logd.coeffs + logd.conj_on_circle().coeffs), lap.N, lap.annulus)
    H = herglotz_exterior(logd * 0.25).exp() * math.pi ** -0.25
    h0 = H.coeff(0).real
    c = H.coeffs.copy()
    c[H.N] = h0
    H = CircleSeries(c, H.N, H.annulus)
    H = project(H, "H2_minus")
    a1 = 1.0 / h0
    # nudge so that a1 * H(inf) == 1 in floating point
    for _ in range(4):
        if a1 * h0 == 1.0:
            break
        a1 = np.nextafter(a1, math.inf if a1 * h0 < 1.0 else -math.inf)
    return H, float(a1)


def c_constant(geo: DropletGeometry, m: float, n: float | None = None) -> float:
    """phi'(inf)^(-n-1) exp(-m scrQ(inf))."""
    if n is None:
        n = m
    return float(geo.phi_prime_inf ** (-n - 1) * math.exp(-m * geo.scrQ_inf.real))


def log_c_constant(geo: DropletGeometry, m: float, n: float | None = None) -> float:
    if n is None:
        n = m
    return float(-(n + 1) * math.log(geo.phi_prime_inf) - m * geo.scrQ_inf.real)


@dataclass(frozen=True, eq=False)
class PotentialModel:
    geometry: DropletGeometry
    growth_margin: float
    sigma0: float
    R_polar: PolarizedSeries
    Rhat_polar: PolarizedSeries
    laplacian_R_circle: CircleSeries
    H_R: CircleSeries
    a1: float
    W_R: PolarizedSeries
    B0: PolarizedSeries
    # cached pieces of the operators
    dRhat: PolarizedSeries = None
    dbarR: PolarizedSeries = None
    C1: PolarizedSeries = None
    inv_Hbar: PolarizedSeries = None
    W_over_zH: PolarizedSeries = None
    inv_zH: CircleSeries = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def N(self):
        return self.R_polar.N

    @property
    def K(self):
        return self.R_polar.K

    @property
    def s_scale(self):
        return self.R_polar.s_scale

    def Q(self, z):
        return self.geometry.Q(z)

    def lift_z(self, f: CircleSeries, sigma=None) -> PolarizedSeries:
        return lift_z(f, self.K, self.s_scale, self.sigma0 if sigma is None else sigma)

    def lift_winv(self, f: CircleSeries, sigma=None) -> PolarizedSeries:
        return lift_winv(f, self.K, self.s_scale, self.sigma0 if sigma is None else sigma)

    def lift_conj(self, f: CircleSeries, sigma=None) -> PolarizedSeries:
        """Polarization of conj(f(w)) for f holomorphic near T."""
        return self.lift_winv(f.conj_on_circle(), sigma)

    def R_diag(self, w):
        return R_diagonal(self.geometry, w)

    def Rhat_diag(self, w):
        """Rhat on the diagonal from the closed form: sign(|w|-1) sqrt(R)."""
        w = np.asarray(w, dtype=complex)
        R = np.maximum(self.R_diag(w), 0.0)
        return np.sign(np.abs(w) - 1.0) * np.sqrt(R)


def build_model(geo: DropletGeometry, N: int = 64, sigma0: float | None = None,
                K: int | None = None, s_scale: float | None = None,
                tol: float = 1e-9) -> PotentialModel:
    if sigma0 is None:
        sigma0 = default_sigma0(geo)
    if K is None:
        K = N
    if s_scale is None:
        s_scale = default_s_scale(sigma0)
    R = polarize(polarized_R_evaluator(geo), N, sigma0, K=K, s_scale=s_scale)
    Rhat = build_Rhat(R, tol)
    lap = boundary_laplacian(R)
    H, a1 = build_HR(lap)
    diag = {
        "R_circle_defect": divisibility_defect(R),
        "dbarR_circle_defect": divisibility_defect(dbar_keep(R)),
        "R_tail_mass": R.tail_mass(),
    }
    pieces = build_WR(Rhat, H, tol)
    W = pieces["W_R"]
    inv_H = project(H.inverse(), "H2_minus")
    inv_zH = inv_H.shift(-1)
    lz = lambda f: lift_z(f, K, s_scale, sigma0)
    W_over_zH = W * lz(inv_zH)
    B0 = a1 * W_over_zH
    inv_Hbar = lift_winv(inv_H.conj_on_circle(), K, s_scale, sigma0)
    C1 = lift_winv(H.conj_on_circle(), K, s_scale, sigma0) * (2.0 * pieces["D"]).inverse()
    diag.update(pieces["diagnostics"])
    return PotentialModel(geo, geo.growth_margin(), sigma0, R, Rhat, lap, H, a1, W, B0,
                          dRhat=pieces["dRhat"], dbarR=dbar_keep(R), C1=C1,
                          inv_Hbar=inv_Hbar, W_over_zH=W_over_zH, inv_zH=inv_zH,
                          diagnostics=diag)


def build_WR(Rhat: PolarizedSeries, H: CircleSeries, tol: float = 1e-9) -> dict:
    """W_R = (dbar Rhat - sqrt(pi/2) zeta |H|^2) / (2 Rhat dbar Rhat), by two divisions."""
    K, h, sig = Rhat.K, Rhat.s_scale, Rhat.sigma
    dR = dbar_keep(Rhat)
    H2 = lift_z(H.shift(1), K, h, sig) * lift_winv(H.conj_on_circle(), K, h, sig)
    num = dR - math.sqrt(math.pi / 2) * H2
    num_def = divisibility_defect(num)
    num1 = weierstrass_divide(num, tol)
    D = weierstrass_divide(2.0 * Rhat * dR, tol)
    W = num1 * D.inverse()
    return {"W_R": W, "D": D, "dRhat": dR,
            "diagnostics": {"WR_numerator_defect": num_def}}


def default_sigma0(geo: DropletGeometry) -> float:
    """0.2 for the radial case; 0.1 when the exterior map has a finite critical radius."""
    if len(geo.varphi_coeffs) == 1 and len(geo.scrQ_coeffs) == 1:
        return 0.2
    return 0.1
