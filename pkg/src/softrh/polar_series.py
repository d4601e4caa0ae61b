"""Truncated series algebra for polarized functions near the unit circle.

A real-analytic function f near T is carried through its polarization
f(z, w) with f(z, z) = f(z), holomorphic in (z, conj w).  We store it in the
chart (z, s) with s = z*conj(w) - 1: Laurent in z over [-N, N], Taylor in s
over [0, K].  The circle |z| = |w| = 1, w = z is exactly s = 0, so restriction
to T, Weierstrass division by (1 - z*conj w) and the w-bar derivative are all
coefficient moves.  The s variable is stored rescaled, t = s / s_scale, which
keeps the coefficient magnitudes balanced on the sampling torus.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

TAIL_REL = 1e-14
LIFT_CHOP = 1e-15
# coefficients recovered by an FFT carry absolute error ~ eps * max; anything
# below this relative level is indistinguishable from round-off and is zeroed
SAMPLE_CHOP = 1e-15


def _chop(c: np.ndarray, rel: float = SAMPLE_CHOP) -> np.ndarray:
    top = np.max(np.abs(c)) if c.size else 0.0
    return np.where(np.abs(c) < rel * top, 0, c)


def rho_of_sigma(sigma: float) -> float:
    """Inner radius rho(sigma) with 1/rho - rho = 2 sigma."""
    sigma = float(sigma)
    if not (0.0 < sigma < 1.0):
        raise ValueError(f"sigma must lie in (0, 1), got {sigma}")
    return 1.0 / (sigma + math.sqrt(1.0 + sigma * sigma))


@dataclass(frozen=True)
class AnnulusSpec:
    sigma: float
    rho: float

    @classmethod
    def from_sigma(cls, sigma: float) -> "AnnulusSpec":
        return cls(float(sigma), rho_of_sigma(sigma))

    @property
    def outer(self) -> float:
        return 1.0 / self.rho


def _fft_size(n: int) -> int:
    m = 1
    while m < n:
        m *= 2
    return m


# ---------------------------------------------------------------------------
# single-variable Laurent series on T


@dataclass(frozen=True, eq=False)
class CircleSeries:
    """Laurent polynomial sum_{d=-N}^{N} c_d z^d on an annulus around T."""

    coeffs: np.ndarray
    N: int
    annulus: AnnulusSpec | None = None

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (2 * self.N + 1,):
            raise ValueError(f"expected {2 * self.N + 1} coefficients, got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # construction
    @classmethod
    def zeros(cls, N, annulus=None):
        return cls(np.zeros(2 * N + 1, complex), N, annulus)

    @classmethod
    def from_dict(cls, terms: dict, N: int, annulus=None):
        c = np.zeros(2 * N + 1, complex)
        for d, v in terms.items():
            if abs(d) > N:
                raise ValueError(f"mode {d} outside [-{N}, {N}]")
            c[d + N] += v
        return cls(c, N, annulus)

    @classmethod
    def constant(cls, value, N, annulus=None):
        return cls.from_dict({0: value}, N, annulus)

    @classmethod
    def from_samples(cls, values: np.ndarray, N: int, annulus=None):
        """Fourier coefficients from samples at the M-th roots of unity."""
        values = np.asarray(values, dtype=complex)
        M = values.size
        if M < 2 * N + 1:
            raise ValueError("not enough samples to resolve degree N")
        f = np.fft.fft(values) / M
        idx = np.arange(-N, N + 1) % M
        return cls(_chop(f[idx]), N, annulus)

    @classmethod
    def from_function(cls, func, N: int, annulus=None, oversample: int = 4):
        M = _fft_size(oversample * (2 * N + 1))
        z = np.exp(2j * np.pi * np.arange(M) / M)
        return cls.from_samples(func(z), N, annulus)

    # access
    def coeff(self, d: int) -> complex:
        if abs(d) > self.N:
            return 0j
        return complex(self.coeffs[d + self.N])

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    def _like(self, c) -> "CircleSeries":
        return CircleSeries(c, self.N, self.annulus)

    def _check(self, other: "CircleSeries"):
        if other.N != self.N:
            raise ValueError(f"degree mismatch {self.N} vs {other.N}")

    # arithmetic
    def __add__(self, other):
        if isinstance(other, CircleSeries):
            self._check(other)
            return self._like(self.coeffs + other.coeffs)
        c = self.coeffs.copy()
        c[self.N] += other
        return self._like(c)

    __radd__ = __add__

    def __neg__(self):
        return self._like(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, CircleSeries):
            self._check(other)
            full = np.convolve(self.coeffs, other.coeffs)
            return self._like(full[self.N:3 * self.N + 1])
        return self._like(self.coeffs * other)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self._like(self.coeffs / scalar)

    def shift(self, k: int) -> "CircleSeries":
        """Multiply by z^k, dropping modes pushed out of range."""
        c = np.zeros_like(self.coeffs)
        N = self.N
        lo, hi = max(-N, -N + k), min(N, N + k)
        if lo <= hi:
            c[lo + N:hi + N + 1] = self.coeffs[lo - k + N:hi - k + N + 1]
        return self._like(c)

    def conj_on_circle(self) -> "CircleSeries":
        """The series equal to conj(f) on T: c_d -> conj(c_{-d})."""
        return self._like(np.conj(self.coeffs[::-1]))

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.coeffs - np.conj(self.coeffs[::-1]))))

    def tail_mass(self, width: int = 4) -> float:
        c = np.abs(self.coeffs)
        tot = c.sum()
        if tot == 0:
            return 0.0
        return float((c[:width].sum() + c[-width:].sum()) / tot)

    # evaluation
    def evaluate(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, complex)
        N = self.N
        # split to keep powers bounded: nonnegative part in z, negative in 1/z
        pos = self.coeffs[N:]
        neg = self.coeffs[:N][::-1]  # modes -1, -2, ...
        for c in pos[::-1]:
            out = out * z + c
        if N:
            iz = 1.0 / z
            acc = np.zeros(z.shape, complex)
            for c in neg[::-1]:
                acc = acc * iz + c
            out = out + acc * iz
        return out if out.ndim else complex(out)

    def at_infinity(self) -> complex:
        """Limit at infinity; meaningful for series with modes d <= 0."""
        return self.coeff(0)

    def samples(self, M: int | None = None) -> np.ndarray:
        """Values at the M-th roots of unity (inverse of from_samples)."""
        if M is None:
            M = _fft_size(4 * (2 * self.N + 1))
        buf = np.zeros(M, complex)
        # modes that alias onto the same bin add up (M may be below 2N+1)
        np.add.at(buf, np.arange(-self.N, self.N + 1) % M, self.coeffs)
        return np.fft.ifft(buf) * M

    def sup_on_circle(self, radius: float = 1.0, M: int | None = None) -> float:
        if M is None:
            M = max(4 * self.N, 64)
        z = radius * np.exp(2j * np.pi * np.arange(M) / M)
        return float(np.max(np.abs(self.evaluate(z))))

    def sup_on_annulus(self, rho: float, M: int | None = None) -> float:
        return max(self.sup_on_circle(rho, M), self.sup_on_circle(1.0 / rho, M))

    # pointwise functions via sampling on T, then Newton polish where cheap
    def apply(self, func) -> "CircleSeries":
        vals = self.samples()
        return CircleSeries.from_samples(func(vals), self.N, self.annulus)

    def inverse(self) -> "CircleSeries":
        vals = self.samples()
        if np.min(np.abs(vals)) == 0:
            raise ZeroDivisionError("series vanishes on the unit circle")
        y = CircleSeries.from_samples(1.0 / vals, self.N, self.annulus)
        for _ in range(2):
            y = y * (2.0 - self * y)
        return y

    def log(self) -> "CircleSeries":
        vals = self.samples()
        return CircleSeries.from_samples(np.log(vals), self.N, self.annulus)

    def exp(self) -> "CircleSeries":
        return series_exp(self)

    # serialization
    def to_text(self) -> str:
        sig = self.annulus.sigma if self.annulus else 0.0
        lines = [f"# circle {self.N} {float(sig)!r}"]
        for d, c in zip(self.modes, self.coeffs):
            if c != 0:
                lines.append(f"{d} {float(c.real)!r} {float(c.imag)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CircleSeries":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = lines[0].split()
        if head[:2] != ["#", "circle"]:
            raise ValueError("missing '# circle N sigma' header")
        N, sig = int(head[2]), float(head[3])
        ann = AnnulusSpec.from_sigma(sig) if 0 < sig < 1 else None
        c = np.zeros(2 * N + 1, complex)
        for ln in lines[1:]:
            d, re, im = ln.split()
            c[int(d) + N] = complex(float(re), float(im))
        return cls(c, N, ann)

    def to_triplets(self) -> list:
        return [[int(d), float(c.real), float(c.imag)]
                for d, c in zip(self.modes, self.coeffs) if c != 0]

    @classmethod
    def from_triplets(cls, rows, N, annulus=None):
        return cls.from_dict({int(d): complex(re, im) for d, re, im in rows}, N, annulus)


def series_exp(f: CircleSeries, monitor: bool = True) -> CircleSeries:
    """exp of a truncated series by scaling and squaring.

    The Taylor part runs on f / 2^k with |f / 2^k| <= 1/2 on T; the squarings
    are truncated products, so one-sided mode supports are preserved exactly.
    """
    bound = float(np.sum(np.abs(f.coeffs)))
    k = max(0, int(math.ceil(math.log2(bound / 0.5)))) if bound > 0.5 else 0
    g = f / (2.0 ** k)
    term = CircleSeries.constant(1.0, f.N, f.annulus)
    acc = term
    for n in range(1, 40):
        term = term * g / n
        acc = acc + term
        if np.max(np.abs(term.coeffs)) < 1e-18 * np.max(np.abs(acc.coeffs)):
            break
    for _ in range(k):
        acc = acc * acc
    if monitor and acc.tail_mass() > TAIL_REL:
        warnings.warn(f"series exponential tail mass {acc.tail_mass():.2e} exceeds {TAIL_REL:g}",
                      RuntimeWarning, stacklevel=2)
    return acc


# ---------------------------------------------------------------------------
# polarized series


def _binom_row(d: int, K: int, scale: float) -> np.ndarray:
    """Coefficients of (1 + scale*t)^(-d) in t up to degree K."""
    b = np.empty(K + 1)
    b[0] = 1.0
    for n in range(1, K + 1):
        b[n] = b[n - 1] * (-d - n + 1) / n * scale
    return b


@dataclass(frozen=True, eq=False)
class PolarizedSeries:
    """sum c[j, n] z^j t^n with t = (z*conj(w) - 1)/s_scale.

    coeffs has shape (2N+1, K+1); row j+N holds the z^j coefficients.
    sigma tags the scale of the polarized annulus the series is meant for.
    """

    coeffs: np.ndarray
    N: int
    K: int
    s_scale: float
    sigma: float
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (2 * self.N + 1, self.K + 1):
            raise ValueError(f"coefficient shape {c.shape} does not match N={self.N}, K={self.K}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # construction
    @classmethod
    def zeros(cls, N, K, s_scale, sigma):
        return cls(np.zeros((2 * N + 1, K + 1), complex), N, K, s_scale, sigma)

    def zeros_like(self):
        return PolarizedSeries.zeros(self.N, self.K, self.s_scale, self.sigma)

    def _like(self, c, sigma=None) -> "PolarizedSeries":
        return PolarizedSeries(c, self.N, self.K, self.s_scale,
                               self.sigma if sigma is None else sigma)

    @classmethod
    def from_zs(cls, terms: dict, N, K, s_scale, sigma):
        """Build from {(j, n): c} meaning c z^j s^n (unscaled s)."""
        c = np.zeros((2 * N + 1, K + 1), complex)
        for (j, n), v in terms.items():
            if abs(j) <= N and 0 <= n <= K:
                c[j + N, n] += v * s_scale ** n
        return cls(c, N, K, s_scale, sigma)

    @classmethod
    def from_monomials(cls, terms: dict, N, K, s_scale, sigma):
        """Build from {(j, k): c} meaning c z^j conj(w)^k.

        z^j conj(w)^k = z^(j-k) (1+s)^k; negative k gives the binomial series.
        """
        c = np.zeros((2 * N + 1, K + 1), complex)
        for (j, k), v in terms.items():
            d = j - k
            if abs(d) > N:
                raise ValueError(f"monomial z^{j} wbar^{k} leaves z-range [-{N}, {N}]")
            c[d + N] += v * _binom_row(-k, K, s_scale)
        return cls(c, N, K, s_scale, sigma)

    @classmethod
    def constant(cls, value, N, K, s_scale, sigma):
        return cls.from_zs({(0, 0): value}, N, K, s_scale, sigma)

    # access
    def coeff_zs(self, j: int, n: int) -> complex:
        """Coefficient of z^j s^n in unscaled s."""
        return complex(self.coeffs[j + self.N, n] / self.s_scale ** n)

    def _check(self, other: "PolarizedSeries"):
        if (other.N, other.K) != (self.N, self.K) or other.s_scale != self.s_scale:
            raise ValueError("incompatible polarized series layouts")

    # arithmetic
    def __add__(self, other):
        if isinstance(other, PolarizedSeries):
            self._check(other)
            return self._like(self.coeffs + other.coeffs, min(self.sigma, other.sigma))
        c = self.coeffs.copy()
        c[self.N, 0] += other
        return self._like(c)

    __radd__ = __add__

    def __neg__(self):
        return self._like(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, PolarizedSeries):
            return multiply(self, other)
        return self._like(self.coeffs * other)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self._like(self.coeffs / scalar)

    def with_sigma(self, sigma: float) -> "PolarizedSeries":
        return self._like(self.coeffs, sigma)

    def times_one_minus_q(self) -> "PolarizedSeries":
        """Multiply by (1 - z*conj w) = -s_scale * t."""
        c = np.zeros_like(self.coeffs)
        c[:, 1:] = -self.s_scale * self.coeffs[:, :-1]
        return self._like(c)

    def dz(self) -> "PolarizedSeries":
        """Holomorphic derivative in z at fixed conj(w)."""
        N, K, h = self.N, self.K, self.s_scale
        j = np.arange(-N, N + 1)[:, None]
        n = np.arange(K + 1)[None, :]
        a = self.coeffs
        inner = (j + n) * a            # j t^n + n t^n
        inner = inner.astype(complex)
        inner[:, :-1] += (n[:, 1:] / h) * a[:, 1:]   # n t^(n-1) / h
        c = np.zeros_like(a)
        c[:-1] = inner[1:]             # times z^-1
        return self._like(c)

    # evaluation
    def _t_poly(self, z: np.ndarray) -> np.ndarray:
        """For each z, the coefficient vector of the polynomial in t."""
        N = self.N
        z = np.asarray(z, dtype=complex).ravel()
        r = np.abs(z)
        # z^j with j in [-N, N], assembled from |z|^j e^{ij theta} to avoid overflow
        j = np.arange(-N, N + 1)
        V = np.exp(np.outer(np.log(r), j) + 1j * np.outer(np.angle(z), j))
        return V @ self.coeffs

    def _horner_t(self, A: np.ndarray, t: np.ndarray) -> np.ndarray:
        val = np.zeros(t.shape, complex) + A[:, self.K][:, None]
        for n in range(self.K - 1, -1, -1):
            val = val * t + A[:, n][:, None]
        return val

    def evaluate(self, z, w):
        """Value at (z, conj w)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        w = np.broadcast_to(np.asarray(w, dtype=complex), z.shape)
        t = (z * np.conj(w) - 1.0) / self.s_scale
        A = self._t_poly(z)
        out = self._horner_t(A, t.ravel()[:, None])[:, 0]
        return out.reshape(z.shape)

    def max_t(self, sigma: float) -> float:
        ann = AnnulusSpec.from_sigma(sigma)
        return polar_s_radius(ann) / self.s_scale

    def tail_mass(self, width: int = 4) -> float:
        c = np.abs(self.coeffs)
        tot = c.sum()
        if tot == 0:
            return 0.0
        return float((c[:width].sum() + c[-width:].sum()) / tot)

    # torus sampling used by nonlinear operations
    def torus_shape(self):
        return _fft_size(2 * (2 * self.N + 1)), _fft_size(2 * (self.K + 1))

    def torus_values(self) -> np.ndarray:
        Mz, Mt = self.torus_shape()
        buf = np.zeros((Mz, Mt), complex)
        buf[np.arange(-self.N, self.N + 1) % Mz, :self.K + 1] = self.coeffs
        return np.fft.ifft2(buf) * (Mz * Mt)

    def from_torus_values(self, vals: np.ndarray, sigma=None) -> "PolarizedSeries":
        return _from_torus(vals, self.N, self.K, self.s_scale,
                           self.sigma if sigma is None else sigma)

    def apply(self, func) -> "PolarizedSeries":
        return self.from_torus_values(func(self.torus_values()))

    def inverse(self, polish: int = 2) -> "PolarizedSeries":
        vals = self.torus_values()
        if np.min(np.abs(vals)) < 1e-300:
            raise ZeroDivisionError("series vanishes on the sampling torus")
        y = self.from_torus_values(1.0 / vals)
        for _ in range(polish):
            y = y + y * (1.0 - self * y)
        return y

    def sqrt(self, polish: int = 2) -> "PolarizedSeries":
        """Principal square root; requires Re > 0 on the sampling torus."""
        vals = self.torus_values()
        if np.min(vals.real) <= 0:
            raise ValueError("square root needs a positive real part on the sampling torus")
        y = self.from_torus_values(np.sqrt(vals))
        for _ in range(polish):
            y = 0.5 * (y + self * y.inverse())
        return y

    # serialization
    def to_text(self) -> str:
        lines = [f"# polar {self.N} {float(self.sigma)!r} {self.K} {float(self.s_scale)!r}"]
        for j in range(-self.N, self.N + 1):
            row = self.coeffs[j + self.N]
            for n in np.nonzero(row)[0]:
                c = row[n]
                lines.append(f"{j} {n} {float(c.real)!r} {float(c.imag)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PolarizedSeries":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = lines[0].split()
        if head[:2] != ["#", "polar"]:
            raise ValueError("missing '# polar N sigma' header")
        N, sigma = int(head[2]), float(head[3])
        K = int(head[4]) if len(head) > 4 else N
        h = float(head[5]) if len(head) > 5 else 1.0
        c = np.zeros((2 * N + 1, K + 1), complex)
        for ln in lines[1:]:
            j, n, re, im = ln.split()
            c[int(j) + N, int(n)] = complex(float(re), float(im))
        return cls(c, N, K, h, sigma)


def _from_torus(vals, N, K, s_scale, sigma) -> PolarizedSeries:
    Mz, Mt = vals.shape
    f = np.fft.fft2(vals) / (Mz * Mt)
    c = _chop(f[np.arange(-N, N + 1) % Mz, :K + 1])
    return PolarizedSeries(c, N, K, s_scale, sigma)


def torus_points(N, K, s_scale):
    """Sampling torus (z, conj w) for layout (N, K, s_scale)."""
    Mz, Mt = _fft_size(2 * (2 * N + 1)), _fft_size(2 * (K + 1))
    z = np.exp(2j * np.pi * np.arange(Mz) / Mz)[:, None]
    t = np.exp(2j * np.pi * np.arange(Mt) / Mt)[None, :]
    u = (1.0 + s_scale * t) / z
    return z, u


def from_evaluator(func, N, K, s_scale, sigma) -> PolarizedSeries:
    """Coefficients of (z, u) -> func(z, u), u standing for conj(w)."""
    z, u = torus_points(N, K, s_scale)
    vals = func(np.broadcast_to(z, u.shape), u)
    return _from_torus(np.asarray(vals, dtype=complex), N, K, s_scale, sigma)


def polar_s_radius(ann: AnnulusSpec) -> float:
    """Largest |z conj(w) - 1| over the sampled polarized annulus of scale ann.sigma."""
    z, w, ok = _sup_grid(ann.sigma, 16, n_radii=16, n_offsets=(16, 64))
    s = np.abs(z[:, None] * np.conj(w) - 1.0)
    return float(np.max(np.where(ok, s, 0.0)))


def lift_z(f: CircleSeries, K: int, s_scale: float, sigma: float) -> PolarizedSeries:
    """The polarization of a function holomorphic in z: (z, w) -> f(z)."""
    c = np.zeros((2 * f.N + 1, K + 1), complex)
    c[:, 0] = f.coeffs
    return PolarizedSeries(c, f.N, K, s_scale, sigma)


def lift_winv(f: CircleSeries, K: int, s_scale: float, sigma: float) -> PolarizedSeries:
    """(z, w) -> f(1/conj w), i.e. sum f_d z^d (1+s)^(-d)."""
    N = f.N
    c = np.zeros((2 * N + 1, K + 1), complex)
    scale = float(np.max(np.abs(f.coeffs)))
    for d in range(-N, N + 1):
        fd = f.coeffs[d + N]
        if fd == 0:
            continue
        # (1+s)^(-d) for large d > 0 is a slowly converging binomial series
        # that degree K cannot resolve; round-off sized modes would be blown
        # up by it, so modes at the chop level are dropped
        if abs(fd) < LIFT_CHOP * scale:
            continue
        row = _binom_row(d, K, s_scale)
        c[d + N] = fd * row
    return PolarizedSeries(c, N, K, s_scale, sigma)


# ---------------------------------------------------------------------------
# module-level operations


def multiply(a: PolarizedSeries, b: PolarizedSeries) -> PolarizedSeries:
    """Truncated product.

    The z index is convolved directly (rows that are exactly zero stay zero,
    so sparse mode structure is kept free of round-off); the s index goes
    through an FFT, which is harmless there.
    """
    a._check(b)
    N, K = a.N, a.K
    Mt = _fft_size(2 * K + 1)
    ra = np.nonzero(np.any(a.coeffs != 0, axis=1))[0]
    rb = np.nonzero(np.any(b.coeffs != 0, axis=1))[0]
    if len(ra) > len(rb):
        a, b, ra, rb = b, a, rb, ra
    out = np.zeros((2 * N + 1, Mt), complex)
    if len(ra):
        Af = np.fft.fft(a.coeffs[ra], n=Mt, axis=1)
        Bf = np.fft.fft(b.coeffs, n=Mt, axis=1)
        for row, i in zip(Af, ra):
            j1 = i - N
            lo, hi = max(-N, -N + j1), min(N, N + j1)  # target modes j = j1 + j2
            if lo > hi:
                continue
            out[lo + N:hi + N + 1] += row[None, :] * Bf[lo - j1 + N:hi - j1 + N + 1]
    c = np.fft.ifft(out, axis=1)[:, :K + 1]
    return a._like(c, min(a.sigma, b.sigma))


def dbar_keep(a: PolarizedSeries) -> PolarizedSeries:
    """dbar_w without the scale bookkeeping (for fixed-scale model data)."""
    N, K, h = a.N, a.K, a.s_scale
    c = np.zeros_like(a.coeffs)
    n = np.arange(1, K + 1)
    c[1:, :-1] = a.coeffs[:-1, 1:] * (n / h)
    return a._like(c)


def dbar_w(a: PolarizedSeries, sigma_out: float) -> PolarizedSeries:
    """Derivative in conj(w): d/du of z^j s^n is n z^(j+1) s^(n-1)."""
    if not sigma_out < a.sigma:
        raise ValueError(f"dbar_w needs sigma_out < {a.sigma}, got {sigma_out}")
    return dbar_keep(a).with_sigma(sigma_out)


def restrict_diagonal(a: PolarizedSeries, z):
    """f(z) = f(z, z); warns outside the annulus of a.sigma."""
    zz = np.atleast_1d(np.asarray(z, dtype=complex))
    ann = AnnulusSpec.from_sigma(a.sigma)
    r = np.abs(zz)
    if np.any(r < ann.rho * (1 - 1e-12)) or np.any(r > ann.outer * (1 + 1e-12)):
        warnings.warn("restrict_diagonal outside the annulus of validity", RuntimeWarning,
                      stacklevel=2)
    out = a.evaluate(zz, zz)
    return out if np.ndim(z) else complex(out[0])


def restrict_circle(a: PolarizedSeries) -> CircleSeries:
    """z -> f(z, 1/conj z), the s = 0 column."""
    return CircleSeries(a.coeffs[:, 0].copy(), a.N, AnnulusSpec.from_sigma(a.sigma))


def divisibility_defect(a: PolarizedSeries) -> float:
    return float(np.max(np.abs(a.coeffs[:, 0])))


def weierstrass_divide(a: PolarizedSeries, tol: float = 1e-9) -> PolarizedSeries:
    """g with (1 - z conj w) g = a.

    tol is relative to the largest coefficient of a; the s = 0 column is the
    divisibility defect (it is the restriction of a to T).
    """
    scale = float(np.max(np.abs(a.coeffs))) or 1.0
    defect = divisibility_defect(a)
    if defect > tol * scale:
        raise ValueError(f"not divisible by (1 - z*conj(w)): defect {defect:.3e} "
                         f"(relative {defect / scale:.3e} > {tol:g})")
    c = np.zeros_like(a.coeffs)
    c[:, :-1] = -a.coeffs[:, 1:] / a.s_scale
    return a._like(c)


def _sup_grid(sigma: float, N: int, n_radii: int = 8, n_offsets=(4, 16)):
    ann = AnnulusSpec.from_sigma(sigma)
    radii = np.geomspace(ann.rho, ann.outer, n_radii)
    M = max(4 * N, 64)
    ang = 2 * np.pi * np.arange(M) / M
    z = (radii[:, None] * np.exp(1j * ang)[None, :]).ravel()
    nr, na = n_offsets
    rr = 2 * sigma * (1 - 1e-9) * np.arange(1, nr + 1) / nr
    aa = 2 * np.pi * np.arange(na) / na
    delta = np.concatenate([[0j], (rr[:, None] * np.exp(1j * aa)[None, :]).ravel()])
    w = z[:, None] + delta[None, :]
    rw = np.abs(w)
    ok = (rw >= ann.rho * (1 - 1e-12)) & (rw <= ann.outer * (1 + 1e-12))
    return z, w, ok


def sup_norm(a: PolarizedSeries, sigma: float | None = None) -> float:
    """Sampled sup of |a| over the polarized annulus of scale sigma."""
    if sigma is None:
        sigma = a.sigma
    if sigma > a.sigma * (1 + 1e-12):
        raise ValueError(f"sup_norm at sigma={sigma} exceeds the series scale {a.sigma}")
    z, w, ok = _sup_grid(sigma, a.N)
    t = (z[:, None] * np.conj(w) - 1.0) / a.s_scale
    A = a._t_poly(z)
    vals = np.abs(a._horner_t(A, t))
    return float(np.max(np.where(ok, vals, 0.0)))


def sup_norm_many(series: list, sigma: float) -> list:
    return [sup_norm(s, sigma) for s in series]
