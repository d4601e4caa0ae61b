"""Every numerical threshold the package checks against, in one table.

Each entry names the module that owns the invariant so failure messages can
point at it.  Values are absolute unless the description says relative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerance:
    name: str
    value: float
    module: str
    description: str


_TABLE = [
    Tolerance("rho_identity", 1e-15, "polar_series", "|1/rho - rho - 2 sigma|, absolute"),
    Tolerance("tail_mass", 1e-14, "polar_series", "tail coefficient mass over total mass"),
    Tolerance("multiply_back", 1e-12, "polar_series",
              "(1 - z conj w) g - a on sigma0/2, relative to |a| on sigma0"),
    Tolerance("divisibility", 1e-9, "polar_series", "circle restriction allowed before division, relative"),
    Tolerance("cauchy_constant", 6.0 * 1.05, "polar_series", "Cauchy estimate constant with 5% slack"),
    Tolerance("herglotz_real_part", 1e-12, "circle_ops", "Re Herglotz(f) - f on T"),
    Tolerance("herglotz_membership", 1e-10, "circle_ops", "wrong-side coefficients in the jump solve"),
    Tolerance("split_constant", 3.0, "circle_ops", "sigma |f^pm|_inf / |f|_sigma"),
    Tolerance("polarize_reconstruction", 1e-10, "potential", "held-out reconstruction error"),
    Tolerance("R_circle", 1e-10, "potential", "R and dbar R restricted to T"),
    Tolerance("Rhat_square", 1e-10, "potential", "Rhat^2 - R on sigma0/2"),
    Tolerance("H_boundary", 1e-10, "potential", "|H_R|^2 - pi^(-1/2) (Delta R)^(1/2) on T"),
    Tolerance("dbar_Rhat_boundary", 1e-8, "potential", "dbar Rhat - sqrt(pi/2) zeta |H_R|^2 on T"),
    Tolerance("W_reconstruction", 1e-9, "potential", "W_R defining identity on sigma0/2"),
    Tolerance("defining_relation", 1e-10, "expansion", "B~ - B0 - T[B~]/m - E_m, relative"),
    Tolerance("residual_floor", 1e-8, "expansion", "floor of the Laurent residual tolerance"),
    Tolerance("radial_F", 1e-8, "expansion", "radial Gaussian |F~ - 1|"),
    Tolerance("projector_algebra", 0.0, "circle_ops", "P^2 = P and complementary sums, coefficient exact"),
    Tolerance("calcex_inequalities", 0.0, "expansion", "eta bounds at 1000 samples for 4 values of beta"),
    Tolerance("a1_normalization", 0.0, "potential", "a1 H_R(inf) - 1, exact"),
    Tolerance("R_positive_off_T", 0.0, "potential", "diagonal R > 0 at |w| in {0.8, 0.9, 1.1, 1.25}"),
    Tolerance("laurent_identity", 1e-8, "expansion",
              "Laurent residual; the run limit is max(1e-8, 10 |E_m| sup|dbar R|)"),
    Tolerance("F_at_infinity", 0.0, "expansion", "F~(inf) - 1, exact"),
    Tolerance("A_exterior_modes", 0.0, "expansion", "A~ coefficients at d >= 0, exact"),
    Tolerance("orthogonality_exponent", 0.25, "oracle",
              "orthogonality residual must be below 2^(-exponent * precision)"),
]

TOLERANCES = {t.name: t for t in _TABLE}


def tol(name: str) -> float:
    return TOLERANCES[name].value


def failure(name: str, measured: float, limit: float | None = None) -> str:
    t = TOLERANCES.get(name, Tolerance(name, math.nan, "?", ""))
    if limit is None:
        limit = t.value
    return f"[{t.module}] {t.name}: measured {measured:.3e} > {limit:.3e} ({t.description})"


def table_text() -> str:
    rows = [f"{t.name:26s} {t.value:10.3e}  {t.module:13s} {t.description}" for t in _TABLE]
    return "\n".join(rows)
