"""Command line driver: build a model, sweep m, optionally run the oracle.

    softrh --potential elliptic --t 0.2 --m 16 --m 32 --oracle on --out run/
    softrh --config run.cfg --m 64
    softrh --selftest

Outputs go to the --out directory: model.json, artifacts_m{M}.json per m,
report.csv, and samples_m{M}.csv when the oracle is on.  The exit status is
0 iff every invariant check passed, 1 on a failed check, 2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tolerances as T
from .circle_ops import herglotz_exterior, herglotz_jump_solve, project
from .expansion import (Expansion, calcex_bounds, residual_tolerance)
from .polar_series import (CircleSeries, PolarizedSeries, divisibility_defect, dbar_w,
                           restrict_circle, rho_of_sigma, sup_norm, weierstrass_divide)
from .potential import GeometryError, PotentialModel, build_droplet, build_model

log = logging.getLogger("softrh")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    potential: str = "radial_gaussian"
    t: float = 0.0
    geometry_file: str | None = None
    N: int = 64
    sigma0: float | None = None
    m_list: list = field(default_factory=lambda: [16])
    orders: str | int = "auto"
    max_order: int = 8
    oracle: bool = False
    precision: int = 256
    out: str = "softrh_out"

    def validate(self) -> "RunConfig":
        if self.N < 16:
            raise UsageError(f"N must be >= 16, got {self.N}")
        if self.sigma0 is not None and not (0 < self.sigma0 <= 0.5):
            raise UsageError(f"sigma0 must lie in (0, 0.5], got {self.sigma0}")
        if not self.m_list:
            raise UsageError("m_list is empty; pass at least one --m")
        if any(int(m) != m or m <= 0 for m in self.m_list):
            raise UsageError(f"m values must be positive integers, got {self.m_list}")
        if any(b <= a for a, b in zip(self.m_list, self.m_list[1:])):
            raise UsageError(f"m_list must be strictly increasing, got {self.m_list}")
        if self.orders != "auto" and (int(self.orders) < 1 or int(self.orders) > self.max_order):
            raise UsageError(f"orders must be 'auto' or an integer in [1, {self.max_order}]")
        if self.precision < 53:
            raise UsageError("precision must be at least 53 bits")
        if self.potential == "user_file" and not self.geometry_file:
            raise UsageError("potential=user_file needs geometry=<path>")
        return self

    def geometry(self):
        params = {}
        if self.potential == "elliptic":
            params["t"] = self.t
        elif self.potential == "user_file":
            params["path"] = self.geometry_file
        try:
            return build_droplet(self.potential, params)
        except GeometryError as exc:
            raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------------------
# config parsing

_KEYS = {"potential", "t", "geometry", "N", "sigma0", "m", "orders", "max_order",
         "oracle", "precision", "out"}


def _bool(text: str) -> bool:
    v = str(text).strip().lower()
    if v in ("1", "on", "true", "yes"):
        return True
    if v in ("0", "off", "false", "no"):
        return False
    raise UsageError(f"expected on/off, got {text!r}")


def parse_config_text(text: str) -> dict:
    """key = value lines; '#' starts a comment; m takes a comma or space separated list."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        if key == "m":
            out.setdefault("m", []).extend(int(v) for v in value.replace(",", " ").split())
        else:
            out[key] = value
    return out


def build_config(file_values: dict, flags: dict) -> RunConfig:
    """Merge config-file values with command-line flags (flags win)."""
    merged = dict(file_values)
    for k, v in flags.items():
        if v is not None:
            merged[k] = v
    cfg = RunConfig()
    try:
        if "potential" in merged:
            cfg.potential = str(merged["potential"])
        if "t" in merged:
            cfg.t = float(merged["t"])
        if "geometry" in merged:
            cfg.geometry_file = str(merged["geometry"])
        if "N" in merged:
            cfg.N = int(merged["N"])
        if "sigma0" in merged:
            cfg.sigma0 = float(merged["sigma0"])
        if "m" in merged:
            cfg.m_list = [int(m) for m in merged["m"]]
        if "orders" in merged:
            o = str(merged["orders"])
            cfg.orders = "auto" if o == "auto" else int(o)
        if "max_order" in merged:
            cfg.max_order = int(merged["max_order"])
        if "oracle" in merged:
            cfg.oracle = merged["oracle"] if isinstance(merged["oracle"], bool) else _bool(merged["oracle"])
        if "precision" in merged:
            cfg.precision = int(merged["precision"])
        if "out" in merged:
            cfg.out = str(merged["out"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"bad config value: {exc}") from exc
    return cfg.validate()


# ---------------------------------------------------------------------------
# checks


@dataclass
class Check:
    name: str
    measured: float
    limit: float
    passed: bool

    @property
    def message(self):
        return T.failure(self.name, self.measured, self.limit) if not self.passed else ""


def _check(name, measured, limit=None):
    if limit is None:
        limit = T.tol(name)
    measured = float(measured)
    return Check(name, measured, float(limit), bool(measured <= limit))


def model_checks(model: PotentialModel) -> list:
    sig = model.sigma0
    R, Rhat, H = model.R_polar, model.Rhat_polar, model.H_R
    lap = model.laplacian_R_circle.samples(4 * model.N)
    Hs = H.samples(4 * model.N)
    ang = np.exp(2j * np.pi * np.arange(4 * model.N) / (4 * model.N))
    dR_circle = restrict_circle(model.dRhat).samples(4 * model.N)
    checks = [
        _check("R_circle", max(divisibility_defect(R), divisibility_defect(model.dbarR))),
        _check("Rhat_square", sup_norm(Rhat * Rhat - R, sig / 2)),
        _check("H_boundary", np.max(np.abs(np.abs(Hs) ** 2 - np.sqrt(lap.real) / math.sqrt(math.pi)))),
        _check("dbar_Rhat_boundary",
               np.max(np.abs(dR_circle - math.sqrt(math.pi / 2) * ang * np.abs(Hs) ** 2))),
        _check("a1_normalization", abs(model.a1 * model.H_R.at_infinity() - 1.0), 0.0),
    ]
    w = np.concatenate([r * np.exp(2j * np.pi * np.arange(16) / 16) for r in (0.8, 0.9, 1.1, 1.25)])
    rd = model.R_diag(w)
    checks.append(Check("R_positive_off_T", float(-np.min(rd)), 0.0, bool(np.min(rd) > 0)))
    return checks


def artifact_checks(model: PotentialModel, art) -> list:
    res = art.residuals
    return [
        _check("laurent_identity", res["laurent_identity"], residual_tolerance(model, art)),
        _check("defining_relation", res["defining_relation"]),
        _check("F_at_infinity", abs(art.F_approx.at_infinity() - 1.0), 0.0),
        _check("A_exterior_modes", float(np.max(np.abs(art.A_approx.coeffs[art.A_approx.modes >= 0]))), 0.0),
    ]




# ---------------------------------------------------------------------------
# outputs


def _clean(obj):
    """JSON-safe copy with plain floats (numpy scalars and complex handled)."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def dump_json(obj, path: Path):
    path.write_text(json.dumps(_clean(obj), sort_keys=True, indent=1) + "\n", encoding="utf-8")


def model_json(model: PotentialModel, expansion: Expansion) -> dict:
    geo = model.geometry
    return {
        "geometry": {
            "name": geo.name,
            "params": geo.params,
            "varphi": [[k, c] for k, c in sorted(geo.varphi_coeffs.items())],
            "scrQ": [[k, c] for k, c in sorted(geo.scrQ_coeffs.items())],
            "Q": [[j, k, c] for (j, k), c in sorted(geo.Q_poly.items())],
        },
        "N": model.N,
        "K": model.K,
        "sigma0": model.sigma0,
        "s_scale": model.s_scale,
        "growth_margin": model.growth_margin,
        "a1": model.a1,
        "H_R": model.H_R.to_triplets(),
        "laplacian_R": model.laplacian_R_circle.to_triplets(),
        "M1": expansion.M1,
        "term_norms": expansion.norms,
        "B0_norm": expansion.base_norm,
        "diagnostics": model.diagnostics,
    }


REPORT_COLUMNS = ["m", "n", "kappa", "a1", "E_m_norm", "sup_defect_Dm", "norm_ratio",
                  "l2_defect", "oracle_precision_bits"]


def run(config: RunConfig) -> int:
    """Run the sweep described by config; returns the exit status."""
    config.validate()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    geo = config.geometry()
    model = build_model(geo, N=config.N, sigma0=config.sigma0)
    expansion = Expansion(model, max_order=config.max_order)
    dump_json(model_json(model, expansion), out / "model.json")
    checks = model_checks(model)
    rows = []
    for m in config.m_list:
        t0 = time.perf_counter()
        kappa = None if config.orders == "auto" else int(config.orders)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            art = expansion.build(m, kappa=kappa)
        notes = sorted({str(w.message) for w in caught})
        for n in notes:
            log.warning("m=%d: %s", m, n)
        m_checks = artifact_checks(model, art)
        checks += m_checks
        row = {"m": m, "n": m, "kappa": art.kappa, "a1": model.a1, "E_m_norm": art.E_m_norm,
               "sup_defect_Dm": "", "norm_ratio": "", "l2_defect": "", "oracle_precision_bits": ""}
        from .oracle import norm_ratio
        row["norm_ratio"] = norm_ratio(model, art)
        doc = art.to_json(model)
        doc["warnings"] = notes
        doc["checks"] = {c.name: {"measured": c.measured, "limit": c.limit, "passed": c.passed}
                         for c in m_checks}
        if config.oracle:
            from .oracle import compare, run_oracle
            orc = run_oracle(geo, m, precision=config.precision)
            rep = compare(orc, model, art)
            row.update(sup_defect_Dm=rep["sup_defect_Dm"], l2_defect=rep["l2_defect"],
                       oracle_precision_bits=orc.precision)
            doc["oracle"] = {"precision": orc.precision, "orth_residual": orc.orth_residual,
                             "norm": orc.norm, "condition_estimate": orc.condition_estimate,
                             "sup_defect_Dm": rep["sup_defect_Dm"], "l2_defect": rep["l2_defect"],
                             "epsilon": rep["epsilon"]}
            with open(out / f"samples_m{m}.csv", "w", newline="", encoding="utf-8") as fh:
                wr = csv.writer(fh)
                wr.writerow(["re_z", "im_z", "abs_P", "abs_P_approx", "rel_err"])
                for s in rep["samples"]:
                    wr.writerow([repr(float(x)) for x in s])
        dump_json(doc, out / f"artifacts_m{m}.json")
        rows.append(row)
        log.info("m=%d kappa=%d E_m=%.3e (%.1fs)", m, art.kappa, art.E_m_norm, time.perf_counter() - t0)
    with open(out / "report.csv", "w", newline="", encoding="utf-8") as fh:
        wr = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        wr.writeheader()
        for row in rows:
            wr.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                         for k, v in row.items()})
    failed = [c for c in checks if not c.passed]
    for c in failed:
        print("FAIL", c.message, file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# selftest


def operator_suite(rng: np.random.Generator, instances: int = 100) -> list:
    """Projector, Herglotz, jump-solve, calcex, multiply-back and Cauchy-constant checks."""
    checks = []
    sig = rng.uniform(1e-3, 0.999, 10_000)
    rho = np.array([rho_of_sigma(s) for s in sig])
    checks.append(_check("rho_identity", np.max(np.abs(1 / rho - rho - 2 * sig))))

    N = 24
    worst_hg = 0.0
    proj_exact = True
    for _ in range(instances):
        c = rng.normal(size=2 * N + 1) + 1j * rng.normal(size=2 * N + 1)
        f = CircleSeries(c, N)
        for s in ("H2", "H2_0", "H2_minus", "H2_minus_0"):
            p = project(f, s)
            proj_exact &= np.array_equal(project(p, s).coeffs, p.coeffs)
        proj_exact &= np.array_equal((project(f, "H2_0") + project(f, "H2_minus")).coeffs, f.coeffs)
        g = 0.5 * (f + f.conj_on_circle())
        worst_hg = max(worst_hg, float(np.max(np.abs(herglotz_exterior(g).samples(4 * N).real
                                                     - g.samples(4 * N).real))))
    checks.append(Check("projector_algebra", 0.0 if proj_exact else 1.0, 0.0, bool(proj_exact)))
    checks.append(_check("herglotz_real_part", worst_hg))

    worst_mem = 0.0
    for _ in range(instances):
        u = CircleSeries.from_dict({d: 0.2 * complex(*rng.normal(size=2)) for d in range(0, 3)}, N)
        v = CircleSeries.from_dict({d: 0.2 * complex(*rng.normal(size=2)) for d in range(0, 3)}, N)
        G = CircleSeries.from_dict({d: complex(*rng.normal(size=2)) for d in range(-3, 4)}, N)
        C = complex(*rng.normal(size=2))
        f = herglotz_jump_solve(G, u, v, C)
        theta = (u + v.conj_on_circle()).exp()
        jump = theta * f - G
        worst_mem = max(worst_mem, float(np.max(np.abs(f.coeffs[f.modes > 0]))),
                        float(np.max(np.abs(jump.coeffs[(jump.modes < 0) & (np.abs(jump.modes) < N - 8)]))))
    checks.append(_check("herglotz_membership", worst_mem))

    ok = True
    for beta in (-4.0, -2.0, 0.0, 2.0):
        _, b = calcex_bounds(beta, n_samples=1000, seed=int(beta + 10))
        ok &= bool(b["holds"])
    checks.append(Check("calcex_inequalities", 0.0 if ok else 1.0, 0.0, ok))

    Np, K, h, s0 = 12, 12, 0.5, 0.2
    worst_mb, worst_cauchy = 0.0, 0.0
    for _ in range(max(5, instances // 5)):
        terms = {(j, n): complex(*rng.normal(size=2)) * 0.5 ** (abs(j) + n)
                 for j in range(-4, 5) for n in range(0, 4)}
        g = PolarizedSeries.from_zs(terms, Np, K, h, s0)
        a = g.times_one_minus_q()
        back = weierstrass_divide(a).times_one_minus_q()
        worst_mb = max(worst_mb, sup_norm(back - a, s0 / 2) / sup_norm(a, s0))
        s1 = 0.6 * s0
        ratio = sup_norm(dbar_w(g, s1), s1) / (sup_norm(g, s0) / (s0 - s1))
        worst_cauchy = max(worst_cauchy, ratio)
    checks.append(_check("multiply_back", worst_mb))
    checks.append(_check("cauchy_constant", worst_cauchy))
    return checks


def selftest(N: int = 64, seed: int = 0, stream=None) -> int:
    """Operator suites plus model and artifact checks on the built-in families."""
    stream = stream or sys.stdout
    rng = np.random.default_rng(seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rows = [("operators", c) for c in operator_suite(rng)]
    for family, params in (("radial_gaussian", {}), ("elliptic", {"t": 0.2})):
        label = family if not params else f"{family}(t={params['t']})"
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                model = build_model(build_droplet(family, params), N=N)
                exp = Expansion(model)
                arts = [exp.build(m) for m in (16, 64)]
        except (ValueError, RuntimeError) as exc:
            rows.append((label, Check(f"build: {exc}", math.inf, 0.0, False)))
            continue
        rows += [(label, c) for c in model_checks(model)]
        for art in arts:
            rows += [(f"{label} m={art.m}", c) for c in artifact_checks(model, art)]
    width = max(len(r[0]) for r in rows)
    for label, c in rows:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status}  {label:{width}s}  {c.name:24s} {c.measured:11.3e} <= {c.limit:.3e}", file=stream)
    failed = sum(not c.passed for _, c in rows)
    print(f"{len(rows) - failed}/{len(rows)} checks passed", file=stream)
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="softrh", description="Soft Riemann-Hilbert expansion runs.")
    p.add_argument("--config", help="key=value file; flags override its entries")
    p.add_argument("--potential", choices=["radial_gaussian", "elliptic", "user_file"])
    p.add_argument("--t", type=float, help="elliptic deformation parameter, |t| <= 0.3")
    p.add_argument("--geometry", help="droplet file for --potential user_file")
    p.add_argument("--N", type=int, help="truncation degree (>= 16)")
    p.add_argument("--sigma0", type=float, help="base scale in (0, 0.5]")
    p.add_argument("--m", type=int, action="append", help="degree parameter; repeat for a sweep")
    p.add_argument("--orders", help="'auto' for kappa*(m) or a fixed order")
    p.add_argument("--max-order", dest="max_order", type=int, help="Neumann terms to compute")
    p.add_argument("--oracle", choices=["on", "off"])
    p.add_argument("--precision", type=int, help="oracle working precision in bits")
    p.add_argument("--out", help="output directory")
    p.add_argument("--selftest", action="store_true", help="run the property suites and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.selftest:
        return selftest(N=args.N or 64)
    try:
        file_values = {}
        if args.config:
            file_values = parse_config_text(Path(args.config).read_text(encoding="utf-8"))
        flags = {k: getattr(args, k) for k in ("potential", "t", "geometry", "N", "sigma0", "m",
                                                "orders", "max_order", "precision", "out")}
        flags["oracle"] = None if args.oracle is None else args.oracle == "on"
        config = build_config(file_values, flags)
        return run(config)
    except UsageError as exc:
        print(f"softrh: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
