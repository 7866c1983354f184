"""Acceptance suite: thirteen criteria driven by frozen JSON configs and pilot bands.

A config directory holds ``cNN.json`` per criterion and ``bands.json`` with the
pilot-calibrated bands. A missing or broken config is reported as an error for
that criterion while the others still run. A criterion whose config carries
``"known_failure"`` is reported as ``XFAIL`` when it fails and as ``XPASS``
(counted as a failure) when it unexpectedly passes.
"""

from __future__ import annotations

import math
import sys
import tempfile
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .covariance import (gram_matrix, log_grid, make_covariance, psd_check, schur_gram, variogram,
                         variogram_bound_fit, zonal_eval)
from .fieldsim import cholesky_draws, kl_draws, modulus_experiment
from .io import read_json, write_json
from .jacobi import analyze_coefficients
from .rng import ordered_map, task_stream
from .slnd import bump_construct, bump_n_max, bump_verify, slnd_experiment
from .spaces import PointConfiguration, kl_dimension_h, parse_space, random_configuration, random_point
from .spectra import (polynomial_asymptotic_constant, polynomial_coefficients, polynomial_function,
                      powerlaw_spectrum, sine_power_asymptotic_constant, sine_power_coefficients,
                      sine_power_spectrum)

CRITERIA = tuple(range(1, 14))


@dataclass
class CriterionResult:
    id: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0
    known_failure: str | None = None
    error: bool = False
    data: dict = field(default_factory=dict, repr=False)

    @property
    def verdict(self) -> str:
        if self.error:
            return "ERROR"
        if self.known_failure:
            return "XPASS" if self.passed else "XFAIL"
        return "PASS" if self.passed else "FAIL"

    @property
    def ok(self) -> bool:
        return self.verdict in ("PASS", "XFAIL")

    def line(self) -> str:
        extra = f" [known: {self.known_failure}]" if self.known_failure else ""
        return f"criterion {self.id:2d} {self.verdict:5s} {self.title}: {self.detail} ({self.seconds:.1f} s){extra}"


def default_config_dir() -> Path:
    return Path(resources.files("twopoint") / "data" / "acceptance")


def _spectrum(name: str, space, nu: float):
    if name == "powerlaw":
        return powerlaw_spectrum(nu, 128)
    if name == "sine_power":
        return sine_power_spectrum(space, nu, 128)
    raise ValueError(f"unknown spectrum {name!r}")


def _in_band(x, band) -> bool:
    return band[0] <= x <= band[1]


# -- criteria ------------------------------------------------------------------------------------

def c01(cfg, bands):
    """Closed form against adaptive quadrature for the sine-power coefficients."""
    worst, fails = 0.0, []
    n = np.arange(cfg["n_max"] + 1)
    for pair in cfg["pairs"]:
        for nu in cfg["nus"]:
            g = lambda t, nu=nu: np.sin(t / 2) ** nu
            quad = analyze_coefficients(g, tuple(pair), cfg["n_max"], policy="adaptive", tol=cfg["quad_tol"]).values
            exact = sine_power_coefficients(tuple(pair), nu, n)
            rel = np.abs(quad - exact) / np.abs(exact)
            worst = max(worst, float(rel.max()))
            if rel.max() > cfg["rtol"]:
                fails.append(f"{tuple(pair)} nu={nu}: {rel.max():.1e} from n={int(np.argmax(rel > cfg['rtol']))}")
    detail = f"max relative error {worst:.2e} (tol {cfg['rtol']:g})"
    if fails:
        detail += "; over tolerance: " + ", ".join(fails)
    return not fails, detail, {"worst": worst, "fails": fails}


def c02(cfg, bands):
    """``n^(1+nu) b_n`` against the asymptotic constant."""
    n, lo, hi = cfg["n"], *cfg["band"]
    ratios = []
    for pair in cfg["pairs"]:
        for nu in cfg["nus"]:
            b = sine_power_coefficients(tuple(pair), nu, np.array([float(n)]))[0]
            ratios.append(abs(n ** (nu + 1) * b / sine_power_asymptotic_constant(tuple(pair), nu)))
    ratios = np.array(ratios)
    ok = bool(np.all((ratios >= lo) & (ratios <= hi)))
    return ok, f"ratios in [{ratios.min():.5f}, {ratios.max():.5f}] at n={n} (band [{lo}, {hi}])", {}


def c03(cfg, bands):
    """Polynomial covariance: printed value of ``b_1``, quadrature, asymptotic constants."""
    alpha, beta = cfg["pair"]
    b1 = float(polynomial_coefficients(alpha, "p0", 1)[0])
    target = cfg["value"][0] / cfg["value"][1]
    closed_ok = abs(b1 - target) <= cfg["closed_tol"]
    quad = analyze_coefficients(polynomial_function("p0"), (alpha, beta), 1, policy="adaptive", tol=1e-13).values[1]
    quad_ok = abs(b1 - quad) <= cfg["quad_tol"]
    n = cfg["n_asym"]
    asym = []
    for a in cfg["alphas"]:
        for which, power in (("p0", 2), ("p1", 4)):
            b = float(polynomial_coefficients(a, which, n)[0])
            asym.append(n ** power * b / polynomial_asymptotic_constant(a, which))
    asym = np.array(asym)
    asym_ok = bool(np.all(np.abs(asym - 1) <= cfg["asym_rel"]))
    detail = (f"b_1 closed form {b1:.12g} vs {cfg['value'][0]}/{cfg['value'][1]} = {target:.12g} "
              f"({'ok' if closed_ok else 'MISMATCH'}); quadrature {quad:.12g} "
              f"({'ok' if quad_ok else 'MISMATCH'}); asymptotic ratios in [{asym.min():.4f}, {asym.max():.4f}]")
    return closed_ok and quad_ok and asym_ok, detail, {"b1": b1, "quad": quad}


def c04(cfg, bands):
    """Truncated variogram equals ``sin^nu(t/2)`` under a pointwise certificate."""
    m = cfg["grid"]
    thetas = (np.arange(1, m + 1) - 0.5) * math.pi / m
    worst, Ls = 0.0, []
    for s in cfg["spaces"]:
        space = parse_space(s)
        for nu in cfg["nus"]:
            model = make_covariance(space, sine_power_spectrum(space, nu, 128), tail_tol=cfg["tol"], thetas=thetas)
            err = np.abs(variogram(model, thetas) - np.sin(thetas / 2) ** nu)
            worst = max(worst, float(err.max()))
            Ls.append(model.L)
    return worst <= cfg["tol"], f"max |gamma - sin^nu| = {worst:.2e} (tol {cfg['tol']:g}), L up to {max(Ls)}", {}


def c05(cfg, bands):
    """``gamma(rho) / rho^nu`` stays in the band ``[0.494^nu - slack, 0.5^nu + slack]``."""
    space = parse_space(cfg["space"])
    lo_rho, hi_rho = cfg["rho"]
    rho = log_grid(hi_rho, cfg["grid"], decades=math.log10(hi_rho / lo_rho))
    fails, spans = [], []
    for nu in cfg["nus"]:
        model = make_covariance(space, sine_power_spectrum(space, nu, 128),
                                tail_tol=cfg["truncation"] * rho ** nu, thetas=rho)
        rep = variogram_bound_fit(model, nu, hi_rho, rho=rho)
        band = (0.494 ** nu - cfg["slack"], 0.5 ** nu + cfg["slack"])
        spans.append(f"nu={nu}: [{rep.K1:.5f}, {rep.K2:.5f}]")
        if not (rep.K1 >= band[0] and rep.K2 <= band[1]):
            fails.append(nu)
    return not fails, "; ".join(spans), {}


def c06(cfg, bands):
    """Eigenspace dimensions on the 2- and 3-sphere."""
    l_max = cfg["l_max"]
    s2, s3 = parse_space("sphere:2"), parse_space("sphere:3")
    bad = [l for l in range(l_max + 1) if kl_dimension_h(s2, l) != 2 * l + 1 or kl_dimension_h(s3, l) != (l + 1) ** 2]
    return not bad, f"l <= {l_max}: {'all exact' if not bad else f'mismatch at {bad[:5]}'}", {}


def c07(cfg, bands, threads=1):
    """Gram matrices of random configurations are positive semidefinite."""
    worst = math.inf
    for s in cfg["spaces"]:
        space = parse_space(s)
        for name in cfg["spectra"]:
            model = make_covariance(space, _spectrum(name, space, cfg["nu"]), tail_tol=cfg["tail_tol"])

            def one(i, model=model, space=space):
                conf = random_configuration(space, cfg["size"], task_stream(cfg["seed"], "points", i))
                return psd_check(gram_matrix(model, conf), model.partial_mass).relative

            worst = min(worst, min(ordered_map(one, range(cfg["configs"]), threads)))
    return worst >= -cfg["tol"], f"min eigenvalue / C(0) = {worst:.2e} (floor -{cfg['tol']:g})", {}


def c08(cfg, bands, threads=1):
    """Schur-complement kernel Gram matrices are positive semidefinite."""
    space = parse_space(cfg["space"])
    worst = math.inf
    for name in cfg["spectra"]:
        model = make_covariance(space, _spectrum(name, space, cfg["nu"]), tail_tol=cfg["tail_tol"])

        def one(i, model=model):
            rng = task_stream(cfg["seed"], "points", i)
            conf = random_configuration(space, cfg["size"], rng)
            x0 = random_point(space, rng)
            return psd_check(schur_gram(model, conf, x0), model.partial_mass ** 2).relative

        worst = min(worst, min(ordered_map(one, range(cfg["configs"]), threads)))
    return worst >= -cfg["tol"], f"min eigenvalue / C(0)^2 = {worst:.2e} (floor -{cfg['tol']:g})", {}


def c09(cfg, bands):
    """Bumps: vanishing low coefficients and a stable decay constant across eps."""
    low, spreads = 0.0, []
    for pair in cfg["pairs"]:
        Ms = []
        for eps in cfg["eps"]:
            rec = bump_verify(bump_construct(tuple(pair), cfg["r"], cfg["n0"], eps), bump_n_max(eps, cfg["k_max"]))
            low = max(low, rec.max_low_coeff)
            Ms.append(rec.Mr_hat)
        spreads.append(max(Ms) / min(Ms))
    ok = low <= cfg["low_tol"] and max(spreads) <= cfg["spread"]
    return ok, (f"max low coefficient {low:.1e} (tol {cfg['low_tol']:g}); Mr_hat spread up to "
                f"{max(spreads):.3f} (limit {cfg['spread']:g})"), {"spreads": spreads}


def c10(cfg, bands, threads=1):
    """Conditional variance ratios are positive, monotone in the conditioning set, and in the pilot band."""
    space = parse_space(cfg["space"])
    parts, ok = [], True
    for name in cfg["spectra"]:
        model = make_covariance(space, _spectrum(name, space, cfg["nu"]), tail_tol=cfg["tail_tol"])
        rep = slnd_experiment(model, cfg["nu"], cfg["trials"], cfg["n_max"], cfg["seed"], threads=threads)
        band = bands["slnd"][name]
        good = rep.gamma_hat > 0 and rep.monotone_all and _in_band(rep.gamma_hat, band)
        ok &= good
        parts.append(f"{name}: gamma_hat {rep.gamma_hat:.4f} in [{band[0]:.4f}, {band[1]:.4f}]"
                     f"{'' if good else ' FAILED'}, monotone {rep.monotone_all}")
    return ok, "; ".join(parts), {}


def _fixed_pair(cfg):
    space = parse_space("sphere:2")
    t = cfg["pair_angle"]
    coords = np.array([[0.0, 0.0, 1.0], [math.sin(t), 0.0, math.cos(t)]])
    return space, PointConfiguration(space, coords)


def c11(cfg, bands, threads=1):
    """Karhunen-Loeve and Cholesky samples agree with the model and with each other."""
    space, conf = _fixed_pair(cfg)
    spec = sine_power_spectrum(space, cfg["nu"], cfg["l_max"])
    model = make_covariance(space, spec, L=cfg["l_max"])
    R, k = cfg["replicates"], cfg["se"]
    c0 = model.partial_mass
    cr = float(zonal_eval(model, cfg["pair_angle"]))
    se_var = c0 * math.sqrt(2 / R)
    se_cov = math.sqrt((c0 ** 2 + cr ** 2) / R)
    Zk = kl_draws(spec, conf, cfg["l_max"], cfg["seed"], R, threads)
    Zc = cholesky_draws(model, conf, cfg["seed"] + 1, R, threads)
    z = []
    for Z in (Zk, Zc):
        z.append((np.mean(Z[:, 0] ** 2) - c0) / se_var)
        z.append((np.mean(Z[:, 0] * Z[:, 1]) - cr) / se_cov)
    dk, dc = (Zk[:, 0] - Zk[:, 1]) ** 2, (Zc[:, 0] - Zc[:, 1]) ** 2
    z.append((dk.mean() - dc.mean()) / math.sqrt(dk.var(ddof=1) / R + dc.var(ddof=1) / R))
    z = np.array(z)
    return bool(np.all(np.abs(z) <= k)), ("z-scores (KL var, KL cov, Cholesky var, Cholesky cov, increment "
                                          f"two-sample) = {np.array2string(z, precision=2)}; limit {k}"), {}


def c12(cfg, bands, threads=1):
    """Modulus statistic: flat in eps, narrow band, inside the pilot band."""
    space = parse_space(cfg["space"])
    model = make_covariance(space, sine_power_spectrum(space, cfg["nu"], 128), tail_tol=cfg["tail_tol"])
    rep = modulus_experiment(model, cfg["nu"], cfg["levels"], cfg["replicates"], cfg["seed"], threads=threads)
    lo, hi = rep.band
    pilot = bands["modulus"]["sine_power"]
    s = rep.sup_ratio[rep.nonempty]
    slope_ok = cfg["slope"][0] <= rep.slope <= cfg["slope"][1]
    ratio_ok = hi / lo <= cfg["band_ratio"]
    pilot_ok = bool(np.all((s >= pilot[0]) & (s <= pilot[1])))
    return slope_ok and ratio_ok and pilot_ok, (
        f"slope {rep.slope:.3f} (range {cfg['slope']}), band max/min {hi / lo:.3f} (limit {cfg['band_ratio']}), "
        f"sup ratios in [{lo:.3f}, {hi:.3f}] vs pilot [{pilot[0]:.3f}, {pilot[1]:.3f}]"), {}


def c13(cfg, bands, threads=1):
    """Every experiment gives byte-identical output across reruns and thread counts."""
    from .cli import run

    diffs = []
    with tempfile.TemporaryDirectory() as tmp:
        for j, exp in enumerate(cfg["experiments"]):
            blobs = []
            for rep, th in enumerate(cfg["threads"]):
                out = Path(tmp) / f"{j}_{rep}" / ("out.json" if exp["experiment"] in ("psd_check", "slnd", "modulus")
                                                 else "out.csv")
                c = ExperimentConfig.from_json({**exp, "seed": cfg["seed"], "threads": th, "out": str(out)})
                res = run(c)
                blobs.append(b"".join(Path(p).read_bytes() for p in res.outputs) + str(res.status).encode())
            if any(b != blobs[0] for b in blobs[1:]):
                diffs.append(exp["experiment"])
    names = ", ".join(e["experiment"] for e in cfg["experiments"])
    return not diffs, (f"identical across threads {cfg['threads']} for {names}" if not diffs
                       else f"outputs differ for {', '.join(diffs)}"), {}


RUNNERS = {1: c01, 2: c02, 3: c03, 4: c04, 5: c05, 6: c06, 7: c07, 8: c08, 9: c09, 10: c10, 11: c11, 12: c12,
           13: c13}
THREADED = {7, 8, 10, 11, 12, 13}


def run_criterion(i: int, config_dir=None, threads: int = 1) -> CriterionResult:
    d = Path(config_dir) if config_dir else default_config_dir()
    fn = RUNNERS[i]
    title = (fn.__doc__ or "").strip().splitlines()[0].rstrip(".").replace("``", "")
    t0 = time.perf_counter()
    try:
        cfg = read_json(d / f"c{i:02d}.json")
        bands = read_json(d / "bands.json") if i in (10, 12) else {}
    except (FileNotFoundError, ValueError) as ex:
        return CriterionResult(i, title, False, f"config error: {ex}", error=True)
    try:
        passed, detail, data = fn(cfg, bands, threads) if i in THREADED else fn(cfg, bands)
    except Exception as ex:  # report and move on to the next criterion
        return CriterionResult(i, title, False, f"{type(ex).__name__}: {ex}", time.perf_counter() - t0,
                               cfg.get("known_failure"), error=True)
    return CriterionResult(i, title, bool(passed), detail, time.perf_counter() - t0, cfg.get("known_failure"),
                           data=data)


def run_all(config_dir=None, only=None, threads: int = 1, stream="stdout") -> list[CriterionResult]:
    """Run the criteria in order, printing one line each to ``stream`` (``None`` for silence)."""
    ids = CRITERIA if not only else tuple(int(x) for x in only)
    if stream == "stdout":
        stream = sys.stdout  # looked up at call time so redirection is honoured
    out = []
    for i in ids:
        r = run_criterion(i, config_dir, threads)
        if stream is not None:
            print(r.line(), file=stream, flush=True)
        out.append(r)
    return out


def main(config_dir=None, only=None, out=None, threads=None) -> int:
    ids = None if not only else [s for s in str(only).split(",") if s]
    results = run_all(config_dir, ids, threads or 1)
    bad = [r for r in results if not r.ok]
    print(f"{len(results) - len(bad)}/{len(results)} criteria as expected"
          + (f"; failing: {', '.join(str(r.id) for r in bad)}" if bad else ""))
    if out:
        write_json(out, [{"id": r.id, "title": r.title, "verdict": r.verdict, "detail": r.detail,
                          "seconds": round(r.seconds, 3)} for r in results])
    return 1 if bad else 0
