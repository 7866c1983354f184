"""Command line runner: ``twopoint <experiment> [flags]``.

Exit codes: 0 success, 1 numeric or invariant failure, 2 usage or config error.
Every report carries the resolved config (minus ``threads`` and ``out``, which do
not affect results), so reruns with the same seed give byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import EXPERIMENTS, ConfigError, ExperimentConfig
from .covariance import (NuMismatchError, UncertifiedTruncationError, gram_matrix, log_grid, make_covariance,
                         psd_check, variogram, variogram_bound_fit, zonal_eval)
from .fieldsim import cholesky_draws, kl_draws, modulus_experiment
from .io import dumps, read_csv, read_json, write_csv, write_json
from .jacobi import QuadratureError
from .rng import ordered_map, task_stream
from .slnd import FactorizationError, SlndViolation, bump_construct, bump_n_max, bump_verify, slnd_experiment
from .spaces import PointConfiguration, SpaceError, geodesic_points, parse_space, random_configuration
from .spectra import SpectrumError, spectrum_from_descriptor

DEFAULT_TAIL_TOL = 1e-4
DEFAULT_POINTWISE_TOL = 1e-6
LOW_COEFF_TOL = 1e-8


class NumericFailure(RuntimeError):
    """An experiment ran but an invariant or acceptance check failed."""


@dataclass
class RunResult:
    status: int
    outputs: list[str] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


# -- building blocks ------------------------------------------------------------------------

def resolved_config(cfg: ExperimentConfig) -> dict:
    d = cfg.to_json()
    d.pop("threads")
    d.pop("out")
    return d


def build_spectrum(cfg: ExperimentConfig):
    desc = dict(cfg.spectrum)
    if cfg.nu is not None:
        desc["nu"] = cfg.nu
    if cfg.L is not None:
        desc["L"] = cfg.L
    return spectrum_from_descriptor(desc, cfg.space)


def build_model(cfg: ExperimentConfig, thetas=None, pointwise_tol=None):
    spec = build_spectrum(cfg)
    if thetas is not None:
        return make_covariance(cfg.space, spec, tail_tol=pointwise_tol, thetas=thetas)
    if cfg.tol is None and cfg.L is not None:
        return make_covariance(cfg.space, spec, L=cfg.L, allow_uncertified=spec.descriptor.get("model") == "file")
    tol = cfg.tol if cfg.tol is not None else DEFAULT_TAIL_TOL
    if spec.descriptor.get("model") == "file":
        return make_covariance(cfg.space, spec, L=spec.L, allow_uncertified=True)
    return make_covariance(cfg.space, spec, tail_tol=tol)


def _out(cfg: ExperimentConfig, default: str) -> Path:
    return Path(cfg.out if cfg.out else default)


def _model_summary(model) -> dict:
    return {"L": model.L, "tail": model.tail, "certificate": model.certificate, "C0": model.c0}


def load_points(space, spec: str) -> PointConfiguration:
    if spec.startswith("geodesic:"):
        return geodesic_points(space, int(spec.split(":", 1)[1]))
    _, coords = read_csv(spec)
    return PointConfiguration(space, coords)


# -- experiments ------------------------------------------------------------------------------

def run_spectrum(cfg):
    spec = build_spectrum(cfg)
    path = _out(cfg, "spectrum.csv")
    write_csv(path, ["l", "b_l"], enumerate(spec.values))
    return RunResult(0, [str(path)], {"L": spec.L, "b0": float(spec.values[0]), "total_mass": spec.total_mass})


def run_covariance(cfg):
    n = cfg.theta_grid
    thetas = (np.arange(1, n + 1) - 0.5) * math.pi / n
    model = build_model(cfg, thetas=thetas, pointwise_tol=cfg.tol or DEFAULT_POINTWISE_TOL)
    C = zonal_eval(model, thetas)
    g = variogram(model, thetas)
    path = _out(cfg, "covariance.csv")
    write_csv(path, ["theta", "C", "gamma"], zip(thetas, C, g))
    return RunResult(0, [str(path)], _model_summary(model))


def run_variogram_bounds(cfg):
    spec = build_spectrum(cfg)
    nu = cfg.nu if cfg.nu is not None else spec.nu
    if nu is None:
        raise ConfigError(["nu: required (the spectrum does not declare one)"])
    rho = log_grid(cfg.delta0, 61)
    rel = cfg.tol if cfg.tol is not None else 1e-4
    model = make_covariance(cfg.space, spec, tail_tol=rel * rho ** nu, thetas=rho)
    rep = variogram_bound_fit(model, nu, cfg.delta0, rho=rho)
    path = _out(cfg, "variogram_bounds.csv")
    jpath = path.with_suffix(".json")
    write_csv(path, ["rho", "ratio"], zip(rep.rho, rep.ratio))
    write_json(jpath, {**rep.to_json(), "model": _model_summary(model), "config": resolved_config(cfg)})
    return RunResult(0, [str(path), str(jpath)], rep.to_json())


def run_psd_check(cfg):
    model = build_model(cfg)

    def one(i):
        conf = random_configuration(cfg.space, cfg.size, task_stream(cfg.seed, "points", i))
        return psd_check(gram_matrix(model, conf), model.partial_mass).relative

    rel = np.array(ordered_map(one, range(cfg.configs), cfg.threads))
    worst = int(np.argmin(rel))
    ok = bool(rel[worst] >= -1e-8)
    report = {"ok": ok, "min_relative_eig": float(rel[worst]), "worst_config": worst,
              "relative_eigs": rel, "model": _model_summary(model), "config": resolved_config(cfg)}
    path = _out(cfg, "psd_check.json")
    write_json(path, report)
    return RunResult(0 if ok else 1, [str(path)], {"ok": ok, "min_relative_eig": float(rel[worst])})


def run_slnd(cfg):
    model = build_model(cfg)
    path = _out(cfg, "slnd.json")
    try:
        rep = slnd_experiment(model, cfg.nu, cfg.trials, cfg.n_max, cfg.seed, threads=cfg.threads)
        status = 0 if rep.monotone_all and rep.support_all else 1
    except SlndViolation as ex:
        rep, status = ex.worst, 1
    write_json(path, {**rep.to_json(), "model": _model_summary(model), "config": resolved_config(cfg)})
    return RunResult(status, [str(path)], {"gamma_hat": rep.gamma_hat, "monotone_all": rep.monotone_all})


def run_bump(cfg):
    n_max = cfg.L if cfg.L is not None else bump_n_max(cfg.eps)
    bump = bump_construct(cfg.space.jacobi, cfg.r, cfg.n0, cfg.eps)
    rec = bump_verify(bump, n_max)
    path = _out(cfg, "bump.csv")
    write_csv(path, ["n", "b_n", "bound"], zip(range(n_max + 1), rec.coeffs, rec.bound))
    ok = rec.max_low_coeff <= LOW_COEFF_TOL
    return RunResult(0 if ok else 1, [str(path)],
                     {"max_low_coeff": rec.max_low_coeff, "Mr_hat": rec.Mr_hat, "R": bump.R, "K": bump.K})


def run_sample(cfg):
    config = load_points(cfg.space, cfg.points)
    if cfg.method == "kl":
        Z = kl_draws(build_spectrum(cfg), config, cfg.lmax, cfg.seed, cfg.replicates, cfg.threads)
        info = {"lmax": cfg.lmax}
    else:
        model = build_model(cfg)
        Z = cholesky_draws(model, config, cfg.seed, cfg.replicates, cfg.threads)
        info = _model_summary(model)
    path = _out(cfg, "sample.csv")
    n = len(config)
    rows = ((k, r, Z[r, k]) for r in range(cfg.replicates) for k in range(n))
    write_csv(path, ["point_index", "replicate", "value"], rows)
    return RunResult(0, [str(path)], {"points": n, "replicates": cfg.replicates, **info})


def run_modulus(cfg):
    model = build_model(cfg)
    rep = modulus_experiment(model, cfg.nu, cfg.levels, cfg.replicates, cfg.seed, threads=cfg.threads)
    path = _out(cfg, "modulus.json")
    write_json(path, {**rep.to_json(), "model": _model_summary(model), "config": resolved_config(cfg)})
    return RunResult(0, [str(path)], {"slope": rep.slope, "band": rep.band})


RUNNERS = {
    "spectrum": run_spectrum, "covariance": run_covariance, "variogram_bounds": run_variogram_bounds,
    "psd_check": run_psd_check, "slnd": run_slnd, "bump": run_bump, "sample": run_sample,
    "modulus": run_modulus,
}
assert set(RUNNERS) == set(EXPERIMENTS)


def run(cfg: ExperimentConfig, echo=None) -> RunResult:
    """Validate, dispatch, and report; numeric failures map to status 1."""
    cfg.validate()
    if echo is not None:
        echo.write(dumps({"config": resolved_config(cfg)}))
    try:
        return RUNNERS[cfg.experiment](cfg)
    except (NumericFailure, FactorizationError, NuMismatchError, QuadratureError, UncertifiedTruncationError,
            SpectrumError) as ex:
        return RunResult(1, [], {"error": f"{type(ex).__name__}: {ex}"})


# -- argument parsing -----------------------------------------------------------------------

def _global_flags(p):
    # suppressed defaults let the flags appear before or after the subcommand
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed (default 0)")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads (default 1)")
    p.add_argument("--out", default=argparse.SUPPRESS, help="output path")


def _model_arg(text: str) -> dict:
    if text.strip().startswith("{"):
        return json.loads(text)
    if text.endswith(".json") and Path(text).exists():
        return read_json(text)
    return {"model": text}


FLAGS = {
    "space": dict(type=str, help="e.g. sphere:2, rp:3, cp:4, hp:8, cayley:16"),
    "model": dict(type=_model_arg, dest="spectrum", help="model name, JSON descriptor, or .json file"),
    "nu": dict(type=float), "L": dict(type=int), "tol": dict(type=float),
    "theta-grid": dict(type=int, dest="theta_grid"), "delta0": dict(type=float),
    "configs": dict(type=int), "size": dict(type=int), "trials": dict(type=int),
    "nmax": dict(type=int, dest="n_max"), "levels": dict(type=int), "replicates": dict(type=int),
    "points": dict(type=str, help="geodesic:n or a CSV of coordinates"),
    "method": dict(choices=["cholesky", "kl"]), "lmax": dict(type=int),
    "r": dict(type=float), "n0": dict(type=int), "eps": dict(type=float),
}

SUBCOMMANDS = {
    "spectrum": ["space", "model", "nu", "L"],
    "covariance": ["space", "model", "nu", "L", "tol", "theta-grid"],
    "variogram-bounds": ["space", "model", "nu", "tol", "delta0"],
    "psd-check": ["space", "model", "nu", "L", "tol", "configs", "size"],
    "slnd": ["space", "model", "nu", "L", "tol", "trials", "nmax"],
    "bump": ["space", "r", "n0", "eps", "nmax"],
    "sample": ["space", "model", "nu", "L", "tol", "points", "method", "lmax", "replicates"],
    "modulus": ["space", "model", "nu", "L", "tol", "levels", "replicates"],
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twopoint", description=__doc__.splitlines()[0])
    _global_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, flags in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"{name} experiment")
        _global_flags(p)
        for f in flags:
            kw = dict(FLAGS[f])
            if f == "nmax" and name == "bump":
                kw["dest"] = "L"  # bump degree range
            p.add_argument(f"--{f}", default=argparse.SUPPRESS, **kw)
    p = sub.add_parser("run", help="run an experiment from a JSON config")
    _global_flags(p)
    p.add_argument("config")
    p = sub.add_parser("acceptance", help="run the acceptance criteria")
    _global_flags(p)
    p.add_argument("--config-dir", default=None, help="directory of criterion configs and bands")
    p.add_argument("--only", default=None, help="comma-separated criterion ids")
    return parser


def config_from_args(args) -> ExperimentConfig:
    d = {k: v for k, v in vars(args).items() if k not in ("command", "config", "config_dir", "only")}
    if args.command == "run":
        base = ExperimentConfig.load(args.config)
        if "space" in d:
            d["space"] = parse_space(d["space"])
        return base.with_overrides(**d)
    d["experiment"] = args.command.replace("-", "_")
    if "space" in d:
        d["space"] = {"text": d["space"]}
    return ExperimentConfig.from_json(d)


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as ex:
        return int(ex.code or 0)
    if args.command == "acceptance":
        from .acceptance import main as acceptance_main

        return acceptance_main(args.config_dir, args.only, getattr(args, "out", None),
                               getattr(args, "threads", 1))
    try:
        cfg = config_from_args(args)
        res = run(cfg, echo=sys.stdout)
    except (ConfigError, SpaceError, json.JSONDecodeError, FileNotFoundError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 2
    sys.stdout.write(dumps({"status": res.status, "outputs": res.outputs, "summary": res.summary}))
    return res.status


if __name__ == "__main__":
    sys.exit(main())
