"""Experiment configuration: one dataclass, lossless JSON round-trip, all-at-once validation."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace

from .io import dumps, read_json
from .spaces import Space, SpaceError, parse_space
from .spectra import MODELS

EXPERIMENTS = ("spectrum", "covariance", "variogram_bounds", "psd_check", "slnd", "bump", "sample", "modulus")
SAMPLE_METHODS = ("cholesky", "kl")


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("invalid config:\n  " + "\n  ".join(errors))
        self.errors = errors


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    space: Space | None = None
    spectrum: dict = field(default_factory=lambda: {"model": "sine_power"})
    nu: float | None = None
    L: int | None = None
    tol: float | None = None  # truncation tolerance for the covariance model
    trials: int = 200
    n_max: int = 16
    levels: int = 9
    replicates: int = 1000
    seed: int = 0
    threads: int = 1
    out: str | None = None
    theta_grid: int = 50
    points: str = "geodesic:6"
    method: str = "cholesky"
    lmax: int = 128
    r: float = 2.0
    n0: int = 4
    eps: float = 0.5
    configs: int = 50
    size: int = 30
    delta0: float = 0.5

    # -- validation --------------------------------------------------------------------

    def errors(self) -> list[str]:
        e = []
        if self.experiment not in EXPERIMENTS:
            e.append(f"experiment: {self.experiment!r} not one of {EXPERIMENTS}")
        model = self.spectrum.get("model") if isinstance(self.spectrum, dict) else None
        if model not in MODELS:
            e.append(f"spectrum.model: {model!r} not one of {MODELS}")
        if model == "file" and "path" not in self.spectrum:
            e.append("spectrum.path: required for a file spectrum")
        needs_space = self.experiment != "spectrum" or model in ("sine_power", "poly_p0", "poly_p1")
        if needs_space and self.space is None:
            e.append("space: required for this experiment")
        if self.nu is not None and not 0 < self.nu <= 2:
            e.append(f"nu: {self.nu} outside (0, 2]")
        if self.experiment in ("slnd", "modulus") and self.nu is None:
            e.append("nu: required for this experiment")
        if self.L is not None and self.L < 0:
            e.append(f"L: {self.L} < 0")
        if self.tol is not None and not self.tol > 0:
            e.append(f"tol: {self.tol} must be positive")
        for name in ("trials", "n_max", "replicates", "theta_grid", "lmax", "n0", "configs", "size"):
            if getattr(self, name) < 1:
                e.append(f"{name}: {getattr(self, name)} < 1")
        if self.levels < 4:
            e.append(f"levels: {self.levels} < 4")
        if self.threads < 1:
            e.append(f"threads: {self.threads} < 1")
        if not 0 <= self.seed < 2 ** 64:
            e.append(f"seed: {self.seed} is not a 64-bit unsigned integer")
        if self.method not in SAMPLE_METHODS:
            e.append(f"method: {self.method!r} not one of {SAMPLE_METHODS}")
        if not self.r > 1:
            e.append(f"r: {self.r} must exceed 1")
        if not 0 < self.eps <= 3.141592653589793:
            e.append(f"eps: {self.eps} outside (0, pi]")
        if not 0 < self.delta0 < 3.141592653589793:
            e.append(f"delta0: {self.delta0} outside (0, pi)")
        return e

    def validate(self) -> "ExperimentConfig":
        e = self.errors()
        if e:
            raise ConfigError(e)
        return self

    # -- serialization --------------------------------------------------------------------

    def to_json(self) -> dict:
        d = asdict(self)
        d["space"] = None if self.space is None else self.space.to_json()
        return d

    def dumps(self) -> str:
        return dumps(self.to_json())

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        errs = [f"{k}: unknown field" for k in obj if k not in known]
        if "experiment" not in obj:
            errs.append("experiment: missing")
        obj = {k: v for k, v in obj.items() if k in known}
        space = obj.get("space")
        if isinstance(space, str):
            space = {"text": space}
        if isinstance(space, dict):
            try:
                obj["space"] = parse_space(space["text"]) if "text" in space else Space.from_json(space)
            except (SpaceError, KeyError, TypeError) as ex:
                errs.append(f"space: {ex}")
                obj["space"] = None
        if errs:
            raise ConfigError(errs)
        return cls(**obj)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(read_json(path))

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})
