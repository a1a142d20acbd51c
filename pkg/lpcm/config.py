"""
Layered run configuration: built-in defaults < JSON config file < command-line flags
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Optional

from .errors import ConfigError
from .models import SolverConfig
from .operators import MASS_LUMPING

logger = logging.getLogger(__name__)

OUTPUT_FORMATS = ("ply", "vtk")

DEFAULTS: Dict[str, Any] = {
    "mu": None,
    "num_modes": None,
    "p": 0.8,
    "rho": 1.0,
    "tol": 1e-3,
    "max_iter": 5000,
    "newton_iters": 8,
    "seed": 0,
    "epsilon": 0.01,
    "mass_lumping": "full",
    "jobs": 1,
    "format": "ply",
    "n_max": 64,
    "mu_start": 2.0,
    "mu_factor": 4.0,
    "mu_max": 2.0 * 4.0 ** 10,
    "max_depth": 8,
    "reconstruct_mu": 300.0,
}

CONFIG_BLOCKS = ("settings", "config")


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings of one command"""
    mu: Optional[float]
    num_modes: Optional[int]
    p: float
    rho: float
    tol: float
    max_iter: int
    newton_iters: int
    seed: int
    epsilon: float
    mass_lumping: str
    jobs: int
    format: str
    n_max: int
    mu_start: float
    mu_factor: float
    mu_max: float
    max_depth: int
    reconstruct_mu: float

    def __post_init__(self):
        if self.mu is not None and not self.mu > 0:
            raise ConfigError(f"mu must be positive, got {self.mu}")
        if self.num_modes is not None and self.num_modes < 1:
            raise ConfigError(f"num_modes must be at least 1, got {self.num_modes}")
        if not 0 < self.p <= 1:
            raise ConfigError(f"p must lie in (0, 1], got {self.p}")
        for name in ("rho", "tol", "mu_start", "mu_max", "reconstruct_mu"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be a positive number, got {value}")
        if self.epsilon < 0:
            raise ConfigError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.mu_factor <= 1:
            raise ConfigError(f"mu_factor must exceed 1, got {self.mu_factor}")
        for name in ("max_iter", "newton_iters", "jobs", "n_max"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.max_depth < 0:
            raise ConfigError(f"max_depth must be non-negative, got {self.max_depth}")
        if self.mass_lumping not in MASS_LUMPING:
            raise ConfigError(f"mass_lumping must be one of {MASS_LUMPING}, got '{self.mass_lumping}'")
        if self.format not in OUTPUT_FORMATS:
            raise ConfigError(f"format must be one of {OUTPUT_FORMATS}, got '{self.format}'")

    def solver_config(self, mu: Optional[float] = None) -> SolverConfig:
        """SolverConfig for one solve; mu defaults to the configured one"""
        mu = self.mu if mu is None else mu
        if mu is None:
            raise ConfigError("No mu configured for a fixed-mu solve")
        return SolverConfig(mu=mu, p=self.p, rho=self.rho, tol_rel_change=self.tol,
                            max_iter=self.max_iter, newton_iters=self.newton_iters,
                            seed=self.seed, jobs=self.jobs)

    def to_dict(self) -> Dict:
        return asdict(self)


def load_config_file(path: str) -> Dict[str, Any]:
    """
    Read settings from a JSON file. They may sit at the top level, in a
    "settings" block, or in a "config" block (a run manifest).
    """
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")

    for block in CONFIG_BLOCKS:
        if isinstance(data.get(block), dict):
            settings = data[block]
            unknown = sorted(set(settings) - set(DEFAULTS))
            if unknown:
                logger.warning("Ignoring unknown settings in %s: %s", path, ", ".join(unknown))
            break
    else:
        settings = data

    return {k: v for k, v in settings.items() if k in DEFAULTS}


def resolve_config(overrides: Optional[Dict[str, Any]] = None,
                   config_path: Optional[str] = None) -> RunConfig:
    """Merge defaults, the config file and non-None overrides into a RunConfig"""
    merged = dict(DEFAULTS)
    if config_path:
        merged.update(load_config_file(config_path))
    for key, value in (overrides or {}).items():
        if key in DEFAULTS and value is not None:
            merged[key] = value
    try:
        return RunConfig(**{f.name: merged[f.name] for f in fields(RunConfig)})
    except TypeError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e
