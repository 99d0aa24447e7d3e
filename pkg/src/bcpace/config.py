"""Experiment specification and its YAML schema.

Schema (version 1)::

    schema_version: 1
    environment: {name: tiger, params: {...}}
    solver: {... SolverConfig fields ...}
    latent: {continuing: null, tol: 1.0e-8}
    baselines: [qmdp]
    qmdp_continuing: false
    eval: {episodes: 1000, horizon: 100, seed: 1, report: discounted}
    oracle: {pitch: 0.01}
    seeds: [0]
    output_dir: runs
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError, InvalidParams
from .solver import SolverConfig

SCHEMA_VERSION = 1
KNOWN_BASELINES = ("qmdp",)
REPORTS = ("discounted", "undiscounted")


@dataclass
class ExperimentSpec:
    environment: str
    env_params: dict = field(default_factory=dict)
    solver: SolverConfig = field(default_factory=SolverConfig)
    latent_continuing: bool | None = None
    latent_tol: float = 1e-8
    baselines: list = field(default_factory=lambda: ["qmdp"])
    qmdp_continuing: bool = False
    eval_episodes: int = 1000
    eval_horizon: int = 100
    eval_seed: int = 1
    report: str = "discounted"
    oracle_pitch: float = 0.01
    seeds: list = field(default_factory=lambda: [0])
    output_dir: str = "runs"

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.eval_episodes < 1 or self.eval_horizon < 1:
            raise ConfigError("eval episodes and horizon must be >= 1")
        if self.report not in REPORTS:
            raise ConfigError(f"report must be one of {REPORTS}")
        unknown = set(self.baselines) - set(KNOWN_BASELINES)
        if unknown:
            raise ConfigError(f"unknown baselines {sorted(unknown)}")

    def solver_for_seed(self, seed) -> SolverConfig:
        return dataclasses.replace(self.solver, seed=int(seed))

    def with_seeds(self, seeds) -> "ExperimentSpec":
        return dataclasses.replace(self, seeds=[int(s) for s in seeds])

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "environment": {"name": self.environment, "params": dict(self.env_params)},
            "solver": self.solver.to_dict(),
            "latent": {"continuing": self.latent_continuing, "tol": self.latent_tol},
            "baselines": list(self.baselines),
            "qmdp_continuing": self.qmdp_continuing,
            "eval": {
                "episodes": self.eval_episodes,
                "horizon": self.eval_horizon,
                "seed": self.eval_seed,
                "report": self.report,
            },
            "oracle": {"pitch": self.oracle_pitch},
            "seeds": list(self.seeds),
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, data) -> "ExperimentSpec":
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}")
        allowed = {"schema_version", "environment", "solver", "latent", "baselines",
                   "qmdp_continuing", "eval", "oracle", "seeds", "output_dir"}
        extra = set(data) - allowed
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        env = data.get("environment")
        if isinstance(env, str):
            env = {"name": env}
        if not isinstance(env, dict) or "name" not in env:
            raise ConfigError("environment.name is required")
        solver_fields = {f.name for f in dataclasses.fields(SolverConfig)}
        solver = dict(data.get("solver") or {})
        bad = set(solver) - solver_fields
        if bad:
            raise ConfigError(f"unknown solver keys {sorted(bad)}")
        latent = data.get("latent") or {}
        ev = data.get("eval") or {}
        try:
            return cls(
                environment=str(env["name"]),
                env_params=dict(env.get("params") or {}),
                solver=SolverConfig(**solver),
                latent_continuing=latent.get("continuing"),
                latent_tol=float(latent.get("tol", 1e-8)),
                baselines=list(data.get("baselines", ["qmdp"])),
                qmdp_continuing=bool(data.get("qmdp_continuing", False)),
                eval_episodes=int(ev.get("episodes", 1000)),
                eval_horizon=int(ev.get("horizon", 100)),
                eval_seed=int(ev.get("seed", 1)),
                report=str(ev.get("report", "discounted")),
                oracle_pitch=float((data.get("oracle") or {}).get("pitch", 0.01)),
                seeds=[int(s) for s in data.get("seeds", [0])],
                output_dir=str(data.get("output_dir", "runs")),
            )
        except (InvalidParams, TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None


def load_spec(path) -> ExperimentSpec:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from None
    return ExperimentSpec.from_dict(data)


def dump_spec(spec: ExperimentSpec, path):
    Path(path).write_text(yaml.safe_dump(spec.to_dict(), sort_keys=False))


def configs_dir() -> Path:
    """Directory holding the shipped configs (``BCPACE_CONFIGS`` overrides)."""
    env = os.environ.get("BCPACE_CONFIGS")
    if env:
        return Path(env)
    return Path(__file__).resolve().parents[2] / "configs"
