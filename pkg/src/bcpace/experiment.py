"""Glue between a spec and the solver: models, latent tables, training, evaluation."""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

from .config import ExperimentSpec
from .envs import make_env
from .evaluate import GreedyPolicy, QmdpPolicy, evaluate_policy
from .latent import QTableCache, profile_for, solve_latent_qtable
from .solver import run

RESULT_FIELDS = (
    "environment",
    "policy",
    "mean_return",
    "stderr",
    "mean_discounted",
    "stderr_discounted",
    "episodes",
    "seed",
    "samples",
    "seconds",
)


@dataclass
class ResultRow:
    environment: str
    policy: str
    mean_return: float
    stderr: float
    mean_discounted: float
    stderr_discounted: float
    episodes: int
    seed: int
    samples: int
    seconds: float

    def as_list(self):
        return [getattr(self, f) for f in RESULT_FIELDS]

    def reported(self, report):
        if report == "discounted":
            return self.mean_discounted, self.stderr_discounted
        return self.mean_return, self.stderr


class Setup:
    """Model, profile and latent tables for one spec (solved lazily, cached)."""

    def __init__(self, spec: ExperimentSpec, cache_dir=None):
        self.spec = spec
        self.model = make_env(spec.environment, spec.env_params)
        self.profile = profile_for(self.model, spec.solver.gamma, spec.solver.alpha)
        self._cache = QTableCache(cache_dir) if cache_dir else None
        self._tables = {}

    def latent_table(self, continuing=None):
        if continuing is None:
            continuing = self.spec.latent_continuing
        if continuing is None:
            continuing = self.model.restart_on_terminal
        key = bool(continuing)
        if key not in self._tables:
            g, tol = self.spec.solver.gamma, self.spec.latent_tol
            if self._cache is not None:
                table = self._cache.get(self.model, g, tol, key)
            else:
                table = solve_latent_qtable(self.model, g, tol, continuing=key)
            self._tables[key] = table
        return self._tables[key]

    def train(self, seed, callback=None):
        cfg = self.spec.solver_for_seed(seed)
        needs = cfg.use_best_case_bound or cfg.use_latent_init
        return run(self.model, cfg, self.latent_table() if needs else None, self.profile, callback)

    def evaluate(self, policy, name, seed, samples=0, seconds=0.0) -> tuple[ResultRow, object]:
        spec = self.spec
        t0 = time.perf_counter()
        res = evaluate_policy(
            self.model, policy, spec.eval_episodes, spec.eval_horizon, spec.solver.gamma, spec.eval_seed
        )
        row = ResultRow(
            environment=spec.environment,
            policy=name,
            mean_return=res.mean,
            stderr=res.stderr,
            mean_discounted=res.mean_discounted,
            stderr_discounted=res.stderr_discounted,
            episodes=spec.eval_episodes,
            seed=int(seed),
            samples=int(samples),
            seconds=float(seconds + time.perf_counter() - t0),
        )
        return row, res

    def baseline_policy(self, name):
        if name == "qmdp":
            return QmdpPolicy(self.latent_table(self.spec.qmdp_continuing))
        raise KeyError(name)

    def bcpace_policy(self, qe):
        return GreedyPolicy(qe)


def default_cache_dir(out_dir) -> Path:
    return Path(out_dir) / "cache"
