"""Command-line harness: ``bcpace {train,eval,bench,diag}``.

Exit codes: 0 ok, 2 config error, 3 budget exhausted, 4 artifact mismatch.
``BCPACE_OUT`` overrides the output directory and ``BCPACE_THREADS`` sets the
number of worker processes used by ``bench``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ExperimentSpec, dump_spec, load_spec
from .diagnostics import (
    belief_contraction_violations,
    estimator_lipschitz_violations,
    reduced_cover,
    trace_tuples,
    tuples_from_samples,
    TracedTuples,
)
from .errors import ArtifactVersionMismatch, ConfigError, EmptyKWindow, InvalidParams, UnknownEnvironment
from .evaluate import GreedyPolicy, rollout
from .experiment import RESULT_FIELDS, ResultRow, Setup, default_cache_dir
from .serialize import load_estimate, save_estimate
from .solver import sample_complexity_bound

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_ARTIFACT = 0, 2, 3, 4
EPISODE_FIELDS = ("environment", "policy", "seed", "episode", "return", "discounted")

log = logging.getLogger("bcpace")


def _out_dir(args, spec) -> Path:
    out = args.out or os.environ.get("BCPACE_OUT") or spec.output_dir
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _threads():
    try:
        return max(1, int(os.environ.get("BCPACE_THREADS", "1")))
    except ValueError:
        return 1


def _spec(args) -> ExperimentSpec:
    if not args.config:
        raise ConfigError("--config is required")
    spec = load_spec(args.config)
    if args.seed is not None:
        spec = spec.with_seeds([args.seed])
    return spec


def write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_FIELDS)
        for r in sorted(rows, key=lambda r: (r.environment, r.policy, r.seed)):
            w.writerow(r.as_list())


def read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames) != RESULT_FIELDS:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        out = []
        for d in reader:
            out.append(ResultRow(
                environment=d["environment"], policy=d["policy"],
                mean_return=float(d["mean_return"]), stderr=float(d["stderr"]),
                mean_discounted=float(d["mean_discounted"]),
                stderr_discounted=float(d["stderr_discounted"]),
                episodes=int(d["episodes"]), seed=int(d["seed"]), samples=int(d["samples"]),
                seconds=float(d["seconds"]),
            ))
        return out


def _write_episodes(path, spec, policy, seed, res):
    new = not Path(path).exists()
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(EPISODE_FIELDS)
        for i, (r, d) in enumerate(zip(res.returns, res.discounted)):
            w.writerow([spec.environment, policy, seed, i, repr(float(r)), repr(float(d))])


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _seed_dir(out, spec, seed):
    d = out / spec.environment / f"seed-{seed}"
    d.mkdir(parents=True, exist_ok=True)
    return d


def train_one(spec, seed, out):
    setup = Setup(spec, default_cache_dir(out))
    t0 = time.perf_counter()
    qe, tlog = setup.train(seed)
    seconds = time.perf_counter() - t0
    d = _seed_dir(out, spec, seed)
    save_estimate(d / "estimate.npz", qe, spec.environment, spec.env_params,
                  extra={"seconds": seconds, "terminated": tlog.terminated})
    with open(d / "training_log.csv", "w", newline="") as fh:
        tlog.write_csv(fh)
    return qe, tlog, seconds


def cmd_train(args):
    spec = _spec(args)
    out = _out_dir(args, spec)
    dump_spec(spec, out / "spec.yaml")
    code = EXIT_OK
    for seed in spec.seeds:
        qe, tlog, seconds = train_one(spec, seed, out)
        print(f"{spec.environment} seed={seed} samples={qe.samples.n} episodes={len(tlog)} "
              f"terminated={tlog.terminated} seconds={seconds:.1f}")
        if tlog.budget_exhausted:
            code = EXIT_BUDGET
    return code


def cmd_eval(args):
    spec = _spec(args)
    out = _out_dir(args, spec)
    setup = Setup(spec, default_cache_dir(out))
    rows = []
    ep_path = out / "episodes.csv"
    if ep_path.exists():
        ep_path.unlink()
    if args.artifact:
        qe = load_estimate(args.artifact)
        seed = int(qe.config.seed)
        row, res = setup.evaluate(GreedyPolicy(qe), "bcpace", seed, samples=qe.samples.n)
        rows.append(row)
        _write_episodes(ep_path, spec, "bcpace", seed, res)
    baselines = [args.baseline] if args.baseline else ([] if args.artifact else spec.baselines)
    for name in baselines:
        try:
            policy = setup.baseline_policy(name)
        except KeyError:
            raise ConfigError(f"unknown baseline {name!r}") from None
        row, res = setup.evaluate(policy, name, spec.eval_seed)
        rows.append(row)
        _write_episodes(ep_path, spec, name, spec.eval_seed, res)
    write_rows(out / "results.csv", rows)
    for r in rows:
        m, se = r.reported(spec.report)
        print(f"{r.environment} {r.policy}: {m:.3f} +- {se:.3f} ({spec.report}, n={r.episodes})")
    return EXIT_OK


def _bench_cell(spec_dict, seed, out):
    spec = ExperimentSpec.from_dict(spec_dict)
    qe, tlog, seconds = train_one(spec, seed, Path(out))
    setup = Setup(spec, default_cache_dir(out))
    row, res = setup.evaluate(GreedyPolicy(qe.freeze()), "bcpace", seed, qe.samples.n, seconds)
    return row, res, tlog.budget_exhausted


def cmd_bench(args):
    configs = args.configs or ([args.config] if args.config else [])
    if not configs:
        raise ConfigError("bench needs --config or positional config files")
    specs = [load_spec(c) for c in configs]
    if args.seed is not None:
        specs = [s.with_seeds([args.seed]) for s in specs]
    out = Path(args.out or os.environ.get("BCPACE_OUT") or specs[0].output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ep_path = out / "episodes.csv"
    if ep_path.exists():
        ep_path.unlink()
    rows, exhausted = [], False
    jobs = [(spec, seed) for spec in specs for seed in spec.seeds]
    if _threads() > 1:
        with ProcessPoolExecutor(_threads()) as pool:
            results = list(pool.map(_bench_cell, [s.to_dict() for s, _ in jobs],
                                    [seed for _, seed in jobs], [str(out)] * len(jobs)))
    else:
        results = [_bench_cell(s.to_dict(), seed, str(out)) for s, seed in jobs]
    for (spec, seed), (row, res, ex) in zip(jobs, results):
        rows.append(row)
        exhausted |= ex
        _write_episodes(ep_path, spec, "bcpace", seed, res)
    for spec in specs:
        setup = Setup(spec, default_cache_dir(out))
        for name in spec.baselines:
            row, res = setup.evaluate(setup.baseline_policy(name), name, spec.eval_seed)
            rows.append(row)
            _write_episodes(ep_path, spec, name, spec.eval_seed, res)
    write_rows(out / "bench.csv", rows)
    for r in sorted(rows, key=lambda r: (r.environment, r.policy, r.seed)):
        print(f"{r.environment:10s} {r.policy:8s} seed={r.seed} "
              f"undiscounted={r.mean_return:.3f}+-{r.stderr:.3f} "
              f"discounted={r.mean_discounted:.3f}+-{r.stderr_discounted:.3f}")
    return EXIT_BUDGET if exhausted else EXIT_OK


def diagnose(spec, qe, trace_episodes=200, trials=10_000, seed=0):
    """Diagnostics report as a JSON-ready dict."""
    model = qe.model
    radius = qe.known_radius
    traced = TracedTuples.concat([
        tuples_from_samples(qe),
        trace_tuples(model, trace_episodes, spec.solver.horizon, seed=seed),
        trace_tuples(model, trace_episodes, spec.solver.horizon, seed=seed + 1, policy=GreedyPolicy(qe)),
    ])
    n_full, n_red = reduced_cover(model, qe.alpha, traced, radius, qe.seed_radius)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", EmptyKWindow)
        bound = sample_complexity_bound(qe.profile, qe.config, n_full)
    bc_bad, bc_n, bc_worst = belief_contraction_violations(model, trials, seed=seed) \
        if hasattr(model, "num_states") else (None, 0, None)
    lip_bad, lip_n = estimator_lipschitz_violations(qe, trials, seed=seed) \
        if hasattr(model, "num_states") else (None, 0)
    return {
        "environment": spec.environment,
        "samples": int(qe.samples.n),
        "known_radius": radius,
        "traced_tuples": len(traced),
        "cover_full": n_full,
        "cover_reduced": n_red,
        "cover_ratio": (n_red / n_full) if n_full else None,
        "sample_count_bound": qe.k * n_full,
        "sample_count_ok": bool(qe.samples.n <= qe.k * n_full),
        "complexity_m": bound.m,
        "k_window": [bound.k_low, bound.k_high],
        "k_admissible": bound.k_admissible,
        "k_window_empty": bound.window_empty or bool(caught),
        "belief_contraction_violation_rate": (bc_bad / bc_n) if bc_n else None,
        "belief_contraction_worst_ratio": bc_worst,
        "estimator_lipschitz_violation_rate": (lip_bad / lip_n) if lip_n else None,
        "profile": qe.profile.to_dict(),
    }


def cmd_diag(args):
    spec = _spec(args)
    out = _out_dir(args, spec)
    if args.artifact:
        qe = load_estimate(args.artifact)
    else:
        qe, _, _ = train_one(spec, spec.seeds[0], out)
    report = diagnose(spec, qe, trace_episodes=args.trace_episodes, trials=args.trials)
    path = out / f"diag-{spec.environment}.json"
    path.write_text(json.dumps(report, indent=2, default=float))
    print(json.dumps(report, indent=2, default=float))
    return EXIT_OK


def cmd_trajectory(args):
    qe = load_estimate(args.artifact)
    model = qe.model
    s0 = model.initial_distribution()[0][0]
    for phi in range(model.num_latents):
        traj = rollout(model, GreedyPolicy(qe), np.random.default_rng(args.seed or 0), args.horizon, s0, phi)
        names = [model.actions[a] for a in traj.actions]
        print(f"latent={model.latent_names[phi]} return={traj.discounted(qe.gamma):.4f} actions={names}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="bcpace", description="B-CPACE BAMDP solver and benchmarks")
    p.add_argument("--config", help="experiment YAML file")
    p.add_argument("--seed", type=int, help="run a single seed instead of the config's list")
    p.add_argument("--out", help="output directory (env BCPACE_OUT)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("train", help="train B-CPACE for every seed")
    ev = sub.add_parser("eval", help="evaluate a frozen artifact or a baseline")
    ev.add_argument("--artifact", help="estimate.npz written by train")
    ev.add_argument("--baseline", help="baseline policy name (qmdp)")
    be = sub.add_parser("bench", help="train and evaluate every config and baseline")
    be.add_argument("configs", nargs="*", help="config files (default: --config)")
    dg = sub.add_parser("diag", help="cover estimates, PAC bound and assumption checks")
    dg.add_argument("--artifact")
    dg.add_argument("--trace-episodes", type=int, default=200)
    dg.add_argument("--trials", type=int, default=10_000)
    tr = sub.add_parser("trajectory", help="print greedy trajectories per latent")
    tr.add_argument("--artifact", required=True)
    tr.add_argument("--horizon", type=int, default=40)
    return p


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "diag": cmd_diag,
    "trajectory": cmd_trajectory,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, InvalidParams, UnknownEnvironment) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArtifactVersionMismatch as exc:
        print(f"artifact error: {exc}", file=sys.stderr)
        return EXIT_ARTIFACT


if __name__ == "__main__":
    sys.exit(main())
