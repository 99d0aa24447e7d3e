"""Small documented grid over solver knobs for one config.

Tuning rollouts use a seed distinct from the shipped evaluation seed so that
reported numbers are not selected on the data they are reported with.

    python3 scripts/tune.py configs/chain.yaml epsilon=0.5,1,2 lq_override=50,100
"""

import dataclasses
import itertools
import sys
import time

from bcpace.config import load_spec
from bcpace.experiment import Setup

TUNE_SEED = 12345


def _parse(value):
    try:
        return int(value)
    except ValueError:
        return float(value)


def main(argv):
    spec = load_spec(argv[0])
    axes = []
    for item in argv[1:]:
        key, values = item.split("=")
        axes.append([(key, _parse(v)) for v in values.split(",")])
    base = Setup(spec)
    print("setting samples episodes train_s mean stderr", flush=True)
    for combo in itertools.product(*axes):
        solver = dataclasses.replace(spec.solver, **dict(combo))
        trial = dataclasses.replace(spec, solver=solver, eval_seed=TUNE_SEED)
        setup = Setup(trial)
        setup._tables = base._tables
        t0 = time.perf_counter()
        qe, log = setup.train(trial.seeds[0])
        secs = time.perf_counter() - t0
        row, _ = setup.evaluate(setup.bcpace_policy(qe), "bcpace", trial.seeds[0])
        mean, se = row.reported(trial.report)
        label = " ".join(f"{k}={v}" for k, v in combo)
        print(f"{label} {qe.samples.n} {len(log.records)} {secs:.1f} {mean:.3f} {se:.3f}", flush=True)


if __name__ == "__main__":
    main(sys.argv[1:])
