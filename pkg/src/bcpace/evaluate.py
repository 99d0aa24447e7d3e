"""Frozen-policy rollouts and return statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import step_hyper
from .latent import LatentQTable, qmdp_values


class GreedyPolicy:
    """Acts greedily on a trained estimate; never adds samples."""

    name = "bcpace"

    def __init__(self, qe):
        self.qe = qe

    def __call__(self, s, b):
        return self.qe.greedy_action(s, b)


class QmdpPolicy:
    name = "qmdp"

    def __init__(self, qtable: LatentQTable):
        self.qtable = qtable

    def __call__(self, s, b):
        return int(np.argmax(qmdp_values(self.qtable, s, b)))


def qmdp_policy(qtable, s, b) -> int:
    return QmdpPolicy(qtable)(s, b)


@dataclass
class Trajectory:
    states: list
    beliefs: list
    actions: list
    latents: list
    raw_rewards: list

    def undiscounted(self):
        return float(sum(self.raw_rewards))

    def discounted(self, gamma):
        return float(sum(r * gamma**t for t, r in enumerate(self.raw_rewards)))


def rollout(model, policy, rng, horizon, s0=None, phi0=None) -> Trajectory:
    if s0 is None:
        s, phi = model.sample_initial(rng)
    else:
        s, phi = s0, phi0
    b = model.initial_belief(s)
    traj = Trajectory([s], [b], [], [phi], [])
    for _ in range(horizon):
        a = policy(s, b)
        st = step_hyper(model, s, phi, b, a, rng)
        traj.actions.append(a)
        traj.raw_rewards.append(st.raw_reward)
        s, b, phi = st.next_state, st.next_belief, st.next_latent
        traj.states.append(s)
        traj.beliefs.append(b)
        traj.latents.append(phi)
        if st.terminal:
            break
    return traj


@dataclass
class EvalResult:
    returns: np.ndarray
    discounted: np.ndarray

    @staticmethod
    def _stats(x):
        n = x.size
        sd = float(x.std(ddof=1)) if n > 1 else 0.0
        return float(x.mean()), sd / np.sqrt(n)

    @property
    def mean(self):
        return self._stats(self.returns)[0]

    @property
    def stderr(self):
        return self._stats(self.returns)[1]

    @property
    def mean_discounted(self):
        return self._stats(self.discounted)[0]

    @property
    def stderr_discounted(self):
        return self._stats(self.discounted)[1]


def evaluate_policy(model, policy, episodes, horizon, gamma, seed=0) -> EvalResult:
    """Roll out ``policy`` for ``episodes`` episodes.

    Episode ``i`` uses its own generator seeded by ``(seed, i)``, so results
    do not depend on how many episodes are run or in which order.
    """
    undisc = np.empty(episodes)
    disc = np.empty(episodes)
    for i in range(episodes):
        traj = rollout(model, policy, np.random.default_rng([seed, i]), horizon)
        undisc[i] = traj.undiscounted()
        disc[i] = traj.discounted(gamma)
    return EvalResult(undisc, disc)
