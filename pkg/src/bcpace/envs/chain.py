"""Five-state Chain with an unknown slip probability."""

import numpy as np

from ..errors import InvalidParams
from .finite import FiniteLatentMdp

ACTION_A, ACTION_B = 0, 1


def make_chain(slips=(0.2, 0.5, 0.8), prior=None, n_states=5, end_reward=10.0, reset_reward=2.0):
    """Build the Chain BAMDP with one latent per slip probability.

    ``A`` advances one state (and stays at the end), ``B`` returns to the first
    state. With the latent's slip probability the opposite transition happens.
    Rewards belong to the chosen action: ``end_reward`` for ``A`` at the last
    state, ``reset_reward`` for ``B`` anywhere, zero otherwise.
    """
    slips = [float(t) for t in slips]
    if not slips or any(not 0.0 <= t <= 1.0 for t in slips):
        raise InvalidParams("slip probabilities must lie in [0, 1]")
    if n_states < 2:
        raise InvalidParams("chain needs at least two states")
    nphi = len(slips)
    prior = np.full(nphi, 1.0 / nphi) if prior is None else np.asarray(prior, dtype=float)
    if prior.shape != (nphi,) or np.any(prior < 0) or not np.isclose(prior.sum(), 1.0):
        raise InvalidParams("prior must be a pmf over the slip values")

    P = np.zeros((nphi, 2, n_states, n_states))
    R = np.zeros((nphi, n_states, 2))
    for phi, theta in enumerate(slips):
        for s in range(n_states):
            forward = min(s + 1, n_states - 1)
            P[phi, ACTION_A, s, forward] += 1.0 - theta
            P[phi, ACTION_A, s, 0] += theta
            P[phi, ACTION_B, s, 0] += 1.0 - theta
            P[phi, ACTION_B, s, forward] += theta
            R[phi, s, ACTION_A] = end_reward if s == n_states - 1 else 0.0
            R[phi, s, ACTION_B] = reset_reward

    initial = np.zeros((n_states, nphi))
    initial[0] = prior
    return FiniteLatentMdp(
        name="chain",
        state_names=tuple(f"s{i + 1}" for i in range(n_states)),
        actions=("A", "B"),
        latent_names=tuple(f"slip={t:g}" for t in slips),
        transitions=P,
        raw_rewards=R,
        terminal=np.zeros(n_states, dtype=bool),
        initial=initial,
    )
