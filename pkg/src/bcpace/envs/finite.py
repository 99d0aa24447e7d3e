"""Latent-MDP families with finitely many states, stored as dense tables."""

from __future__ import annotations

import hashlib

import numpy as np

from ..core import LatentMdpFamily, TabularLatentMdp
from ..errors import InvalidParams


class FiniteLatentMdp(LatentMdpFamily):
    """BAMDP over a finite state set with the discrete metric.

    Parameters
    ----------
    transitions : array (n_latents, n_actions, n_states, n_states)
    raw_rewards : array (n_latents, n_states, n_actions), native units
    terminal : bool array (n_states,)
    initial : array (n_states, n_latents), joint P0 over (state, latent)

    Terminal rows must be absorbing; their native reward is forced to zero so
    that the shifted reward there equals the shift.
    """

    def __init__(
        self,
        name,
        state_names,
        actions,
        latent_names,
        transitions,
        raw_rewards,
        terminal,
        initial,
        restart_on_terminal=False,
    ):
        P = np.asarray(transitions, dtype=float)
        Rraw = np.array(raw_rewards, dtype=float)
        term = np.asarray(terminal, dtype=bool)
        init = np.asarray(initial, dtype=float)
        nphi, na, ns, ns2 = P.shape
        if ns != ns2 or Rraw.shape != (nphi, ns, na) or term.shape != (ns,):
            raise InvalidParams("inconsistent table shapes")
        if not np.allclose(P.sum(axis=-1), 1.0, atol=1e-12) or np.any(P < 0):
            raise InvalidParams("transition rows must be probability vectors")
        if init.shape != (ns, nphi) or not np.isclose(init.sum(), 1.0):
            raise InvalidParams("initial distribution must be a joint pmf over (state, latent)")
        for s in np.flatnonzero(term):
            if not np.allclose(P[:, :, s, s], 1.0):
                raise InvalidParams(f"terminal state {state_names[s]} must be absorbing")
        Rraw[:, term, :] = 0.0

        self.name = name
        self.state_names = tuple(state_names)
        self.actions = tuple(actions)
        self.latent_names = tuple(latent_names)
        self.P = P
        self.raw_rewards = Rraw
        self.terminal = term
        self.initial = init
        self.restart_on_terminal = bool(restart_on_terminal)
        self.reward_shift = float(max(0.0, -Rraw.min()))
        self.R = Rraw + self.reward_shift
        self.r_max = float(self.R.max())
        for arr in (self.P, self.R, self.raw_rewards, self.terminal, self.initial):
            arr.flags.writeable = False

    @property
    def num_states(self) -> int:
        return len(self.state_names)

    def state_index(self, name) -> int:
        return self.state_names.index(name)

    # -- generative model -------------------------------------------------
    def reward(self, s, phi, a):
        return float(self.R[phi, s, a])

    def transition_likelihood(self, s_next, s, phi, a):
        return float(self.P[phi, a, s, s_next])

    def likelihoods(self, s_next, s, a):
        return self.P[:, a, s, s_next]

    def sample_next(self, s, phi, a, rng):
        row = self.P[phi, a, s]
        return int(rng.choice(row.size, p=row))

    def initial_distribution(self):
        return [
            (int(s), int(phi), float(self.initial[s, phi]))
            for s, phi in zip(*np.nonzero(self.initial))
        ]

    def initial_belief(self, s0=None):
        from ..core import Belief

        if s0 is None:
            return Belief(self.initial.sum(axis=0))
        return Belief(self.initial[int(s0)])

    def is_terminal(self, s):
        return bool(self.terminal[int(s)])

    # -- metric -----------------------------------------------------------
    @property
    def cache_key(self) -> str:
        h = hashlib.sha256()
        for arr in (self.P, self.raw_rewards, self.terminal, self.initial):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(bytes([self.restart_on_terminal]))
        return f"{self.name}-{h.hexdigest()[:16]}"

    def state_vector(self, s):
        return np.array([float(s)])

    def vector_state(self, v):
        return int(round(float(v[0])))

    def state_distances(self, v, mat):
        return (mat[:, 0] != v[0]).astype(float)

    def lipschitz_constants(self):
        # Distinct states are at distance 1, so the constants are the largest
        # reward gap and transition L1 gap over same-latent, same-action pairs.
        dR = np.abs(self.R[:, :, None, :] - self.R[:, None, :, :]).max()
        dP = 0.0
        for phi in range(self.num_latents):
            for a in range(self.num_actions):
                rows = self.P[phi, a]
                dP = max(dP, np.abs(rows[:, None, :] - rows[None, :, :]).sum(-1).max())
        return float(dR), float(dP)

    # -- latent discretization -------------------------------------------
    def latent_mdp(self, phi, gamma):
        return TabularLatentMdp(
            transitions=[self.P[phi, a] for a in range(self.num_actions)],
            rewards=self.R[phi],
            terminal=self.terminal,
        )

    def locate(self, s):
        return np.array([int(s)]), np.array([1.0])
