"""Beliefs, the latent-MDP family interface and the belief-MDP reformulation."""

from __future__ import annotations

import abc
from dataclasses import dataclass
from typing import Any, NamedTuple, Sequence

import numpy as np

from .errors import ImpossibleTransition, InvalidBelief

State = Any

#: Belief entries below this are clamped to zero before renormalizing.
BELIEF_FLOOR = 1e-12
#: A latent counts as "supported" by a belief when its weight exceeds this.
SUPPORT_FLOOR = 1e-9


class Belief:
    """A point on the probability simplex over latent variables.

    Weights are renormalized on construction; entries below ``BELIEF_FLOOR``
    are clamped to zero first. The weight array is read-only.
    """

    __slots__ = ("weights",)

    def __init__(self, weights):
        w = np.array(weights, dtype=float).reshape(-1)
        if w.size == 0:
            raise InvalidBelief("belief must have at least one entry")
        if not np.all(np.isfinite(w)) or np.any(w < -BELIEF_FLOOR):
            raise InvalidBelief(f"belief weights must be finite and nonnegative: {w}")
        w[w < BELIEF_FLOOR] = 0.0
        total = w.sum()
        if total <= 0.0:
            raise InvalidBelief("belief weights sum to zero")
        w /= total
        w.flags.writeable = False
        self.weights = w

    @classmethod
    def uniform(cls, n: int) -> "Belief":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def one_hot(cls, n: int, index: int) -> "Belief":
        w = np.zeros(n)
        w[index] = 1.0
        return cls(w)

    @property
    def dim(self) -> int:
        return self.weights.size

    def __array__(self, dtype=None, copy=None):
        return self.weights if dtype is None else self.weights.astype(dtype)

    def __len__(self):
        return self.weights.size

    def __getitem__(self, i):
        return self.weights[i]

    def __eq__(self, other):
        if not isinstance(other, Belief):
            return NotImplemented
        return np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash(self.weights.tobytes())

    def __repr__(self):
        return f"Belief({np.array2string(self.weights, precision=4)})"

    def l1(self, other) -> float:
        return float(np.abs(self.weights - np.asarray(other, dtype=float)).sum())

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > SUPPORT_FLOOR)


def as_belief(b) -> Belief:
    return b if isinstance(b, Belief) else Belief(b)


@dataclass(frozen=True)
class HyperState:
    state: State
    latent: int


@dataclass(frozen=True)
class TabularLatentMdp:
    """A latent MDP discretized for value iteration.

    ``transitions[a]`` is an (S, S) sparse or dense row-stochastic matrix over
    the discretization cells, ``rewards`` is (S, A) in shifted units and
    ``terminal`` flags absorbing cells whose value is fixed externally.
    """

    transitions: Sequence[Any]
    rewards: np.ndarray
    terminal: np.ndarray


class LatentMdpFamily(abc.ABC):
    """Generative model of a BAMDP: one MDP per latent variable.

    Rewards returned by :meth:`reward` are already shifted into ``[0, r_max]``;
    ``reward_shift`` records the constant added to native rewards. Terminal
    states are absorbing and (in shifted units) keep paying ``reward_shift``
    per step, which keeps the shift policy-invariant.
    """

    name: str = "bamdp"
    actions: tuple[str, ...] = ()
    latent_names: tuple[str, ...] = ()
    reward_shift: float = 0.0
    r_max: float = 1.0
    #: When set, reaching a terminal state starts a fresh game: the state and
    #: latent are redrawn from P0 and the belief resets to b0.
    restart_on_terminal: bool = False

    @property
    def num_latents(self) -> int:
        return len(self.latent_names)

    @property
    def num_actions(self) -> int:
        return len(self.actions)

    # -- generative model -------------------------------------------------
    @abc.abstractmethod
    def reward(self, s: State, phi: int, a: int) -> float:
        """Expected shifted reward R(s, phi, a)."""

    @abc.abstractmethod
    def transition_likelihood(self, s_next: State, s: State, phi: int, a: int) -> float:
        """P(s' | s, phi, a) as a pmf (discrete) or density (continuous)."""

    @abc.abstractmethod
    def sample_next(self, s: State, phi: int, a: int, rng: np.random.Generator) -> State:
        ...

    @abc.abstractmethod
    def initial_distribution(self) -> list[tuple[State, int, float]]:
        """P0 as a list of ``(state, latent, probability)``."""

    @abc.abstractmethod
    def is_terminal(self, s: State) -> bool:
        ...

    def realized_reward(self, s: State, phi: int, a: int, s_next: State) -> float:
        """Shifted reward actually paid on the transition ``s -> s_next``."""
        return self.reward(s, phi, a)

    def likelihoods(self, s_next: State, s: State, a: int) -> np.ndarray:
        return np.array(
            [self.transition_likelihood(s_next, s, phi, a) for phi in range(self.num_latents)]
        )

    # -- metric -----------------------------------------------------------
    @abc.abstractmethod
    def state_vector(self, s: State) -> np.ndarray:
        """Flat float encoding used for storage and batched distances."""

    @abc.abstractmethod
    def vector_state(self, v: np.ndarray) -> State:
        """Inverse of :meth:`state_vector`."""

    @abc.abstractmethod
    def state_distances(self, v: np.ndarray, mat: np.ndarray) -> np.ndarray:
        """Distances from encoded state ``v`` to every row of ``mat``."""

    def state_distance(self, s1: State, s2: State) -> float:
        v2 = self.state_vector(s2)[None, :]
        return float(self.state_distances(self.state_vector(s1), v2)[0])

    def state_action_distance(self, s1: State, a1: int, s2: State, a2: int) -> float:
        if a1 != a2:
            return float("inf")
        return self.state_distance(s1, s2)

    @abc.abstractmethod
    def lipschitz_constants(self) -> tuple[float, float]:
        """(L_R, L_P) for the reward and transition functions under the metric."""

    # -- latent discretization -------------------------------------------
    @abc.abstractmethod
    def latent_mdp(self, phi: int, gamma: float) -> TabularLatentMdp:
        ...

    @abc.abstractmethod
    def locate(self, s: State) -> tuple[np.ndarray, np.ndarray]:
        """Discretization cells and interpolation weights for state ``s``."""

    @property
    def cache_key(self) -> str:
        return self.name

    # -- helpers ----------------------------------------------------------
    def terminal_value(self, gamma: float) -> float:
        return self.reward_shift / (1.0 - gamma)

    def raw(self, shifted_reward: float) -> float:
        return shifted_reward - self.reward_shift

    def sample_initial(self, rng: np.random.Generator) -> tuple[State, int]:
        dist = self.initial_distribution()
        probs = np.array([p for _, _, p in dist])
        i = rng.choice(len(dist), p=probs / probs.sum())
        s, phi, _ = dist[i]
        return s, phi

    def initial_belief(self, s0: State | None = None) -> Belief:
        """Prior over latents, conditioned on the initial state when given."""
        w = np.zeros(self.num_latents)
        for s, phi, p in self.initial_distribution():
            if s0 is None or self.state_distance(s, s0) == 0.0:
                w[phi] += p
        return Belief(w)


# ---------------------------------------------------------------------------
# belief-MDP operations
# ---------------------------------------------------------------------------


def belief_update(model: LatentMdpFamily, b, s: State, a: int, s_next: State) -> Belief:
    """Bayes estimator: posterior over latents after observing ``s -> s_next``."""
    w = np.asarray(as_belief(b).weights)
    unnorm = w * model.likelihoods(s_next, s, a)
    total = unnorm.sum()
    if not total > 0.0:
        raise ImpossibleTransition(
            f"transition {s!r} -a{a}-> {s_next!r} has zero likelihood under the belief"
        )
    return Belief(unnorm / total)


def belief_reward(model: LatentMdpFamily, s: State, b, a: int) -> float:
    w = as_belief(b).weights
    return float(sum(w[phi] * model.reward(s, phi, a) for phi in np.flatnonzero(w)))


class Step(NamedTuple):
    reward: float  # belief-MDP reward R(s, b, a), shifted
    raw_reward: float  # realized native reward under the true latent
    next_state: State
    next_belief: Belief
    next_latent: int
    terminal: bool  # episode ended (never set when the model restarts)
    restarted: bool  # a terminal state was hit and a fresh game began


def step_hyper(
    model: LatentMdpFamily, s: State, phi: int, b, a: int, rng: np.random.Generator
) -> Step:
    """Advance the belief MDP with a known true latent ``phi``."""
    b = as_belief(b)
    r = belief_reward(model, s, b, a)
    s_next = model.sample_next(s, phi, a, rng)
    raw = model.raw(model.realized_reward(s, phi, a, s_next))
    if model.is_terminal(s_next):
        if model.restart_on_terminal:
            s0, phi0 = model.sample_initial(rng)
            return Step(r, raw, s0, model.initial_belief(s0), phi0, False, True)
        return Step(r, raw, s_next, belief_update(model, b, s, a, s_next), phi, True, False)
    b_next = belief_update(model, b, s, a, s_next)
    return Step(r, raw, s_next, b_next, phi, False, False)


def step_belief_mdp(model: LatentMdpFamily, s: State, b, a: int, rng: np.random.Generator):
    """Sample one belief-MDP transition, returning ``(r, s', b')``.

    The latent is drawn from ``b`` first and the next state from that latent's
    dynamics, which samples the belief-weighted mixture.
    """
    b = as_belief(b)
    phi = int(rng.choice(b.dim, p=b.weights))
    st = step_hyper(model, s, phi, b, a, rng)
    return st.reward, st.next_state, st.next_belief
