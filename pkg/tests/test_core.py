import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcpace import Belief, InvalidBelief, belief_reward, belief_update, make_env, step_belief_mdp
from bcpace.core import step_hyper
from bcpace.envs.chain import ACTION_A
from bcpace.envs.finite import FiniteLatentMdp
from bcpace.envs.tiger import HEARD_LEFT, HEARD_RIGHT, LISTEN, START
from bcpace.errors import ImpossibleTransition


def random_model(rng, nphi=3, na=2, ns=4, sparse=False):
    P = rng.dirichlet(np.ones(ns), size=(nphi, na, ns))
    if sparse:
        P = P * (rng.random(P.shape) < 0.6)
        P[..., 0] += 1e-3
        P /= P.sum(axis=-1, keepdims=True)
    R = rng.uniform(-5, 5, size=(nphi, ns, na))
    init = np.zeros((ns, nphi))
    init[0] = rng.dirichlet(np.ones(nphi))
    return FiniteLatentMdp("rand", [f"s{i}" for i in range(ns)], [f"a{i}" for i in range(na)],
                           [f"p{i}" for i in range(nphi)], P, R, np.zeros(ns, bool), init)


# -- Belief ------------------------------------------------------------------

def test_belief_renormalizes_and_clamps():
    b = Belief([2.0, 2.0, 1e-14])
    assert b.weights.tolist() == [0.5, 0.5, 0.0]
    assert not b.weights.flags.writeable


@pytest.mark.parametrize("w", [[], [0.0, 0.0], [0.5, -0.5], [np.nan, 1.0]])
def test_belief_rejects_invalid(w):
    with pytest.raises(InvalidBelief):
        Belief(w)


# -- belief_update -----------------------------------------------------------

def test_tiger_listen_update(tiger):
    b = belief_update(tiger, Belief([0.5, 0.5]), START, LISTEN, HEARD_LEFT)
    np.testing.assert_allclose(b.weights, [0.85, 0.15], atol=1e-12)


def test_likelihood_invariant_update_is_identity():
    # transitions identical across latents, only rewards differ
    rng = np.random.default_rng(3)
    P1 = rng.dirichlet(np.ones(3), size=(1, 2, 3))
    P = np.repeat(P1, 2, axis=0)
    init = np.zeros((3, 2))
    init[0] = 0.5
    m = FiniteLatentMdp("same", ["a", "b", "c"], ["x", "y"], ["p", "q"], P,
                        rng.normal(size=(2, 3, 2)), np.zeros(3, bool), init)
    b = Belief([0.3, 0.7])
    for s2 in range(3):
        np.testing.assert_allclose(belief_update(m, b, 0, 1, s2).weights, b.weights, atol=1e-15)


def test_impossible_transition():
    P = np.zeros((2, 1, 2, 2))
    P[0, 0, :, 0] = 1.0
    P[1, 0, :, 1] = 1.0
    init = np.zeros((2, 2))
    init[0] = 0.5
    m = FiniteLatentMdp("det", ["a", "b"], ["go"], ["p", "q"], P, np.zeros((2, 2, 1)),
                        np.zeros(2, bool), init)
    with pytest.raises(ImpossibleTransition):
        belief_update(m, Belief([1.0, 0.0]), 0, 0, 1)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_simplex_closure(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng, nphi=int(rng.integers(2, 5)), sparse=True)
    for _ in range(50):
        b = Belief(rng.dirichlet(np.ones(m.num_latents) * 0.3))
        s, a, s2 = int(rng.integers(4)), int(rng.integers(2)), int(rng.integers(4))
        if float(b.weights @ m.P[:, a, s, s2]) <= 0:
            continue
        out = belief_update(m, b, s, a, s2).weights
        assert abs(out.sum() - 1.0) <= 1e-9
        assert np.all(out >= 0)


def test_simplex_closure_bulk():
    rng = np.random.default_rng(0)
    models = [random_model(rng, sparse=True) for _ in range(10)]
    checked = 0
    while checked < 10_000:
        m = models[rng.integers(10)]
        b = Belief(rng.dirichlet(np.ones(3)))
        s, a, s2 = int(rng.integers(4)), int(rng.integers(2)), int(rng.integers(4))
        if float(b.weights @ m.P[:, a, s, s2]) <= 0:
            continue
        out = belief_update(m, b, s, a, s2).weights
        assert abs(out.sum() - 1.0) <= 1e-9 and np.all(out >= 0)
        checked += 1


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["tiger", "chain"]))
def test_vertex_absorption(seed, name):
    m = make_env(name)
    rng = np.random.default_rng(seed)
    phi = int(rng.integers(m.num_latents))
    s = int(rng.integers(m.num_states))
    a = int(rng.integers(m.num_actions))
    s2 = m.sample_next(s, phi, a, rng)
    b = Belief.one_hot(m.num_latents, phi)
    assert belief_update(m, b, s, a, s2) == b


# -- belief_reward -------------------------------------------------------------

def test_one_hot_reward(tiger):
    for phi in range(2):
        for a in range(3):
            assert belief_reward(tiger, START, Belief.one_hot(2, phi), a) == tiger.reward(START, phi, a)


def test_midpoint_reward():
    P = np.zeros((2, 1, 1, 1))
    P[...] = 1.0
    R = np.array([[[10.0]], [[0.0]]])
    m = FiniteLatentMdp("mid", ["s"], ["a"], ["p", "q"], P, R, [False], [[0.5, 0.5]])
    assert belief_reward(m, 0, Belief([0.5, 0.5]), 0) == 5.0


def test_chain_end_reward_independent_of_latent(chain):
    rng = np.random.default_rng(1)
    for _ in range(20):
        b = Belief(rng.dirichlet(np.ones(3)))
        assert chain.raw(belief_reward(chain, 4, b, ACTION_A)) == pytest.approx(10.0, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_reward_bounds(seed):
    rng = np.random.default_rng(seed)
    for m in (make_env("tiger"), make_env("chain"), random_model(rng)):
        b = Belief(rng.dirichlet(np.ones(m.num_latents)))
        s = int(rng.integers(m.num_states))
        a = int(rng.integers(m.num_actions))
        r = belief_reward(m, s, b, a)
        assert 0.0 <= r <= m.r_max + 1e-12


# -- step_belief_mdp -------------------------------------------------------------

def test_tiger_listen_step(tiger):
    rng = np.random.default_rng(0)
    seen = set()
    for _ in range(50):
        r, s2, b2 = step_belief_mdp(tiger, START, Belief([0.5, 0.5]), LISTEN, rng)
        assert r == 99.0  # listen cost -1 plus the shift of 100
        assert s2 in (HEARD_LEFT, HEARD_RIGHT)
        expected = [0.85, 0.15] if s2 == HEARD_LEFT else [0.15, 0.85]
        np.testing.assert_allclose(b2.weights, expected, atol=1e-12)
        seen.add(s2)
    assert seen == {HEARD_LEFT, HEARD_RIGHT}


def test_deterministic_lightdark_step(lightdark):
    s0 = lightdark.initial_distribution()[0][0]
    outs = {step_belief_mdp(lightdark, s0, Belief.one_hot(2, 0), 2, np.random.default_rng(9))[1]
            for _ in range(5)}
    assert len(outs) == 1


def test_one_hot_stays_one_hot(chain):
    rng = np.random.default_rng(4)
    s, b = 0, Belief.one_hot(3, 1)
    for _ in range(100):
        _, s, b = step_belief_mdp(chain, s, b, int(rng.integers(2)), rng)
        assert b == Belief.one_hot(3, 1)


def test_restart_on_terminal(tiger_cont):
    st_ = step_hyper(tiger_cont, START, 0, Belief([0.5, 0.5]), 2, np.random.default_rng(0))
    assert st_.restarted and not st_.terminal
    assert st_.next_state == START and st_.next_belief == Belief([0.5, 0.5])
    assert st_.raw_reward == 10.0
