from pathlib import Path

import numpy as np
import pytest

from bcpace import make_env, profile_for, solve_latent_qtable
from bcpace.envs.finite import FiniteLatentMdp

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture(scope="session")
def tiger():
    return make_env("tiger")


@pytest.fixture(scope="session")
def tiger_cont():
    return make_env("tiger", {"continuing": True})


@pytest.fixture(scope="session")
def chain():
    return make_env("chain")


@pytest.fixture(scope="session")
def lightdark():
    return make_env("lightdark")


@pytest.fixture(scope="session")
def tiger_q(tiger):
    return solve_latent_qtable(tiger, 0.95, 1e-10)


@pytest.fixture(scope="session")
def chain_q(chain):
    return solve_latent_qtable(chain, 0.95, 1e-10)


@pytest.fixture(scope="session")
def tiger_profile(tiger):
    return profile_for(tiger, 0.95)


def line_mdp(rewards, nphi=1, terminal_last=False):
    """Deterministic cycle s0 -> s1 -> ... -> s0 with one action."""
    n = len(rewards)
    P = np.zeros((nphi, 1, n, n))
    for s in range(n):
        P[:, 0, s, (s + 1) % n] = 1.0
    if terminal_last:
        P[:, 0, n - 1, :] = 0.0
        P[:, 0, n - 1, n - 1] = 1.0
    R = np.tile(np.asarray(rewards, dtype=float)[None, :, None], (nphi, 1, 1))
    initial = np.zeros((n, nphi))
    initial[0] = 1.0 / nphi
    term = np.zeros(n, dtype=bool)
    term[-1] = terminal_last
    return FiniteLatentMdp(
        name="line",
        state_names=tuple(f"s{i}" for i in range(n)),
        actions=("go",),
        latent_names=tuple(f"phi{i}" for i in range(nphi)),
        transitions=P,
        raw_rewards=R,
        terminal=term,
        initial=initial,
    )
