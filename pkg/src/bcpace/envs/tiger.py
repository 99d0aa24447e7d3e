"""Tiger as a two-latent BAMDP with the last observation folded into the state."""

import numpy as np

from ..errors import InvalidParams
from .finite import FiniteLatentMdp

START, HEARD_LEFT, HEARD_RIGHT, TERMINAL = range(4)
LISTEN, OPEN_LEFT, OPEN_RIGHT = range(3)
TIGER_LEFT, TIGER_RIGHT = range(2)


def make_tiger(
    listen_accuracy=0.85,
    listen_cost=-1.0,
    treasure_reward=10.0,
    tiger_penalty=-100.0,
    prior_left=0.5,
    continuing=False,
):
    """Build the Tiger BAMDP.

    States are ``start, heard-left, heard-right, terminal``; listening moves to
    the heard-* state matching the (noisy) observation and opening either door
    ends the game. With ``continuing`` a fresh game starts after each door
    opening instead of ending the episode.
    """
    if not 0.5 <= listen_accuracy <= 1.0:
        raise InvalidParams("listen_accuracy must lie in [0.5, 1]")
    if not 0.0 < prior_left < 1.0:
        raise InvalidParams("prior_left must lie in (0, 1)")

    P = np.zeros((2, 3, 4, 4))
    R = np.zeros((2, 4, 3))
    for phi in (TIGER_LEFT, TIGER_RIGHT):
        p_left = listen_accuracy if phi == TIGER_LEFT else 1.0 - listen_accuracy
        for s in (START, HEARD_LEFT, HEARD_RIGHT):
            P[phi, LISTEN, s, HEARD_LEFT] = p_left
            P[phi, LISTEN, s, HEARD_RIGHT] = 1.0 - p_left
            P[phi, OPEN_LEFT, s, TERMINAL] = 1.0
            P[phi, OPEN_RIGHT, s, TERMINAL] = 1.0
            R[phi, s, LISTEN] = listen_cost
            R[phi, s, OPEN_LEFT] = tiger_penalty if phi == TIGER_LEFT else treasure_reward
            R[phi, s, OPEN_RIGHT] = treasure_reward if phi == TIGER_LEFT else tiger_penalty
        P[phi, :, TERMINAL, TERMINAL] = 1.0

    initial = np.zeros((4, 2))
    initial[START] = (prior_left, 1.0 - prior_left)
    return FiniteLatentMdp(
        name="tiger",
        state_names=("start", "heard-left", "heard-right", "terminal"),
        actions=("listen", "open-left", "open-right"),
        latent_names=("tiger-left", "tiger-right"),
        transitions=P,
        raw_rewards=R,
        terminal=[False, False, False, True],
        initial=initial,
        restart_on_terminal=continuing,
    )
