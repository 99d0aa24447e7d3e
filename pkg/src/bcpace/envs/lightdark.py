"""Light-Dark Tiger: a 2D navigation BAMDP whose latent is revealed at the left wall.

The state is encoded as ``(x, y, obs, done)``. ``obs`` is 0 until the agent
first touches the left wall and ``phi + 1`` afterwards, which folds the
revealing observation into the state so the Bayes estimator sees it through
the transition likelihood. ``done`` marks the absorbing post-goal state.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
from scipy.stats import norm

from ..core import Belief, LatentMdpFamily, TabularLatentMdp
from ..errors import InvalidParams

UP, DOWN, LEFT, RIGHT = range(4)
MOVES = np.array([[0.0, 1.0], [0.0, -1.0], [-1.0, 0.0], [1.0, 0.0]])
TIGER_TOP_RIGHT, TIGER_BOTTOM_RIGHT = range(2)
TRUNCATION = 3.0


def _quadrature(sigma, n):
    """Nodes and weights for a N(0, sigma^2) truncated at +-3 sigma."""
    if sigma == 0.0:
        return np.zeros(1), np.ones(1)
    u, w = np.polynomial.legendre.leggauss(n)
    x = u * TRUNCATION * sigma
    w = w * norm.pdf(x, scale=sigma)
    return x, w / w.sum()


class LightDarkTiger(LatentMdpFamily):
    def __init__(
        self,
        sigma=0.0,
        width=4.0,
        height=2.0,
        start=(3.0, 1.0),
        goal_radius=0.5,
        wall_threshold=0.05,
        treasure_reward=10.0,
        tiger_penalty=-100.0,
        grid_pitch=0.05,
        quadrature_points=7,
    ):
        if sigma < 0:
            raise InvalidParams("sigma must be nonnegative")
        if width <= 0 or height <= 0 or goal_radius <= 0 or grid_pitch <= 0:
            raise InvalidParams("geometry parameters must be positive")
        self.sigma = float(sigma)
        self.width = float(width)
        self.height = float(height)
        self.start = np.array(start, dtype=float)
        self.goal_radius = float(goal_radius)
        self.wall_threshold = float(wall_threshold)
        self.treasure_reward = float(treasure_reward)
        self.tiger_penalty = float(tiger_penalty)
        self.grid_pitch = float(grid_pitch)
        self.quadrature_points = int(quadrature_points)

        self.name = "lightdark"
        self.actions = ("up", "down", "left", "right")
        self.latent_names = ("tiger-top-right", "tiger-bottom-right")
        # goal 0 is the top-right corner, goal 1 the bottom-right corner
        self.goals = np.array([[self.width, self.height], [self.width, 0.0]])
        if not self._inside(self.start) or self._goal(self.start) >= 0 or self._at_wall(self.start[0]):
            raise InvalidParams("start must be inside the box, off the wall and outside the goals")
        self.reward_shift = float(max(0.0, -min(self.tiger_penalty, self.treasure_reward, 0.0)))
        self.r_max = max(self.treasure_reward, self.tiger_penalty, 0.0) + self.reward_shift
        self.restart_on_terminal = False
        self._nodes = _quadrature(self.sigma, self.quadrature_points)
        self._nx = int(round(self.width / self.grid_pitch)) + 1
        self._ny = int(round(self.height / self.grid_pitch)) + 1
        self._latent_cache = {}

    # -- geometry ---------------------------------------------------------
    def _inside(self, p):
        return 0.0 <= p[0] <= self.width and 0.0 <= p[1] <= self.height

    def _at_wall(self, x):
        return x <= self.wall_threshold

    def _goal(self, p):
        d = np.hypot(*(self.goals - np.asarray(p)[:2]).T)
        hit = np.flatnonzero(d <= self.goal_radius)
        return int(hit[0]) if hit.size else -1

    def _goal_raw(self, goal, phi):
        # latent phi puts the tiger behind goal phi
        return self.tiger_penalty if goal == phi else self.treasure_reward

    def _clip(self, p):
        return np.array([min(max(p[0], 0.0), self.width), min(max(p[1], 0.0), self.height)])

    def _successor(self, s, phi, a, noise):
        x, y, obs, done = s
        p = self._clip(np.array([x, y]) + MOVES[a] + noise)
        goal = self._goal(p)
        if obs == 0 and self._at_wall(p[0]):
            obs = phi + 1
        return (float(p[0]), float(p[1]), int(obs), int(goal >= 0)), goal

    # -- generative model -------------------------------------------------
    def initial_distribution(self):
        s0 = (float(self.start[0]), float(self.start[1]), 0, 0)
        return [(s0, 0, 0.5), (s0, 1, 0.5)]

    def initial_belief(self, s0=None):
        return Belief([0.5, 0.5])

    def is_terminal(self, s):
        return bool(s[3])

    def sample_next(self, s, phi, a, rng):
        if s[3]:
            return tuple(s)
        noise = np.zeros(2)
        if self.sigma > 0:
            for i in range(2):
                z = rng.normal()
                while abs(z) > TRUNCATION:
                    z = rng.normal()
                noise[i] = z * self.sigma
        return self._successor(s, phi, a, noise)[0]

    def _expected_raw(self, s, phi, a):
        if s[3]:
            return 0.0
        nodes, w = self._nodes
        total = 0.0
        for i, nx in enumerate(nodes):
            for j, ny in enumerate(nodes):
                _, goal = self._successor(s, phi, a, np.array([nx, ny]))
                if goal >= 0:
                    total += w[i] * w[j] * self._goal_raw(goal, phi)
        return total

    def reward(self, s, phi, a):
        return self._expected_raw(tuple(s), phi, a) + self.reward_shift

    def realized_reward(self, s, phi, a, s_next):
        if s[3] or not s_next[3]:
            return self.reward_shift
        return self._goal_raw(self._goal(s_next), phi) + self.reward_shift

    def _axis_density(self, target, value, hi):
        if self.sigma == 0.0:
            return 1.0 if abs(min(max(target, 0.0), hi) - value) <= 1e-9 else 0.0
        lo_cut, hi_cut = target - TRUNCATION * self.sigma, target + TRUNCATION * self.sigma
        mass = norm.cdf(TRUNCATION) - norm.cdf(-TRUNCATION)
        # clipping puts the tail mass beyond a wall onto the wall itself
        if value <= 0.0 and lo_cut < 0.0:
            return float((norm.cdf(-target / self.sigma) - norm.cdf(-TRUNCATION)) / mass)
        if value >= hi and hi_cut > hi:
            return float((norm.cdf(TRUNCATION) - norm.cdf((hi - target) / self.sigma)) / mass)
        if not lo_cut <= value <= hi_cut:
            return 0.0
        return float(norm.pdf(value, loc=target, scale=self.sigma) / mass)

    def transition_likelihood(self, s_next, s, phi, a):
        if s[3]:
            return 1.0 if tuple(s_next) == tuple(s) else 0.0
        target = np.array(s[:2]) + MOVES[a]
        dens = self._axis_density(target[0], s_next[0], self.width) * self._axis_density(
            target[1], s_next[1], self.height
        )
        if dens == 0.0:
            return 0.0
        expected_obs = s[2] if s[2] or not self._at_wall(s_next[0]) else phi + 1
        expected_done = int(self._goal(s_next[:2]) >= 0)
        if s_next[2] != expected_obs or s_next[3] != expected_done:
            return 0.0
        return dens

    # -- metric -----------------------------------------------------------
    def state_vector(self, s):
        return np.array(s, dtype=float)

    def vector_state(self, v):
        return (float(v[0]), float(v[1]), int(round(v[2])), int(round(v[3])))

    def state_distances(self, v, mat):
        pos = np.hypot(mat[:, 0] - v[0], mat[:, 1] - v[1])
        return pos + (mat[:, 2] != v[2]) + (mat[:, 3] != v[3])

    def lipschitz_constants(self):
        span = self.r_max  # rewards are expectations of values in [0, r_max]
        if self.sigma > 0:
            # L1 gap between two shifted Gaussians is at most sqrt(2/pi) |shift| / sigma
            L_P = math.sqrt(2.0 / math.pi) / self.sigma
            return span * L_P / 2.0, L_P
        # deterministic moves: maximize over the integer lattice of reachable points
        xs = np.arange(0.0, self.width + 1e-9, 1.0)
        ys = np.arange(0.0, self.height + 1e-9, 1.0)
        pts = [(x, y, 0, 0) for x in xs for y in ys if self._goal((x, y)) < 0]
        L_R = 0.0
        for i, p in enumerate(pts):
            for q in pts[i + 1:]:
                d = math.hypot(p[0] - q[0], p[1] - q[1])
                for phi in range(self.num_latents):
                    for a in range(self.num_actions):
                        L_R = max(L_R, abs(self.reward(p, phi, a) - self.reward(q, phi, a)) / d)
        return L_R, 2.0

    @property
    def cache_key(self):
        return (
            f"lightdark-s{self.sigma:g}-w{self.width:g}-h{self.height:g}-st{self.start[0]:g},{self.start[1]:g}"
            f"-r{self.goal_radius:g}-wall{self.wall_threshold:g}-t{self.treasure_reward:g}"
            f"-p{self.tiger_penalty:g}-g{self.grid_pitch:g}-q{self.quadrature_points}"
        )

    # -- latent discretization -------------------------------------------
    @property
    def num_cells(self):
        return self._nx * self._ny + 1

    @property
    def terminal_cell(self):
        return self._nx * self._ny

    def cell_positions(self):
        ix, iy = np.meshgrid(np.arange(self._nx), np.arange(self._ny), indexing="ij")
        return np.stack([ix.ravel() * self.grid_pitch, iy.ravel() * self.grid_pitch], axis=1)

    def _bilinear(self, x, y):
        fx = min(max(x / self.grid_pitch, 0.0), self._nx - 1)
        fy = min(max(y / self.grid_pitch, 0.0), self._ny - 1)
        ix, iy = min(int(fx), self._nx - 2), min(int(fy), self._ny - 2)
        tx, ty = fx - ix, fy - iy
        # snap round-off so lattice points hit a single cell exactly
        if abs(tx) < 1e-9:
            tx = 0.0
        if abs(tx - 1.0) < 1e-9:
            tx = 1.0
        if abs(ty) < 1e-9:
            ty = 0.0
        if abs(ty - 1.0) < 1e-9:
            ty = 1.0
        cells, weights = [], []
        for dx, wx in ((0, 1.0 - tx), (1, tx)):
            for dy, wy in ((0, 1.0 - ty), (1, ty)):
                if wx * wy > 0.0:
                    cells.append((ix + dx) * self._ny + iy + dy)
                    weights.append(wx * wy)
        return np.array(cells, dtype=np.int64), np.array(weights)

    def locate(self, s):
        if s[3]:
            return np.array([self.terminal_cell]), np.array([1.0])
        return self._bilinear(s[0], s[1])

    def latent_mdp(self, phi, gamma):
        key = phi
        if key in self._latent_cache:
            return self._latent_cache[key]
        pos = self.cell_positions()
        n = self.num_cells
        nodes, w = self._nodes
        trans = []
        R = np.zeros((n, self.num_actions))
        for a in range(self.num_actions):
            rows, cols, vals = [], [], []
            for c, (x, y) in enumerate(pos):
                if self._goal((x, y)) >= 0:
                    # goal cells are never occupied; treat as absorbing
                    rows.append(c)
                    cols.append(self.terminal_cell)
                    vals.append(1.0)
                    R[c, a] = self.reward_shift
                    continue
                r = 0.0
                for i, nx in enumerate(nodes):
                    for j, ny in enumerate(nodes):
                        p = w[i] * w[j]
                        s2, goal = self._successor((x, y, phi + 1, 0), phi, a, np.array([nx, ny]))
                        if goal >= 0:
                            r += p * self._goal_raw(goal, phi)
                            rows.append(c)
                            cols.append(self.terminal_cell)
                            vals.append(p)
                        else:
                            cc, ww = self._bilinear(s2[0], s2[1])
                            rows.extend([c] * cc.size)
                            cols.extend(cc.tolist())
                            vals.extend((p * ww).tolist())
                R[c, a] = r + self.reward_shift
            rows.append(self.terminal_cell)
            cols.append(self.terminal_cell)
            vals.append(1.0)
            R[self.terminal_cell, a] = self.reward_shift
            trans.append(sp.csr_matrix((vals, (rows, cols)), shape=(n, n)))
        terminal = np.zeros(n, dtype=bool)
        terminal[self.terminal_cell] = True
        out = TabularLatentMdp(transitions=trans, rewards=R, terminal=terminal)
        self._latent_cache[key] = out
        return out


def make_lightdark(**params):
    return LightDarkTiger(**params)
