"""Brute-force belief-grid value iteration for small discrete BAMDPs.

Beliefs live on the lattice ``{c / n : c in N^|Phi|, sum(c) = n}``; Bayes
updates are snapped back to the nearest lattice point (largest-remainder
rounding). ``pitch`` is the L1 distance between adjacent lattice points, so
``n = round(2 / pitch)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import as_belief
from .errors import InvalidParams, NonConvergence, OracleInfeasible
from .envs.finite import FiniteLatentMdp

DEFAULT_CELL_BUDGET = 2_000_000


def lattice_points(n: int, dim: int) -> np.ndarray:
    """All count vectors of ``dim`` nonnegative integers summing to ``n``."""
    pts = [c for c in itertools.product(range(n + 1), repeat=dim - 1) if sum(c) <= n]
    counts = np.array([list(c) + [n - sum(c)] for c in pts], dtype=np.int64)
    return counts.reshape(-1, dim)


def snap_counts(B: np.ndarray, n: int) -> np.ndarray:
    """Largest-remainder rounding of beliefs (rows of ``B``) to counts summing to ``n``."""
    x = B * n
    c = np.floor(x).astype(np.int64)
    short = n - c.sum(axis=1)
    frac = x - c
    # rank fractional parts, largest first; earlier index wins ties
    order = np.argsort(-frac, axis=1, kind="stable")
    rank = np.empty_like(order)
    np.put_along_axis(rank, order, np.arange(B.shape[1])[None, :], axis=1)
    c += rank < short[:, None]
    return c


class BeliefLattice:
    def __init__(self, pitch: float, dim: int):
        if pitch < 1e-3:
            raise InvalidParams("pitch must be >= 1e-3")
        self.n = max(1, int(round(2.0 / pitch)))
        self.pitch = 2.0 / self.n
        self.dim = dim
        self.counts = lattice_points(self.n, dim)
        self.points = self.counts / self.n
        self._keys = self._key(self.counts)
        self._order = np.argsort(self._keys)

    def __len__(self):
        return len(self.counts)

    def _key(self, counts):
        base = self.n + 1
        return counts[:, :-1] @ (base ** np.arange(self.dim - 1, dtype=np.int64))

    def index_of_counts(self, counts):
        keys = self._key(counts)
        pos = np.searchsorted(self._keys, keys, sorter=self._order)
        return self._order[pos]

    def snap(self, B) -> np.ndarray:
        """Lattice indices of the snapped beliefs (rows of ``B``)."""
        B = np.atleast_2d(np.asarray(B, dtype=float))
        return self.index_of_counts(snap_counts(B, self.n))


@dataclass
class BeliefGridOracle:
    model: FiniteLatentMdp
    lattice: BeliefLattice
    gamma: float
    values: np.ndarray  # (n_states, n_lattice), shifted units
    residual: float

    @property
    def pitch(self):
        return self.lattice.pitch

    def value(self, s, b) -> float:
        """Value at the lattice point nearest ``b``."""
        return float(self.values[int(s), self.lattice.snap(as_belief(b).weights)[0]])

    def q(self, s, b) -> np.ndarray:
        """One-step lookahead from the exact belief ``b`` into the grid values."""
        m = self.model
        w = as_belief(b).weights
        s = int(s)
        out = np.empty(m.num_actions)
        for a in range(m.num_actions):
            out[a] = w @ m.R[:, s, a] + self.gamma * self._continuation(s, w, a)
        return out

    def _continuation(self, s, w, a):
        m = self.model
        total = 0.0
        for s2 in range(m.num_states):
            lik = m.P[:, a, s, s2]
            p = float(w @ lik)
            if p <= 0.0:
                continue
            if m.terminal[s2]:
                if m.restart_on_terminal:
                    total += p * _reset_value(self)
                else:
                    total += p * m.terminal_value(self.gamma)
                continue
            b2 = w * lik / p
            total += p * self.values[s2, self.lattice.snap(b2)[0]]
        return total

    def value_exact(self, s, b) -> float:
        return float(self.q(s, b).max())

    def raw_value(self, s, b) -> float:
        """Lookahead value in native reward units."""
        return self.value_exact(s, b) - self.model.terminal_value(self.gamma)

    def initial_value(self) -> float:
        """Expected optimal raw value over P0."""
        m = self.model
        total = 0.0
        for s in range(m.num_states):
            p = m.initial[s].sum()
            if p > 0:
                total += p * self.raw_value(s, m.initial[s] / p)
        return total


def _reset_value(oracle):
    m = oracle.model
    total = 0.0
    for s in range(m.num_states):
        p = m.initial[s].sum()
        if p > 0:
            total += p * oracle.values[s, oracle.lattice.snap(m.initial[s] / p)[0]]
    return total


def oracle_solve(
    model: FiniteLatentMdp,
    pitch: float,
    gamma: float,
    tol: float = 1e-6,
    cell_budget: int = DEFAULT_CELL_BUDGET,
    max_iter: int = 100_000,
) -> BeliefGridOracle:
    if not isinstance(model, FiniteLatentMdp):
        raise OracleInfeasible("belief-grid oracle needs a finite-state model")
    if model.num_latents > 3:
        raise OracleInfeasible("belief-grid oracle supports at most three latents")
    if pitch < 1e-3:
        raise InvalidParams("pitch must be >= 1e-3")
    n = int(round(2.0 / pitch))
    n_lat = math.comb(n + model.num_latents - 1, model.num_latents - 1)
    if n_lat * model.num_states > cell_budget:
        raise OracleInfeasible(f"{n_lat * model.num_states} cells exceed budget {cell_budget}")
    lat = BeliefLattice(pitch, model.num_latents)
    L, S, A = len(lat), model.num_states, model.num_actions
    B = lat.points
    ncell = S * L
    reset_col = ncell  # extra absorbing column whose value is set each sweep

    P_a, R_a = [], []
    for a in range(A):
        rows, cols, vals = [], [], []
        R = np.empty(ncell)
        for s in range(S):
            R[s * L:(s + 1) * L] = B @ model.R[:, s, a]
            if model.terminal[s]:
                continue
            for s2 in range(S):
                lik = model.P[:, a, s, s2]
                p = B @ lik
                live = np.flatnonzero(p > 0)
                if live.size == 0:
                    continue
                if model.terminal[s2]:
                    col = np.full(live.size, reset_col)
                else:
                    b2 = B[live] * lik / p[live, None]
                    col = s2 * L + lat.snap(b2)
                rows.append(s * L + live)
                cols.append(col)
                vals.append(p[live])
        rows = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
        cols = np.concatenate(cols) if cols else np.empty(0, dtype=np.int64)
        vals = np.concatenate(vals) if vals else np.empty(0)
        P_a.append(sp.csr_matrix((vals, (rows, cols)), shape=(ncell, ncell + 1)))
        R_a.append(R)

    term_rows = np.concatenate([np.arange(s * L, (s + 1) * L) for s in np.flatnonzero(model.terminal)]) \
        if model.terminal.any() else np.empty(0, dtype=np.int64)
    t_val = model.terminal_value(gamma)
    init_cells = [
        (s, lat.snap(model.initial[s] / model.initial[s].sum())[0], model.initial[s].sum())
        for s in range(S)
        if model.initial[s].sum() > 0
    ]

    V = np.zeros(ncell)
    for _ in range(max_iter):
        if model.restart_on_terminal:
            ext = sum(p * V[s * L + j] for s, j, p in init_cells)
        else:
            ext = t_val
        Vx = np.append(V, ext)
        Vn = np.max([R_a[a] + gamma * (P_a[a] @ Vx) for a in range(A)], axis=0)
        Vn[term_rows] = ext if model.restart_on_terminal else t_val
        res = float(np.abs(Vn - V).max())
        V = Vn
        if res <= tol:
            break
    else:
        raise NonConvergence(f"oracle residual {res:.3g} > tol {tol:.3g}", residual=res)
    return BeliefGridOracle(model, lat, gamma, V.reshape(S, L), res)


# ---------------------------------------------------------------------------
# Light-Dark: the belief is either the prior or a vertex
# ---------------------------------------------------------------------------


@dataclass
class TwoPhaseOracle:
    """Optimal values for a model whose belief stays at the prior until a
    revealing event collapses it onto the true latent."""

    model: object
    gamma: float
    latent: object  # LatentQTable
    pre_values: np.ndarray  # (n_cells,), shifted units, belief at the prior
    residual: float

    def value(self, s) -> float:
        idx, w = self.model.locate(s)
        return float(w @ self.pre_values[idx])

    def raw_value(self, s) -> float:
        return self.value(s) - self.model.terminal_value(self.gamma)

    def initial_value(self) -> float:
        s0 = self.model.initial_distribution()[0][0]
        return self.raw_value(s0)


def lightdark_oracle(model, gamma, latent=None, tol=1e-8, max_iter=100_000) -> TwoPhaseOracle:
    from .latent import solve_latent_qtable

    if latent is None:
        latent = solve_latent_qtable(model, gamma, tol=tol, continuing=False)
    prior = model.initial_belief().weights
    mdps = [model.latent_mdp(phi, gamma) for phi in range(model.num_latents)]
    n, A = mdps[0].rewards.shape
    # transitions do not depend on the latent; rewards are mixed under the prior
    trans = mdps[0].transitions
    R = sum(prior[phi] * mdps[phi].rewards for phi in range(model.num_latents))
    pos = model.cell_positions()
    wall = np.zeros(n, dtype=bool)
    wall[: pos.shape[0]] = pos[:, 0] <= model.wall_threshold + 1e-12
    revealed = prior @ latent.values.max(axis=2)  # (n_cells,)
    t_val = model.terminal_value(gamma)
    term = model.terminal_cell

    V = np.zeros(n)
    for _ in range(max_iter):
        Vfix = V.copy()
        Vfix[wall] = revealed[wall]
        Vfix[term] = t_val
        Vn = np.max([R[:, a] + gamma * (trans[a] @ Vfix) for a in range(A)], axis=0)
        Vn[wall] = revealed[wall]
        Vn[term] = t_val
        res = float(np.abs(Vn - V).max())
        V = Vn
        if res <= tol:
            break
    else:
        raise NonConvergence(f"oracle residual {res:.3g} > tol {tol:.3g}", residual=res)
    return TwoPhaseOracle(model, gamma, latent, V, res)


def oracle_optimal_return(name, params=None, gamma=0.95, pitch=0.01, tol=1e-8, **kwargs) -> float:
    """Optimal expected discounted return from the initial belief, native units."""
    from .envs import make_env

    model = make_env(name, params or {})
    if name == "lightdark":
        return lightdark_oracle(model, gamma, tol=tol).initial_value()
    return oracle_solve(model, pitch, gamma, tol=max(tol, 1e-9), **kwargs).initial_value()
