"""Latent-MDP Q-values, Lipschitz constants and the QMDP mixture."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .core import LatentMdpFamily, as_belief
from .errors import InvalidDiscount, NonConvergence


@dataclass(frozen=True)
class LipschitzProfile:
    L_R: float
    L_P: float
    R_max: float
    V_max: float
    gamma: float
    alpha: float
    L_Q: float
    L_Qtilde: float

    def to_dict(self):
        return {k: float(v) for k, v in self.__dict__.items()}


def _check_gamma(gamma):
    if not 0.0 < gamma < 1.0:
        raise InvalidDiscount(f"discount must lie in (0, 1), got {gamma}")


def belief_branch(R_max, gamma):
    """Lipschitz constant of Q in the belief coordinate."""
    V_max = R_max / (1.0 - gamma)
    return R_max + gamma * (2.0 - gamma) / (1.0 - gamma) * V_max


def balanced_alpha(L_R, L_P, R_max, gamma):
    """Metric weight that makes both branches of the L_Q max equal.

    Falls back to 1.0 when the state branch vanishes (any weight is optimal).
    """
    _check_gamma(gamma)
    V_max = R_max / (1.0 - gamma)
    num = L_R + gamma * V_max * L_P
    if num <= 0.0:
        return 1.0
    return num / belief_branch(R_max, gamma)


def compute_lipschitz_profile(L_R, L_P, R_max, gamma, alpha) -> LipschitzProfile:
    _check_gamma(gamma)
    if L_R < 0 or L_P < 0 or R_max <= 0 or alpha <= 0:
        raise ValueError("need L_R, L_P >= 0 and R_max, alpha > 0")
    V_max = R_max / (1.0 - gamma)
    L_Q = max((L_R + gamma * V_max * L_P) / alpha, belief_branch(R_max, gamma))
    return LipschitzProfile(
        L_R=float(L_R),
        L_P=float(L_P),
        R_max=float(R_max),
        V_max=float(V_max),
        gamma=float(gamma),
        alpha=float(alpha),
        L_Q=float(L_Q),
        L_Qtilde=2.0 * float(L_Q),
    )


def profile_for(model: LatentMdpFamily, gamma, alpha=None) -> LipschitzProfile:
    L_R, L_P = model.lipschitz_constants()
    if alpha is None:
        alpha = balanced_alpha(L_R, L_P, model.r_max, gamma)
    return compute_lipschitz_profile(L_R, L_P, model.r_max, gamma, alpha)


# ---------------------------------------------------------------------------
# value iteration over the latent MDPs
# ---------------------------------------------------------------------------


@dataclass
class LatentQTable:
    """Q(s, phi, a) for every latent, on the model's discretization.

    ``values`` has shape (n_latents, n_cells, n_actions) in shifted units.
    Lookups interpolate with the weights returned by ``model.locate``.
    """

    model: LatentMdpFamily
    values: np.ndarray
    gamma: float
    tol: float
    vi_residual: float
    continuing: bool
    residuals: list = field(default_factory=list, repr=False)

    def q(self, s) -> np.ndarray:
        """(n_latents, n_actions) array of latent Q-values at state ``s``."""
        idx, w = self.model.locate(s)
        if idx.size == 1:
            return self.values[:, idx[0], :]
        return np.einsum("n,pna->pa", w, self.values[:, idx, :])

    def value(self, s, phi, a) -> float:
        return float(self.q(s)[phi, a])

    def q_slice(self, phi) -> np.ndarray:
        return self.values[phi]

    @property
    def q_max(self):
        return self.model.r_max / (1.0 - self.gamma)


def _reset_value(model, V):
    """Expected value of a fresh game under P0, read from per-latent V."""
    total = 0.0
    for s0, phi, p in model.initial_distribution():
        idx, w = model.locate(s0)
        total += p * float(w @ V[phi, idx])
    return total


def solve_latent_qtable(
    model: LatentMdpFamily,
    gamma: float,
    tol: float = 1e-8,
    max_iter: int = 100_000,
    continuing: bool | None = None,
) -> LatentQTable:
    """Value iteration on every latent MDP.

    In continuing mode terminal cells bootstrap from the P0-averaged value of a
    fresh game (the latent is redrawn and then revealed), which makes the
    result an upper bound on the belief-MDP value. Otherwise terminal cells are
    absorbing and worth ``model.terminal_value(gamma)``.
    """
    _check_gamma(gamma)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if continuing is None:
        continuing = model.restart_on_terminal
    mdps = [model.latent_mdp(phi, gamma) for phi in range(model.num_latents)]
    nphi = len(mdps)
    ns, na = mdps[0].rewards.shape
    trans = [[sp.csr_matrix(T) for T in m.transitions] for m in mdps]
    R = np.stack([m.rewards for m in mdps])
    term = np.stack([np.asarray(m.terminal, dtype=bool) for m in mdps])
    t_val = model.terminal_value(gamma)

    Q = np.zeros((nphi, ns, na))
    V = np.zeros((nphi, ns))
    residuals = []
    for it in range(max_iter):
        V = Q.max(axis=2)
        if continuing:
            V[term] = _reset_value(model, np.where(term, 0.0, V)) if term.any() else 0.0
        else:
            V[term] = t_val
        Qn = np.empty_like(Q)
        for phi in range(nphi):
            for a in range(na):
                Qn[phi, :, a] = R[phi, :, a] + gamma * (trans[phi][a] @ V[phi])
        res = float(np.abs(Qn - Q).max())
        residuals.append(res)
        Q = Qn
        if res <= tol:
            break
    else:
        raise NonConvergence(f"latent VI residual {res:.3g} > tol {tol:.3g}", residual=res)
    return LatentQTable(
        model=model,
        values=Q,
        gamma=gamma,
        tol=tol,
        vi_residual=residuals[-1],
        continuing=bool(continuing),
        residuals=residuals,
    )


def solve_latent_q(model, phi, gamma, tol=1e-8, max_iter=100_000, continuing=None) -> np.ndarray:
    """Q-table slice (n_cells, n_actions) for one latent.

    In continuing mode the latents are coupled through the reset value, so all
    of them are solved together and the requested slice returned.
    """
    if continuing is None:
        continuing = model.restart_on_terminal
    if continuing:
        return solve_latent_qtable(model, gamma, tol, max_iter, True).values[phi]
    _check_gamma(gamma)
    m = model.latent_mdp(phi, gamma)
    trans = [sp.csr_matrix(T) for T in m.transitions]
    R = np.asarray(m.rewards)
    term = np.asarray(m.terminal, dtype=bool)
    Q = np.zeros_like(R, dtype=float)
    for _ in range(max_iter):
        V = Q.max(axis=1)
        V[term] = model.terminal_value(gamma)
        Qn = np.stack([R[:, a] + gamma * (trans[a] @ V) for a in range(R.shape[1])], axis=1)
        res = float(np.abs(Qn - Q).max())
        Q = Qn
        if res <= tol:
            return Q
    raise NonConvergence(f"latent VI residual {res:.3g} > tol {tol:.3g}", residual=res)


def qmdp_value(qtable: LatentQTable, s, b, a) -> float:
    w = as_belief(b).weights
    return float(w @ qtable.q(s)[:, a])


def qmdp_values(qtable: LatentQTable, s, b) -> np.ndarray:
    return as_belief(b).weights @ qtable.q(s)


# ---------------------------------------------------------------------------
# on-disk cache
# ---------------------------------------------------------------------------


class QTableCache:
    """Directory of solved latent Q-tables stored as ``.npz``.

    Entries are keyed by ``(environment key, gamma, tol, continuing)``; the key
    is stored inside the file and a mismatch is treated as a miss.
    """

    def __init__(self, root):
        self.root = Path(root)

    @staticmethod
    def key(model, gamma, tol, continuing):
        return {
            "env": model.cache_key,
            "gamma": float(gamma),
            "tol": float(tol),
            "continuing": bool(continuing),
        }

    def _path(self, key):
        digest = hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:16]
        return self.root / f"qtable-{digest}.npz"

    def load(self, model, gamma, tol, continuing):
        key = self.key(model, gamma, tol, continuing)
        path = self._path(key)
        if not path.exists():
            return None
        with np.load(path, allow_pickle=False) as data:
            if json.loads(str(data["key"])) != key:
                return None
            return LatentQTable(
                model=model,
                values=data["values"],
                gamma=gamma,
                tol=tol,
                vi_residual=float(data["vi_residual"]),
                continuing=bool(continuing),
            )

    def store(self, table: LatentQTable):
        key = self.key(table.model, table.gamma, table.tol, table.continuing)
        self.root.mkdir(parents=True, exist_ok=True)
        np.savez(
            self._path(key),
            key=json.dumps(key, sort_keys=True),
            values=table.values,
            vi_residual=table.vi_residual,
        )

    def get(self, model, gamma, tol=1e-8, continuing=None):
        if continuing is None:
            continuing = model.restart_on_terminal
        table = self.load(model, gamma, tol, continuing)
        if table is None:
            table = solve_latent_qtable(model, gamma, tol, continuing=continuing)
            self.store(table)
        return table


def vi_iteration_cap(eps_vi, q_tilde_max, gamma):
    """Sweeps needed for gamma^i * q_tilde_max <= eps_vi."""
    if eps_vi >= q_tilde_max:
        return 1
    return max(1, math.ceil(math.log(eps_vi / q_tilde_max) / math.log(gamma)))
