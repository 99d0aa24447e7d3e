"""B-CPACE: optimistic nearest-neighbour exploration of state-belief space.

The estimate at a query ``(s, b, a)`` averages ``L_Qtilde * dist + q_j`` over
the ``k`` nearest same-action samples, each term capped by an upper bound
``U``. Near a simplex vertex the exact latent Q-value is used instead. Sample
values are the fixed point of ``q_i = r_i + gamma * max_a Qtilde(s'_i, b'_i, a)``.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import SUPPORT_FLOOR, Belief, LatentMdpFamily, as_belief, step_hyper
from .errors import BudgetExhausted, EmptyKWindow, InvalidParams
from .knn import VPTree, compound_distances, knn_linear
from .latent import LatentQTable, LipschitzProfile, vi_iteration_cap


def _weights(b) -> np.ndarray:
    """Belief weights without renormalizing arrays that are already stored."""
    return b.weights if isinstance(b, Belief) else np.asarray(b, dtype=float)


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 0.1
    delta: float = 0.1
    k: int = 1
    gamma: float = 0.95
    eps_d: float | None = None
    eps_vi: float = 1e-3
    n_batch: int = 1
    horizon: int = 50
    patience: int = 25
    max_episodes: int = 10_000
    seed: int = 0
    use_best_case_bound: bool = True
    use_latent_init: bool = True
    alpha: float | None = None
    lq_override: float | None = None
    index: str = "linear"
    strict_budget: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise InvalidParams("k must be >= 1")
        for name in ("epsilon", "delta", "gamma"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise InvalidParams(f"{name} must lie in (0, 1), got {v}")
        if self.eps_d is not None and self.eps_d <= 0:
            raise InvalidParams("eps_d must be positive")
        if self.eps_vi <= 0:
            raise InvalidParams("eps_vi must be positive")
        if self.horizon < 1 or self.n_batch < 1 or self.patience < 1 or self.max_episodes < 1:
            raise InvalidParams("horizon, n_batch, patience and max_episodes must be >= 1")
        if self.alpha is not None and self.alpha <= 0:
            raise InvalidParams("alpha must be positive")
        if self.lq_override is not None and self.lq_override <= 0:
            raise InvalidParams("lq_override must be positive")
        if self.index not in ("linear", "vptree"):
            raise InvalidParams("index must be 'linear' or 'vptree'")

    @property
    def known_eps(self) -> float:
        return self.epsilon if self.eps_d is None else self.eps_d

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Sample:
    s: object
    b: Belief
    a: int
    r: float
    s_next: object
    b_next: Belief
    q_value: float
    terminal: bool = False


class SampleSet:
    """Growable columnar store of samples with per-action k-NN queries.

    States are kept as encoded vectors (``model.state_vector``) so distances to
    many samples are computed in one vectorized call.
    """

    REBUILD_MIN = 256

    def __init__(self, model: LatentMdpFamily, alpha: float, index="linear"):
        self.model = model
        self.alpha = float(alpha)
        self.index = index
        self.n = 0
        self._cap = 0
        self._dim = len(model.state_vector(model.initial_distribution()[0][0]))
        self._nphi = model.num_latents
        self._alloc(64)
        self._by_action = [[] for _ in range(model.num_actions)]
        self._trees = [None] * model.num_actions

    def _alloc(self, cap):
        def grow(old, shape, dtype, fill=0):
            new = np.full((cap,) + shape, fill, dtype=dtype)
            if old is not None:
                new[: self.n] = old[: self.n]
            return new

        get = lambda name: getattr(self, name, None)  # noqa: E731
        self.S = grow(get("S"), (self._dim,), float)
        self.B = grow(get("B"), (self._nphi,), float)
        self.A = grow(get("A"), (), np.int64)
        self.R = grow(get("R"), (), float)
        self.S2 = grow(get("S2"), (self._dim,), float)
        self.B2 = grow(get("B2"), (self._nphi,), float)
        self.T = grow(get("T"), (), bool, False)
        self.Q = grow(get("Q"), (), float)
        self._cap = cap

    def __len__(self):
        return self.n

    def add(self, s, b, a, r, s_next, b_next, terminal, q0) -> int:
        if self.n == self._cap:
            self._alloc(2 * self._cap)
        i = self.n
        self.S[i] = self.model.state_vector(s)
        self.B[i] = _weights(b)
        self.A[i] = a
        self.R[i] = r
        self.S2[i] = self.model.state_vector(s_next)
        self.B2[i] = _weights(b_next)
        self.T[i] = terminal
        self.Q[i] = q0
        self.n += 1
        self._by_action[a].append(i)
        return i

    def partition(self, a) -> np.ndarray:
        return np.asarray(self._by_action[a], dtype=np.int64)

    def knn(self, s_vec, b, a, k):
        """Exact k nearest same-action samples as ``(indices, distances)``."""
        idx = self.partition(a)
        if self.index == "linear" or idx.size < self.REBUILD_MIN:
            return knn_linear(self.model, self.alpha, s_vec, b, self.S, self.B, idx, k)
        tree = self._trees[a]
        if tree is None or tree.idx.size < 0.75 * idx.size:
            tree = VPTree(self.model, self.alpha, self.S, self.B, idx)
            self._trees[a] = tree
        ti, td = tree.query(s_vec, b, k)
        tail = idx[tree.idx.size:]
        if tail.size:
            li, ld = knn_linear(self.model, self.alpha, s_vec, b, self.S, self.B, tail, k)
            ti, td = np.concatenate([ti, li]), np.concatenate([td, ld])
            order = np.lexsort((ti, td))[:k]
            ti, td = ti[order], td[order]
        return ti, td

    def distances_to(self, s_vec, b, rows):
        return compound_distances(self.model, self.alpha, s_vec, b, self.S[rows], self.B[rows])

    def sample(self, i) -> Sample:
        m = self.model
        return Sample(
            s=m.vector_state(self.S[i]),
            b=Belief(self.B[i]),
            a=int(self.A[i]),
            r=float(self.R[i]),
            s_next=m.vector_state(self.S2[i]),
            b_next=Belief(self.B2[i]),
            q_value=float(self.Q[i]),
            terminal=bool(self.T[i]),
        )

    def samples(self) -> list[Sample]:
        return [self.sample(i) for i in range(self.n)]


class QEstimate:
    """Optimistic action-value estimate over a growing sample set.

    Besides the samples it caches, for every sample's next state, the
    neighbour lists, seeding decision and upper bounds needed by a Bellman
    backup, so a fixed-point sweep is a handful of array operations.
    """

    def __init__(
        self,
        model: LatentMdpFamily,
        config: SolverConfig,
        profile: LipschitzProfile,
        latent_q: LatentQTable | None = None,
    ):
        if latent_q is None and (config.use_best_case_bound or config.use_latent_init):
            raise InvalidParams("latent Q-table required when a latent enhancement is enabled")
        self.model = model
        self.config = config
        self.profile = profile
        self.latent_q = latent_q
        self.gamma = config.gamma
        self.k = config.k
        self.alpha = profile.alpha
        self.L_q = float(config.lq_override or profile.L_Q)
        self.L_qtilde = 2.0 * self.L_q
        self.q_max = model.r_max / (1.0 - self.gamma)
        self.q_tilde_max = model.r_max + self.gamma * self.q_max
        self.seed_radius = config.epsilon / (self.L_q * (1.0 + self.gamma))
        self.known_radius = config.known_eps / self.L_qtilde
        self.terminal_value = model.terminal_value(self.gamma)
        self.samples = SampleSet(model, self.alpha, config.index)
        self.fixed_point_deltas: list[list[float]] = []
        self.frozen = False
        na = model.num_actions
        self._nb_idx = np.full((0, na, self.k), -1, dtype=np.int64)
        self._nb_d = np.full((0, na, self.k), np.inf)
        self._seed_q = np.full((0, na), np.nan)
        self._ub = np.zeros((0, na))

    # -- pointwise pieces ----------------------------------------------------
    def seed_latent(self, b) -> int | None:
        """Latent whose vertex lies within the seeding radius of ``b``."""
        if not self.config.use_latent_init:
            return None
        w = as_belief(b).weights
        phi = int(np.argmax(w))  # closest vertex in L1; first index on ties
        e = np.zeros_like(w)
        e[phi] = 1.0
        return phi if np.abs(w - e).sum() <= self.seed_radius else None

    def upper_bounds(self, s, b, lat=None) -> np.ndarray:
        na = self.model.num_actions
        if not self.config.use_best_case_bound:
            return np.full(na, self.q_tilde_max)
        w = as_belief(b).weights
        lat = self.latent_q.q(s) if lat is None else lat
        return np.minimum(lat[w > SUPPORT_FLOOR].max(axis=0), self.q_tilde_max)

    def _analyze(self, s, b):
        """Per-action estimates plus the data needed for the known test."""
        w = as_belief(b).weights
        lat = self.latent_q.q(s) if self.latent_q is not None else None
        phi = self.seed_latent(w)
        if phi is not None:
            return np.array(lat[phi], dtype=float), phi, None, None
        U = self.upper_bounds(s, w, lat)
        s_vec = self.model.state_vector(s)
        na = self.model.num_actions
        est = np.empty(na)
        kth = np.full(na, np.inf)
        for a in range(na):
            idx, d = self.samples.knn(s_vec, w, a, self.k)
            terms = np.minimum(self.L_qtilde * d + self.samples.Q[idx], U[a])
            est[a] = (terms.sum() + (self.k - idx.size) * U[a]) / self.k
            if idx.size == self.k:
                kth[a] = d[-1]
        return est, None, kth, U

    def estimates(self, s, b) -> np.ndarray:
        return self._analyze(s, b)[0]

    def estimate(self, s, b, a) -> float:
        return float(self.estimates(s, b)[a])

    def is_known(self, s, b, a) -> bool:
        _, phi, kth, _ = self._analyze(s, b)
        return phi is not None or bool(kth[a] <= self.known_radius)

    def greedy_action(self, s, b) -> int:
        return int(np.argmax(self.estimates(s, b)))

    # -- sample insertion ------------------------------------------------------
    def _grow_cache(self):
        n = self.samples._cap
        if self._nb_idx.shape[0] >= n:
            return
        na = self.model.num_actions

        def grow(old, fill, dtype, shape):
            new = np.full((n,) + shape, fill, dtype=dtype)
            new[: old.shape[0]] = old
            return new

        self._nb_idx = grow(self._nb_idx, -1, np.int64, (na, self.k))
        self._nb_d = grow(self._nb_d, np.inf, float, (na, self.k))
        self._seed_q = grow(self._seed_q, np.nan, float, (na,))
        self._ub = grow(self._ub, 0.0, float, (na,))

    def add_sample(self, s, b, a, r, s_next, b_next, terminal, q0=None) -> int:
        if self.frozen:
            raise RuntimeError("estimate is frozen")
        q0 = self.q_tilde_max if q0 is None else float(np.clip(q0, 0.0, self.q_tilde_max))
        j = self.samples.add(s, b, a, r, s_next, b_next, terminal, q0)
        self._grow_cache()
        n = self.samples.n
        na = self.model.num_actions

        if not terminal:
            w2 = _weights(b_next)
            lat = self.latent_q.q(s_next) if self.latent_q is not None else None
            phi = self.seed_latent(w2)
            if phi is not None:
                self._seed_q[j] = lat[phi]
                self._ub[j] = self.q_tilde_max
            else:
                self._ub[j] = self.upper_bounds(s_next, w2, lat)
                s2 = self.samples.S2[j]
                for act in range(na):
                    idx, d = self.samples.knn(s2, w2, act, self.k)
                    self._nb_idx[j, act, : idx.size] = idx
                    self._nb_d[j, act, : idx.size] = d

        # the new sample may enter earlier rows' neighbour lists for action a
        rows = np.arange(j)
        rows = rows[~self.samples.T[:j] & np.isnan(self._seed_q[:j, 0])]
        if rows.size:
            d = compound_distances(
                self.model,
                self.alpha,
                self.samples.S[j],
                self.samples.B[j],
                self.samples.S2[rows],
                self.samples.B2[rows],
            )
            hit = d < self._nb_d[rows, a, -1]
            rows, d = rows[hit], d[hit]
            if rows.size:
                cand_d = np.concatenate([self._nb_d[rows, a], d[:, None]], axis=1)
                cand_i = np.concatenate(
                    [self._nb_idx[rows, a], np.full((rows.size, 1), j)], axis=1
                )
                order = np.argsort(cand_d, axis=1, kind="stable")[:, : self.k]
                self._nb_d[rows, a] = np.take_along_axis(cand_d, order, axis=1)
                self._nb_idx[rows, a] = np.take_along_axis(cand_i, order, axis=1)
        assert n == j + 1
        return j

    # -- value iteration -------------------------------------------------------
    def backup(self, q: np.ndarray) -> np.ndarray:
        """One synchronous Bellman sweep over all samples."""
        n = self.samples.n
        idx = self._nb_idx[:n]
        present = idx >= 0
        qq = q[np.where(present, idx, 0)]
        U = self._ub[:n][..., None]
        terms = np.where(present, np.minimum(self.L_qtilde * self._nb_d[:n] + qq, U), U)
        vals = terms.mean(axis=2)
        seeded = ~np.isnan(self._seed_q[:n])
        vals = np.where(seeded, self._seed_q[:n], vals)
        cont = np.where(self.samples.T[:n], self.terminal_value, vals.max(axis=1))
        return np.clip(self.samples.R[:n] + self.gamma * cont, 0.0, self.q_tilde_max)

    def fixed_point(self):
        """Jacobi sweeps until the sup-norm change is at most ``eps_vi``.

        Returns ``(sweeps, converged)`` and appends the per-sweep deltas to
        ``fixed_point_deltas``.
        """
        n = self.samples.n
        if n == 0:
            return 0, True
        cap = vi_iteration_cap(self.config.eps_vi, self.q_tilde_max, self.gamma)
        q = self.samples.Q[:n].copy()
        deltas = []
        converged = False
        for _ in range(cap):
            qn = self.backup(q)
            delta = float(np.abs(qn - q).max())
            deltas.append(delta)
            q = qn
            if delta <= self.config.eps_vi:
                converged = True
                break
        self.samples.Q[:n] = q
        self.fixed_point_deltas.append(deltas)
        return len(deltas), converged

    def freeze(self):
        self.frozen = True
        return self


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

LOG_FIELDS = ("episode", "return_raw", "return_shifted", "samples", "vi_iters", "escaped")


@dataclass
class EpisodeRecord:
    episode: int
    return_raw: float
    return_shifted: float
    samples: int
    vi_iters: int
    escaped: bool


@dataclass
class TrainingLog:
    records: list = field(default_factory=list)
    terminated: bool = False
    budget_exhausted: bool = False

    def append(self, rec: EpisodeRecord):
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_FIELDS)
        for r in self.records:
            w.writerow(
                [r.episode, repr(r.return_raw), repr(r.return_shifted), r.samples, r.vi_iters,
                 str(r.escaped).lower()]
            )

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    @classmethod
    def read_csv(cls, fh) -> "TrainingLog":
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != LOG_FIELDS:
            raise ValueError(f"unexpected log header {header}")
        log = cls()
        for row in reader:
            log.append(
                EpisodeRecord(int(row[0]), float(row[1]), float(row[2]), int(row[3]),
                              int(row[4]), row[5] == "true")
            )
        return log


def run(
    model: LatentMdpFamily,
    config: SolverConfig,
    latent_q: LatentQTable | None,
    profile: LipschitzProfile,
    callback=None,
):
    """Train B-CPACE and return ``(QEstimate, TrainingLog)``.

    With ``n_batch == 1`` the fixed point is recomputed after every new
    sample. Otherwise samples from ``n_batch`` consecutive episodes are
    collected first and the fixed point is computed once per batch.
    """
    qe = QEstimate(model, config, profile, latent_q)
    log = TrainingLog()
    rng = np.random.default_rng(config.seed)
    per_sample = config.n_batch == 1
    quiet = 0
    pending = 0
    converged = True

    for ep in range(config.max_episodes):
        s, phi = model.sample_initial(rng)
        b = model.initial_belief(s)
        ret_raw = ret_shifted = 0.0
        added = vi_iters = 0
        for _ in range(config.horizon):
            est, seeded, kth, _ = qe._analyze(s, b)
            a = int(np.argmax(est))
            known = seeded is not None or bool(kth[a] <= qe.known_radius)
            st = step_hyper(model, s, phi, b, a, rng)
            ret_raw += st.raw_reward
            ret_shifted += st.raw_reward + model.reward_shift
            if not known:
                qe.add_sample(s, b, a, st.reward, st.next_state, st.next_belief, st.terminal, est[a])
                added += 1
                pending += 1
                if per_sample:
                    it, converged = qe.fixed_point()
                    vi_iters += it
                    pending = 0
            s, b, phi = st.next_state, st.next_belief, st.next_latent
            if st.terminal:
                break
        quiet = 0 if added else quiet + 1
        batch_done = (ep + 1) % config.n_batch == 0 or quiet >= config.patience
        if pending and batch_done:
            it, converged = qe.fixed_point()
            vi_iters += it
            pending = 0
        log.append(
            EpisodeRecord(
                episode=ep,
                return_raw=float(ret_raw),
                return_shifted=float(ret_shifted),
                samples=qe.samples.n,
                vi_iters=vi_iters,
                escaped=added > 0,
            )
        )
        if callback is not None:
            callback(qe, log)
        if quiet >= config.patience and converged and not pending:
            log.terminated = True
            break
    else:
        if pending:
            qe.fixed_point()
        log.budget_exhausted = True
        if config.strict_budget:
            raise BudgetExhausted(
                f"no termination within {config.max_episodes} episodes", estimate=qe, log=log
            )
    return qe, log


# ---------------------------------------------------------------------------
# sample-complexity bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComplexityBound:
    m: float
    k_low: float
    k_high: float
    k_admissible: bool

    @property
    def window_empty(self) -> bool:
        return self.k_low > self.k_high


def complexity_bound(q_max, r_max, epsilon, delta, k, n_cover, q_tilde_max=None):
    """Number of non-near-optimal steps and the admissible neighbour window.

    ``q_tilde_max`` defaults to ``q_max``. Warns with :class:`EmptyKWindow`
    when the window is empty.
    """
    if min(q_max, r_max, epsilon, delta, k) <= 0 or n_cover < 0:
        raise InvalidParams("bound inputs must be positive")
    q_tilde_max = q_max if q_tilde_max is None else q_tilde_max
    m = (2.0 * q_max / epsilon) * (k * n_cover + math.log(2.0 / delta)) * math.log(r_max / epsilon)
    if n_cover > 0:
        k_low = (q_tilde_max**2 / epsilon**2) * math.log(4.0 * n_cover / delta)
        k_high = 4.0 * n_cover / delta
    else:
        k_low, k_high = math.inf, 0.0
    bound = ComplexityBound(m, k_low, k_high, bool(k_low <= k <= k_high))
    if bound.window_empty:
        warnings.warn(
            f"admissible k window [{k_low:.3g}, {k_high:.3g}] is empty", EmptyKWindow, stacklevel=2
        )
    return bound


def sample_complexity_bound(profile: LipschitzProfile, config: SolverConfig, n_cover) -> ComplexityBound:
    q_max = profile.V_max
    return complexity_bound(
        q_max,
        profile.R_max,
        config.epsilon,
        config.delta,
        config.k,
        n_cover,
        q_tilde_max=profile.R_max + profile.gamma * q_max,
    )
