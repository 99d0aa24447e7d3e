"""Empirical checks: cover estimates, belief contraction, estimator smoothness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Belief, belief_update, step_hyper
from .errors import ImpossibleTransition
from .knn import compound_distances


@dataclass
class TracedTuples:
    """Encoded ``(s, b, a)`` tuples, in the order they were traced."""

    S: np.ndarray
    B: np.ndarray
    A: np.ndarray

    def __len__(self):
        return len(self.A)

    def subset(self, mask):
        return TracedTuples(self.S[mask], self.B[mask], self.A[mask])

    @classmethod
    def concat(cls, parts):
        return cls(
            np.concatenate([p.S for p in parts]),
            np.concatenate([p.B for p in parts]),
            np.concatenate([p.A for p in parts]),
        )


def tuples_from_samples(qe) -> TracedTuples:
    n = qe.samples.n
    return TracedTuples(qe.samples.S[:n].copy(), qe.samples.B[:n].copy(), qe.samples.A[:n].copy())


def trace_tuples(model, episodes, horizon, seed=0, policy=None) -> TracedTuples:
    """Tuples visited by rollouts of ``policy`` (uniformly random by default)."""
    rng = np.random.default_rng(seed)
    S, B, A = [], [], []
    for _ in range(episodes):
        s, phi = model.sample_initial(rng)
        b = model.initial_belief(s)
        for _ in range(horizon):
            a = int(rng.integers(model.num_actions)) if policy is None else policy(s, b)
            S.append(model.state_vector(s))
            B.append(b.weights)
            A.append(a)
            st = step_hyper(model, s, phi, b, a, rng)
            s, b, phi = st.next_state, st.next_belief, st.next_latent
            if st.terminal:
                break
    return TracedTuples(np.array(S), np.array(B), np.array(A, dtype=np.int64))


def greedy_packing(model, alpha, tuples: TracedTuples, radius) -> np.ndarray:
    """Indices of a maximal ``radius``-separated subset, chosen in input order.

    Every tuple lies within ``radius`` of a chosen one, so the count is both a
    packing and a cover size at that scale.
    """
    chosen = []
    for a in np.unique(tuples.A):
        rows = np.flatnonzero(tuples.A == a)
        centers = []
        for i in rows:
            if centers:
                c = np.array(centers)
                d = compound_distances(model, alpha, tuples.S[i], tuples.B[i], tuples.S[c], tuples.B[c])
                if d.min() <= radius:
                    continue
            centers.append(i)
        chosen.extend(centers)
    return np.sort(np.array(chosen, dtype=np.int64))


def packing_number(model, alpha, tuples, radius) -> int:
    return int(greedy_packing(model, alpha, tuples, radius).size)


def seeded_mask(tuples: TracedTuples, seed_radius) -> np.ndarray:
    """Tuples whose belief lies within ``seed_radius`` of a simplex vertex."""
    top = tuples.B.max(axis=1)
    return 2.0 * (1.0 - top) <= seed_radius


def reduced_cover(model, alpha, tuples, radius, seed_radius):
    """Packing counts for the full tuple set and for the part outside the seeded region.

    Tuples of the reduced region are processed first, so the full packing
    extends the reduced one and ``reduced <= full`` holds by construction.
    """
    keep = ~seeded_mask(tuples, seed_radius)
    ordered = TracedTuples.concat([tuples.subset(keep), tuples.subset(~keep)])
    n_red = packing_number(model, alpha, tuples.subset(keep), radius)
    n_full = packing_number(model, alpha, ordered, radius)
    return n_full, n_red


# ---------------------------------------------------------------------------
# assumption checks
# ---------------------------------------------------------------------------


def _random_transition(model, rng, states):
    s = states[rng.integers(len(states))]
    a = int(rng.integers(model.num_actions))
    phi = int(rng.integers(model.num_latents))
    return s, a, model.sample_next(s, phi, a, rng)


def _random_belief(n, rng):
    return Belief(rng.dirichlet(np.ones(n)))


def belief_contraction_violations(model, trials, seed=0, states=None, tol=1e-9):
    """Count pairs whose posterior L1 gap exceeds the prior gap (plus ``tol``).

    Returns ``(violations, trials_run, worst_ratio)``.
    """
    rng = np.random.default_rng(seed)
    states = states if states is not None else _nonterminal_states(model)
    bad = 0
    worst = 0.0
    done = 0
    while done < trials:
        s, a, s2 = _random_transition(model, rng, states)
        b1 = _random_belief(model.num_latents, rng)
        b2 = _random_belief(model.num_latents, rng)
        try:
            n1 = belief_update(model, b1, s, a, s2)
            n2 = belief_update(model, b2, s, a, s2)
        except ImpossibleTransition:
            continue
        before = b1.l1(b2)
        after = n1.l1(n2)
        done += 1
        if after > before + tol:
            bad += 1
        if before > 0:
            worst = max(worst, after / before)
    return bad, done, worst


def _nonterminal_states(model):
    if hasattr(model, "num_states"):
        return [s for s in range(model.num_states) if not model.is_terminal(s)]
    return [s for s, _, _ in model.initial_distribution()]


def estimator_lipschitz_violations(qe, pairs, seed=0, states=None, local_scale=None, tol=1e-9):
    """Count same-action query pairs with ``|dQ| > L_Qtilde * dist + tol``.

    Pairs inside the seeded region are skipped. When the upper bound depends
    on the query, only pairs with equal bounds are checked. With
    ``local_scale`` the second query is a perturbation of the first of at most
    that L1 size in belief, probing neighbour-set switches.
    Returns ``(violations, pairs_checked)``.
    """
    model = qe.model
    rng = np.random.default_rng(seed)
    states = states if states is not None else _nonterminal_states(model)
    bad = done = attempts = 0
    while done < pairs and attempts < 50 * pairs:
        attempts += 1
        a = int(rng.integers(model.num_actions))
        s1 = states[rng.integers(len(states))]
        b1 = _random_belief(model.num_latents, rng)
        if local_scale is None:
            s2 = states[rng.integers(len(states))]
            b2 = _random_belief(model.num_latents, rng)
        else:
            s2 = s1
            step = rng.normal(size=model.num_latents)
            step -= step.mean()
            step *= local_scale * rng.random() / max(np.abs(step).sum(), 1e-300)
            w = b1.weights + step
            if np.any(w < 0):
                continue
            b2 = Belief(w)
        if qe.seed_latent(b1) is not None or qe.seed_latent(b2) is not None:
            continue
        if qe.config.use_best_case_bound:
            if not np.array_equal(qe.upper_bounds(s1, b1)[a], qe.upper_bounds(s2, b2)[a]):
                continue
        v1 = qe.estimate(s1, b1, a)
        v2 = qe.estimate(s2, b2, a)
        d = compound_distances(
            model, qe.alpha, model.state_vector(s1), b1.weights,
            model.state_vector(s2)[None, :], b2.weights[None, :],
        )[0]
        done += 1
        if abs(v1 - v2) > qe.L_qtilde * d + tol:
            bad += 1
    return bad, done


def contraction_violations(deltas_per_call, gamma, tol=1e-9):
    """Sweeps where the sup-norm change did not shrink by at least ``gamma``."""
    bad = total = 0
    for deltas in deltas_per_call:
        for prev, cur in zip(deltas, deltas[1:]):
            total += 1
            if cur > gamma * prev + tol:
                bad += 1
    return bad, total


def optimism_fraction(qe, oracle, epsilon=None):
    """Share of (state, lattice belief, action) points where the estimate is
    at least the oracle Q minus ``3 eps / (1 - gamma) + pitch * L_Q``."""
    model = qe.model
    eps = qe.config.epsilon if epsilon is None else epsilon
    slack = 3.0 * eps / (1.0 - qe.gamma) + oracle.pitch * qe.L_q
    ok = total = 0
    for s in _nonterminal_states(model):
        for w in oracle.lattice.points:
            est = qe.estimates(s, w)
            ref = oracle.q(s, w)
            ok += int(np.sum(est >= ref - slack))
            total += est.size
    return ok / total, total
