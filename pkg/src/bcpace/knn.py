"""Exact k-nearest-neighbour search under the compound state-belief metric.

Distances are ``alpha * d(s1, s2) + |b1 - b2|_1`` within one action; samples of
different actions never neighbour each other. Ties are broken by insertion
order (lower index first) in both the linear scan and the metric tree, so the
two always return identical results.
"""

from __future__ import annotations

import numpy as np


def compound_distances(model, alpha, s_vec, b, S, B):
    return alpha * model.state_distances(s_vec, S) + np.abs(B - b).sum(axis=1)


def select_k(dist, idx, k):
    """The ``k`` entries smallest in ``(dist, idx)`` order; ``idx`` ascending."""
    if dist.size <= k:
        order = np.argsort(dist, kind="stable")
    else:
        kth = np.partition(dist, k - 1)[k - 1]
        cand = np.flatnonzero(dist <= kth)
        order = cand[np.argsort(dist[cand], kind="stable")][:k]
    return idx[order], dist[order]


def knn_linear(model, alpha, s_vec, b, S, B, idx, k):
    """Reference scan over the rows ``idx`` (ascending) of ``S``/``B``."""
    if idx.size == 0:
        return idx, np.empty(0)
    d = compound_distances(model, alpha, s_vec, b, S[idx], B[idx])
    return select_k(d, idx, k)


class VPTree:
    """Vantage-point tree over a fixed set of rows.

    Leaves hold small buckets that are scanned with the vectorized distance,
    so results are bit-identical to :func:`knn_linear`.
    """

    LEAF = 24

    def __init__(self, model, alpha, S, B, idx, rng=None):
        self.model = model
        self.alpha = alpha
        self.S = S
        self.B = B
        self.idx = np.asarray(idx, dtype=np.int64)
        self._rng = rng or np.random.default_rng(0)
        self.root = self._build(self.idx)

    def _dist(self, s_vec, b, rows):
        return compound_distances(self.model, self.alpha, s_vec, b, self.S[rows], self.B[rows])

    def _build(self, rows):
        if rows.size <= self.LEAF:
            return ("leaf", np.sort(rows))
        vp = rows[self._rng.integers(rows.size)]
        rest = rows[rows != vp]
        d = self._dist(self.S[vp], self.B[vp], rest)
        mu = float(np.median(d))
        inner, outer = rest[d <= mu], rest[d > mu]
        if inner.size == 0 or outer.size == 0:
            return ("leaf", np.sort(rows))
        return ("node", vp, mu, self._build(inner), self._build(outer))

    def query(self, s_vec, b, k):
        best_d = np.empty(0)
        best_i = np.empty(0, dtype=np.int64)
        # relative slack keeps float round-off in the triangle bound from
        # pruning an exact tie
        slack = 1e-9

        def kth():
            return best_d[-1] if best_d.size >= k else np.inf

        def merge(d, i):
            nonlocal best_d, best_i
            all_d = np.concatenate([best_d, d])
            all_i = np.concatenate([best_i, i])
            order = np.lexsort((all_i, all_d))[:k]
            best_d, best_i = all_d[order], all_i[order]

        stack = [(self.root, 0.0)]
        while stack:
            node, lower = stack.pop()
            if lower > kth() * (1 + slack) + slack:
                continue
            if node[0] == "leaf":
                rows = node[1]
                merge(self._dist(s_vec, b, rows), rows)
                continue
            _, vp, mu, inner, outer = node
            dv = float(self._dist(s_vec, b, np.array([vp]))[0])
            merge(np.array([dv]), np.array([vp]))
            lo_in, lo_out = max(dv - mu, 0.0), max(mu - dv, 0.0)
            if dv <= mu:
                stack.append((outer, lo_out))
                stack.append((inner, lo_in))
            else:
                stack.append((inner, lo_in))
                stack.append((outer, lo_out))
        return best_i, best_d
