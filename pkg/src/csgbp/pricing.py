"""Exact pricing: best coalition of free agents by reduced cost ``v(C) + sum_{i in C} pi_i``.

Every valuation is rewritten over the free agents as a pseudo-boolean
polynomial in their characteristic vector::

    f(S) = sum_k a_k + sum_{k<l} Q_kl + sum_{k<l<r} T_klr       (k, l, r in S)

* edge-sum:     a = pi, Q = w, no cubic part.
* correlation:  a = pi + (1/2) * #minus edges at the agent (over all of V),
                Q = w+ - w-.
* coordination: a = pi, Q_kl = 2 * sum_{m in V} w_kl w_km w_lm,
                T_klr = -6 w_kl w_kr w_lr.

For ``S`` inside the free set this equals ``v(S) + pi(S)`` exactly,
including the cross terms towards already covered agents. Forbidden
configurations (coalitions already in the master) are excluded at the
candidate check. The search is a depth-first include-first branch and bound
with a static positive-mass bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .instance import Instance, Kind
from .valuation import coalition_value, coalition_values

try:  # pragma: no cover - exercised implicitly
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

BRUTEFORCE_LIMIT = 25
NO_COLUMN = -math.inf


@dataclass(frozen=True)
class PricingProblem:
    inst: Instance
    free: int
    duals: Sequence[float]  # indexed by agent (length n); entries of covered agents are ignored
    forbidden: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "forbidden", frozenset(self.forbidden))
        if self.free & ~self.inst.full_mask:
            raise ValueError("free set has agents outside the instance")
        if len(self.duals) != self.inst.n:
            raise ValueError(f"expected {self.inst.n} duals, got {len(self.duals)}")
        if not all(math.isfinite(float(x)) for x in self.duals):
            raise ValueError("duals must be finite")
        for c in self.forbidden:
            if c & ~self.free:
                raise ValueError("forbidden coalitions must be subsets of the free agents")

    @property
    def kind(self) -> Kind:
        return self.inst.kind

    @property
    def covered(self) -> int:
        return self.inst.full_mask & ~self.free


@dataclass
class PricingResult:
    coalition: int  # 0 when no admissible coalition exists
    objective: float
    optimal: bool = True
    nodes_explored: int = 0


def pricing_objective(inst: Instance, coalition: int, duals: Sequence[float]) -> float:
    total = float(coalition_value(inst, coalition))
    for i in range(inst.n):
        if (coalition >> i) & 1:
            total += float(duals[i])
    return total


# -- search kernel ----------------------------------------------------------

@njit(cache=True)
def _search(a, Q, T, P, cubic, forbidden, k, cutoff):
    m = a.shape[0]
    best_val = np.full(k, -np.inf)
    best_mask = np.zeros(k, dtype=np.int64)
    count = 0
    nodes = 0
    gains = np.zeros((m + 1, m))
    fval = np.zeros(m + 1)
    state = np.zeros(m + 1, dtype=np.int64)
    if cubic:
        qeff = np.zeros((m + 1, m, m))
        qeff[0] = Q
    else:
        qeff = np.zeros((1, 1, 1))
    gains[0] = a
    S = np.int64(0)
    d = 0
    while d >= 0:
        if state[d] == 0:
            nodes += 1
            thr = cutoff
            if count == k and best_val[k - 1] > thr:
                thr = best_val[k - 1]
            ub = fval[d]
            for l in range(d, m):
                g = gains[d, l] + P[l]
                if g > 0.0:
                    ub += g
            if ub <= thr or d == m:
                d -= 1
                continue
            state[d] = 1
            # include position d
            S |= np.int64(1) << d
            fnew = fval[d] + gains[d, d]
            fval[d + 1] = fnew
            if cubic:
                for l in range(m):
                    gains[d + 1, l] = gains[d, l] + qeff[d, d, l]
                for l in range(d + 1, m):
                    for r in range(d + 1, m):
                        qeff[d + 1, l, r] = qeff[d, l, r] + T[d, l, r]
            else:
                for l in range(m):
                    gains[d + 1, l] = gains[d, l] + Q[d, l]
            if fnew > thr:
                pos = np.searchsorted(forbidden, S)
                if not (pos < forbidden.shape[0] and forbidden[pos] == S):
                    # insert into the sorted top-k list
                    j = count if count < k else k - 1
                    while j > 0 and best_val[j - 1] < fnew:
                        best_val[j] = best_val[j - 1]
                        best_mask[j] = best_mask[j - 1]
                        j -= 1
                    best_val[j] = fnew
                    best_mask[j] = S
                    if count < k:
                        count += 1
            state[d + 1] = 0
            d += 1
        elif state[d] == 1:
            S &= ~(np.int64(1) << d)
            state[d] = 2
            fval[d + 1] = fval[d]
            for l in range(m):
                gains[d + 1, l] = gains[d, l]
            if cubic:
                for l in range(d + 1, m):
                    for r in range(d + 1, m):
                        qeff[d + 1, l, r] = qeff[d, l, r]
            state[d + 1] = 0
            d += 1
        else:
            state[d] = 0
            d -= 1
    return best_val, best_mask, count, nodes


def _static_bound(Q: np.ndarray, T: np.ndarray | None) -> np.ndarray:
    """Per-position positive mass still obtainable from later positions.

    For position k: sum_{l>k} max(0, Q_kl + sum_{i<k} max(0, T_ikl))
    + sum_{k<l<r} max(0, T_klr). Valid whatever was decided before k.
    """
    m = Q.shape[0]
    P = np.zeros(m)
    if T is None:
        Qp = np.maximum(Q, 0.0)
        for k in range(m):
            P[k] = Qp[k, k + 1:].sum()
        return P
    Tp = np.maximum(T, 0.0)
    for k in range(m):
        lifted = Q[k, k + 1:] + Tp[:k, k, k + 1:].sum(axis=0)
        P[k] = np.maximum(lifted, 0.0).sum()
        P[k] += np.triu(Tp[k, k + 1:, k + 1:], 1).sum()
    return P


class NodePricer:
    """Pricing engine for one branch-and-bound node (fixed free set).

    The quadratic and cubic coefficients only depend on the free set, so they
    are built once and reused across column-generation rounds.
    """

    def __init__(self, inst: Instance, free: int | None = None):
        self.inst = inst
        self.free = inst.full_mask if free is None else free
        self.agents = [i for i in range(inst.n) if (self.free >> i) & 1]
        idx = np.array(self.agents, dtype=np.int64)
        w = inst.weights
        self.base = np.zeros(len(idx))
        self.cubic: np.ndarray | None = None
        if inst.kind is Kind.EDGE_SUM:
            self.quad = np.array(w[np.ix_(idx, idx)])
        elif inst.kind is Kind.CORRELATION:
            self.quad = np.array((inst.plus - inst.minus)[np.ix_(idx, idx)], dtype=float)
            self.base = 0.5 * inst.minus.sum(axis=1)[idx].astype(float)
        else:
            pair = w * (w @ w)  # sum over every third agent, covered ones included
            self.quad = 2.0 * pair[np.ix_(idx, idx)]
            ws = w[np.ix_(idx, idx)]
            self.cubic = -6.0 * ws[:, :, None] * ws[:, None, :] * ws[None, :, :]

    def price(self, duals: Sequence[float], forbidden: set[int] | frozenset[int] = frozenset(),
              top_k: int = 1, cutoff: float | None = None) -> list[PricingResult]:
        """Best ``top_k`` admissible coalitions, best first.

        With ``cutoff`` the search only looks for coalitions whose reduced cost
        exceeds it; if none exists the returned result is flagged non-optimal
        (it certifies the absence of improving columns, nothing more).
        """
        m = len(self.agents)
        if m == 0:
            return [PricingResult(0, NO_COLUMN, True, 0)]
        duals = np.asarray(duals, dtype=float)
        a = self.base + duals[self.agents]
        potential = a + np.maximum(self.quad, 0.0).sum(axis=1)
        order = np.argsort(-potential, kind="stable")
        Q = np.ascontiguousarray(self.quad[np.ix_(order, order)])
        T = None
        if self.cubic is not None:
            T = np.ascontiguousarray(self.cubic[np.ix_(order, order, order)])
        P = _static_bound(Q, T)

        pos_of = {self.agents[o]: p for p, o in enumerate(order)}
        fpos = []
        for c in forbidden:
            if c & ~self.free:
                continue
            pm = 0
            for agent, p in pos_of.items():
                if (c >> agent) & 1:
                    pm |= 1 << p
            fpos.append(pm)
        fpos_arr = np.array(sorted(fpos), dtype=np.int64)

        thr = -np.inf if cutoff is None else float(cutoff)
        vals, masks, count, nodes = _search(
            np.ascontiguousarray(a[order]), Q,
            T if T is not None else np.zeros((1, 1, 1)), P,
            T is not None, fpos_arr, int(top_k), thr,
        )
        results = []
        for r in range(count):
            pm = int(masks[r])
            coalition = 0
            for p in range(m):
                if (pm >> p) & 1:
                    coalition |= 1 << self.agents[int(order[p])]
            obj = pricing_objective(self.inst, coalition, duals)
            results.append(PricingResult(coalition, obj, True, int(nodes)))
        if not results:
            results.append(PricingResult(0, NO_COLUMN, cutoff is None, int(nodes)))
        results.sort(key=lambda r: (-r.objective, r.coalition))
        return results


def _price(p: PricingProblem, kind: Kind) -> PricingResult:
    if p.kind is not kind:
        raise ValueError(f"expected a {kind.value} instance, got {p.kind.value}")
    return NodePricer(p.inst, p.free).price(p.duals, p.forbidden)[0]


def price_edge_sum(p: PricingProblem) -> PricingResult:
    return _price(p, Kind.EDGE_SUM)


def price_correlation(p: PricingProblem) -> PricingResult:
    return _price(p, Kind.CORRELATION)


def price_coordination(p: PricingProblem) -> PricingResult:
    return _price(p, Kind.COORDINATION)


def price(p: PricingProblem) -> PricingResult:
    return _price(p, p.kind)


def _subset_masks(agents: Sequence[int]) -> np.ndarray:
    """All subsets of ``agents`` as masks, in increasing numeric order."""
    m = len(agents)
    k = np.arange(1 << m, dtype=np.int64)
    masks = np.zeros(1 << m, dtype=np.int64)
    for b, agent in enumerate(agents):
        masks |= ((k >> b) & 1) << agent
    return np.sort(masks)


def price_bruteforce(p: PricingProblem) -> PricingResult:
    """Scan every subset of the free agents (test oracle)."""
    agents = [i for i in range(p.inst.n) if (p.free >> i) & 1]
    if len(agents) > BRUTEFORCE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTEFORCE_LIMIT} free agents")
    masks = _subset_masks(agents)
    obj = coalition_values(p.inst, masks)
    for i in agents:
        obj += p.duals[i] * ((masks >> i) & 1)
    ok = masks != 0
    if p.forbidden:
        ok &= ~np.isin(masks, np.fromiter(p.forbidden, dtype=np.int64))
    if not ok.any():
        return PricingResult(0, NO_COLUMN, True, len(masks))
    obj = np.where(ok, obj, -np.inf)
    best = int(np.argmax(obj))  # first maximum == smallest mask
    return PricingResult(int(masks[best]), float(obj[best]), True, len(masks))


def glover_bounds(weights: np.ndarray, scope: Sequence[int] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-agent sums of the negative and of the positive weights within ``scope``.

    Returns ``(lower, upper)`` indexed like ``scope`` (all agents by default).
    """
    w = np.asarray(weights, dtype=float)
    idx = np.arange(w.shape[0]) if scope is None else np.asarray(list(scope), dtype=np.int64)
    sub = w[np.ix_(idx, idx)]
    return np.minimum(sub, 0.0).sum(axis=1), np.maximum(sub, 0.0).sum(axis=1)
