"""Restricted master problem (RMP) of the set-partitioning model and column generation.

The LP is kept in maximisation form::

    max  sum_j v(C_j) x_j   s.t.  sum_{j: i in C_j} x_j = 1  for every free agent i,  x >= 0

If ``y`` are the covering-row duals of this LP, the prices handed to pricing
are ``pi = -y``, the sign convention of the minimisation dual. With that
convention a coalition improves the RMP iff ``v(C) + sum_{i in C} pi_i`` is
positive, and at the optimum ``-sum(pi) == objective``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

import numpy as np

from .instance import Instance
from .lp import LPResult, simplex_max
from .valuation import Value, coalition_value

EPS_PRICE = 1e-6


@dataclass(frozen=True)
class Column:
    coalition: int
    value: Value
    id: int


@dataclass
class RMPSolution:
    x: np.ndarray  # one entry per column, in column order
    duals: np.ndarray  # pi per agent (length n); zero for covered agents
    objective: float
    iterations: int


class MasterModel:
    """Columns plus one covering row per free agent; single owner, mutable."""

    def __init__(self, inst: Instance, free: int | None = None,
                 columns: Iterable[int] = (), basis: Sequence[int] | None = None):
        self.inst = inst
        self.free = inst.full_mask if free is None else free
        self.rows = [i for i in range(inst.n) if (self.free >> i) & 1]
        self._row_of = {a: r for r, a in enumerate(self.rows)}
        self.columns: list[Column] = []
        self._ids: dict[int, int] = {}
        self._A = np.zeros((len(self.rows), 0))
        self._pending: list[np.ndarray] = []
        self._basis_hint = list(basis) if basis is not None else None
        self.solution: RMPSolution | None = None
        self.basis: list[int] | None = None
        for c in columns:
            self.add_column(c)

    def add_column(self, coalition: int, value: Value | None = None) -> Column | None:
        """Add a column; returns ``None`` if the coalition is already present."""
        if coalition <= 0 or coalition & ~self.free:
            raise ValueError("column coalition must be a non-empty subset of the free agents")
        if coalition in self._ids:
            return None
        if value is None:
            value = coalition_value(self.inst, coalition)
        col = Column(coalition, value, len(self.columns))
        self.columns.append(col)
        self._ids[coalition] = col.id
        a = np.zeros(len(self.rows))
        for i, r in self._row_of.items():
            if (coalition >> i) & 1:
                a[r] = 1.0
        self._pending.append(a)
        self.solution = None
        return col

    def column_id(self, coalition: int) -> int | None:
        return self._ids.get(coalition)

    @property
    def matrix(self) -> np.ndarray:
        if self._pending:
            self._A = np.hstack([self._A, np.column_stack(self._pending)])
            self._pending = []
        return self._A

    @property
    def costs(self) -> np.ndarray:
        return np.array([float(c.value) for c in self.columns])

    def solve(self) -> RMPSolution:
        if not self.rows:
            self.solution = RMPSolution(np.zeros(len(self.columns)), np.zeros(self.inst.n), 0.0, 0)
            return self.solution
        warm = self.basis if self.basis is not None else self._basis_hint
        res: LPResult = simplex_max(self.costs, self.matrix, np.ones(len(self.rows)), warm)
        self.basis = res.basis
        pi = np.zeros(self.inst.n)
        pi[self.rows] = -res.duals
        self.solution = RMPSolution(res.x, pi, res.objective, res.iterations)
        return self.solution


def build_root_rmp(inst: Instance) -> MasterModel:
    """RMP holding the n singleton columns (the all-singletons structure)."""
    return MasterModel(inst, columns=[1 << i for i in range(inst.n)], basis=list(range(inst.n)))


def solve_rmp(m: MasterModel) -> tuple[np.ndarray, np.ndarray, float]:
    sol = m.solve()
    return sol.x, sol.duals, sol.objective


def reduced_cost(col: Column | tuple[int, Value], pi: Sequence[float]) -> float:
    """``v(C) + sum_{i in C} pi_i``; positive means the column improves the RMP."""
    coalition, value = (col.coalition, col.value) if isinstance(col, Column) else col
    total = float(value)
    i = 0
    while coalition:
        if coalition & 1:
            total += pi[i]
        coalition >>= 1
        i += 1
    return total


class Pricer(Protocol):
    def price(self, duals: np.ndarray, forbidden: set[int], top_k: int = 1,
              cutoff: float | None = None) -> list: ...


class IterationCapError(RuntimeError):
    pass


class TimeLimitReached(RuntimeError):
    pass


def generate_columns(
    m: MasterModel,
    pricer: Pricer,
    eps_price: float = EPS_PRICE,
    *,
    top_k: int = 1,
    extra_forbidden: Iterable[int] = (),
    max_rounds: int | None = None,
    deadline: float | None = None,
) -> int:
    """Alternate RMP solves and pricing until no column prices out.

    ``extra_forbidden`` lists coalitions that must not re-enter (columns fixed
    to zero on the branching path). Returns the number of columns added; on
    return ``m.solution`` is optimal for the node LP up to ``eps_price``.
    """
    if not 1 <= top_k <= 5:
        raise ValueError("top_k must be between 1 and 5")
    if max_rounds is None:
        max_rounds = 10 * 2 ** min(m.inst.n, 40)
    fixed_out = set(extra_forbidden)
    added = 0
    for _ in range(max_rounds):
        sol = m.solve()
        if not m.rows:
            return added
        if deadline is not None and time.process_time() > deadline:
            raise TimeLimitReached
        forbidden = set(m._ids) | fixed_out
        results = pricer.price(sol.duals, forbidden, top_k=top_k, cutoff=eps_price)
        new = [r for r in results if r.coalition and r.objective > eps_price]
        if not new:
            return added
        for r in new:
            if m.add_column(r.coalition) is None:
                raise RuntimeError("pricing returned a coalition already in the master")
            added += 1
    raise IterationCapError(f"column generation exceeded {max_rounds} rounds")
