"""Branch and price over the set-partitioning master.

Each node fixes some columns to 1 (their agents become covered) or to 0
(the coalition may not re-enter), rebuilds the RMP over the free agents from
the parent's surviving columns, prices it to optimality and then fathoms or
branches on a fractional column. Search is depth first with the ``x_j = 1``
child explored first.
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .instance import Instance, Kind
from .master import MasterModel, TimeLimitReached, generate_columns
from .pricing import NodePricer
from .valuation import Value, canonical_partition, structure_value


class FathomStatus(enum.Enum):
    INTEGRAL = "integral"
    BOUNDED = "bounded"
    OPEN = "open"


@dataclass(frozen=True)
class SolveConfig:
    node_limit: int | None = None
    eps_int: float = 1e-6
    eps_price: float = 1e-6
    branch_window: tuple[float, float] = (0.35, 0.65)
    time_limit: float | None = None
    one_branch_first: bool = True
    top_k: int = 1

    def __post_init__(self):
        for name in ("eps_int", "eps_price"):
            if not 0 < getattr(self, name) < 1e-2:
                raise ValueError(f"{name} must lie in (0, 1e-2)")
        lo, hi = self.branch_window
        if not 0 < lo < 0.5 < hi < 1:
            raise ValueError("branch window must lie in (0, 1) and contain 0.5")
        if self.node_limit is not None and self.node_limit < 1:
            raise ValueError("node_limit must be positive")

    @classmethod
    def paper_mode(cls, **kw) -> "SolveConfig":
        """Node budget of 40, as in the original experiments."""
        return cls(node_limit=40, **kw)


@dataclass(frozen=True)
class NodeState:
    covered: int
    free: int
    columns: tuple[int, ...]  # active coalitions, all inside ``free``
    fixed_one: tuple[int, ...] = ()
    fixed_zero: frozenset[int] = frozenset()
    decisions: tuple[tuple[int, int], ...] = ()
    depth: int = 0
    basis: tuple[int, ...] = ()  # parent's basic coalitions (warm start)
    bound: float = math.inf  # parent LP value


@dataclass
class NodeRecord:
    depth: int
    lp: float
    parent_lp: float
    status: FathomStatus
    columns_added: int


@dataclass
class SolveReport:
    name: str
    kind: Kind
    n: int
    lp_root: float
    best_int: Value
    best_partition: tuple[int, ...]
    gap: float
    nodes: int
    columns_total: int
    int_solutions: int
    proven: bool
    time_total: float = 0.0
    time_root: float = 0.0
    time_per_node: float = 0.0
    node_log: list[NodeRecord] = field(default_factory=list)


def root_state(inst: Instance) -> NodeState:
    singles = tuple(1 << i for i in range(inst.n))
    return NodeState(covered=0, free=inst.full_mask, columns=singles, basis=singles)


def fix_and_reduce(parent: NodeState, coalition: int, val: int) -> NodeState:
    """Child node with the column of ``coalition`` fixed to ``val``."""
    if coalition not in parent.columns:
        raise ValueError("can only fix an active column")
    decisions = parent.decisions + ((coalition, val),)
    if val == 1:
        if coalition & parent.covered:
            raise ValueError("column intersects the covered agents")
        covered = parent.covered | coalition
        return replace(
            parent,
            covered=covered,
            free=parent.free & ~coalition,
            columns=tuple(c for c in parent.columns if not c & covered),
            fixed_one=parent.fixed_one + (coalition,),
            fixed_zero=frozenset(z for z in parent.fixed_zero if not z & covered),
            decisions=decisions,
            depth=parent.depth + 1,
            basis=tuple(c for c in parent.basis if not c & covered),
        )
    if val == 0:
        return replace(
            parent,
            columns=tuple(c for c in parent.columns if c != coalition),
            fixed_zero=parent.fixed_zero | {coalition},
            decisions=decisions,
            depth=parent.depth + 1,
            basis=tuple(c for c in parent.basis if c != coalition),
        )
    raise ValueError("val must be 0 or 1")


def select_branching_variable(
    x, sizes, eps_int: float = 1e-6, window: tuple[float, float] = (0.35, 0.65)
) -> int | None:
    """Index of the fractional variable to branch on, or ``None`` if ``x`` is integral.

    Prefers values inside ``window``; in both tiers the value closest to 0.5
    wins, then the larger coalition, then the smaller index.
    """
    x = np.asarray(x, dtype=float)
    frac = [j for j in range(len(x)) if eps_int < x[j] < 1 - eps_int]
    if not frac:
        return None
    inside = [j for j in frac if window[0] < x[j] < window[1]]
    pool = inside or frac
    return min(pool, key=lambda j: (abs(x[j] - 0.5), -sizes[j], j))


def _prune_bound(lp: float, kind: Kind, n: int, eps_price: float) -> float:
    # Correlation structure values are integers, so the bound can be rounded down.
    if kind is Kind.CORRELATION and math.isfinite(lp):
        return math.floor(lp + n * eps_price + 1e-6)
    return lp


def fathom_check(
    node: NodeState, model: MasterModel, incumbent: float, cfg: SolveConfig
) -> tuple[FathomStatus, tuple[int, ...] | None]:
    """Classify a node whose LP is optimal; returns the node partition if integral."""
    sol = model.solution
    x = sol.x
    if np.all((x <= cfg.eps_int) | (x >= 1 - cfg.eps_int)):
        chosen = tuple(c.coalition for c, xj in zip(model.columns, x) if xj >= 1 - cfg.eps_int)
        return FathomStatus.INTEGRAL, node.fixed_one + chosen
    if _prune_bound(sol.objective, model.inst.kind, model.inst.n, cfg.eps_price) <= incumbent + 1e-6:
        return FathomStatus.BOUNDED, None
    return FathomStatus.OPEN, None


def _warm_basis(model: MasterModel, basic: tuple[int, ...]) -> list[int] | None:
    """Parent basis restricted to surviving columns, topped up with singletons."""
    ids = [model.column_id(c) for c in basic]
    ids = [i for i in ids if i is not None]
    covered = 0
    for i in ids:
        covered |= model.columns[i].coalition
    for a in model.rows:
        if not (covered >> a) & 1:
            sid = model.column_id(1 << a)
            if sid is not None:
                ids.append(sid)
    if len(ids) != len(model.rows):
        ids = [model.column_id(1 << a) for a in model.rows]
        if any(i is None for i in ids):
            return None
    return ids


def compute_gap(lp_root: float, best_int: float) -> float:
    if best_int != 0:
        return (lp_root - best_int) / abs(best_int)
    return 0.0 if abs(lp_root - best_int) <= 1e-9 else math.inf


def solve(inst: Instance, cfg: SolveConfig | None = None) -> SolveReport:
    cfg = cfg or SolveConfig()
    t_start = time.process_time()
    deadline = None if cfg.time_limit is None else t_start + cfg.time_limit

    singletons = tuple(1 << i for i in range(inst.n))
    best_partition = singletons
    best_value = structure_value(inst, singletons)
    int_solutions = 0
    nodes = 0
    columns_total = inst.n
    lp_root = None
    time_root = 0.0
    proven = True
    log: list[NodeRecord] = []

    stack = [root_state(inst)]
    while stack:
        if cfg.node_limit is not None and nodes >= cfg.node_limit:
            proven = False
            break
        if deadline is not None and time.process_time() > deadline:
            proven = False
            break
        node = stack.pop()
        if _prune_bound(node.bound, inst.kind, inst.n, cfg.eps_price) <= best_value + 1e-6:
            continue
        nodes += 1

        if node.free == 0:
            int_solutions += 1
            value = structure_value(inst, node.fixed_one)
            if value > best_value:
                best_value, best_partition = value, node.fixed_one
            log.append(NodeRecord(node.depth, float(value), node.bound, FathomStatus.INTEGRAL, 0))
            continue

        model = MasterModel(inst, node.free, node.columns)
        model.basis = _warm_basis(model, node.basis)
        pricer = NodePricer(inst, node.free)
        try:
            added = generate_columns(model, pricer, cfg.eps_price, top_k=cfg.top_k,
                                     extra_forbidden=node.fixed_zero, deadline=deadline)
        except TimeLimitReached:
            proven = False
            if lp_root is None:
                lp_root = model.solution.objective
                time_root = time.process_time() - t_start
            break
        columns_total += added
        lp = model.solution.objective
        if lp_root is None:
            lp_root = lp
            time_root = time.process_time() - t_start

        status, partition = fathom_check(node, model, float(best_value), cfg)
        log.append(NodeRecord(node.depth, lp, node.bound, status, added))
        if status is FathomStatus.INTEGRAL:
            int_solutions += 1
            value = structure_value(inst, partition)
            if value > best_value:
                best_value, best_partition = value, partition
            continue
        if status is FathomStatus.BOUNDED:
            continue

        x = model.solution.x
        # Singletons are never branched on: a fractional singleton always shares
        # its row with a fractional larger column, and keeping singletons in every
        # child keeps the child RMP feasible.
        xb = np.where([c.coalition & (c.coalition - 1) for c in model.columns], x, 0.0)
        sizes = [bin(c.coalition).count("1") for c in model.columns]
        j = select_branching_variable(xb, sizes, cfg.eps_int, cfg.branch_window)
        chosen = model.columns[j].coalition
        here = replace(
            node,
            columns=tuple(c.coalition for c in model.columns),
            basis=tuple(model.columns[b].coalition for b in model.basis),
            bound=lp,
        )
        children = [fix_and_reduce(here, chosen, 0), fix_and_reduce(here, chosen, 1)]
        if not cfg.one_branch_first:
            children.reverse()
        stack.extend(children)

    if lp_root is None:  # node limit can't stop the root; only a zero time limit
        lp_root = math.inf
    time_total = time.process_time() - t_start
    best_partition = canonical_partition(best_partition)
    return SolveReport(
        name=inst.name,
        kind=inst.kind,
        n=inst.n,
        lp_root=float(lp_root),
        best_int=best_value,
        best_partition=best_partition,
        gap=compute_gap(float(lp_root), float(best_value)),
        nodes=nodes,
        columns_total=columns_total,
        int_solutions=int_solutions,
        proven=proven,
        time_total=time_total,
        time_root=time_root,
        time_per_node=time_total / max(nodes, 1),
        node_log=log,
    )
