"""Glover reformulations of the pricing problems, with an evaluator and an LP-file writer.

These models are built for export and for checking equivalence with the
pricing objective; nothing here solves them.

Variables are named by 1-based agent: ``v{i}`` binary membership, ``u{i}``
(quadratic models) or ``z{i}`` (coordination) continuous. Rows ``f1..`` are
the forbidden-configuration cuts, ``g1..g4m`` the four Glover rows per free
agent, ``h..`` the optional second-stage rows of the coordination model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from .instance import Instance, Kind
from .pricing import PricingProblem, glover_bounds


class InconsistentModelError(ValueError):
    """The Glover rows admit no value for a continuous variable (bad bounds)."""


@dataclass
class Row:
    name: str
    linear: dict[str, float]
    sense: str  # "<=", ">=" or "="
    rhs: float
    quadratic: dict[tuple[str, str], float] = field(default_factory=dict)
    target: str | None = None  # continuous variable this Glover row bounds


@dataclass
class LinearizedModel:
    kind: Kind
    agents: list[int]
    binaries: list[str]
    continuous: list[str]
    objective: dict[str, float]
    rows: list[Row]
    lower: np.ndarray  # W- (or Y-) per free agent
    upper: np.ndarray  # W+ (or Y+) per free agent
    name: str = ""

    @property
    def is_quadratic(self) -> bool:
        return any(r.quadratic for r in self.rows)

    def row(self, name: str) -> Row:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)


def _v(i: int) -> str:
    return f"v{i + 1}"


def _forbidden_rows(p: PricingProblem, agents: list[int]) -> list[Row]:
    # Hamming distance to the forbidden point >= 1:
    #   sum_{i in C} (1 - v_i) + sum_{i in U' \ C} v_i >= 1
    rows = []
    for k, c in enumerate(sorted(p.forbidden), start=1):
        inside = [a for a in agents if (c >> a) & 1]
        lin = {_v(a): (-1.0 if (c >> a) & 1 else 1.0) for a in agents}
        rows.append(Row(f"f{k}", lin, ">=", 1.0 - len(inside)))
    return rows


def _glover_rows(agents, inner_lin, inner_quad, inner_const, lower, upper, cont) -> list[Row]:
    """Four rows per agent tying ``cont_i`` to ``v_i * inner_i``.

    ``inner_i = inner_const_i + inner_lin_i . vars + inner_quad_i``.
    """
    rows = []
    k = 0
    for idx, a in enumerate(agents):
        lo, hi = float(lower[idx]), float(upper[idx])
        y = cont[idx]
        base = dict(inner_lin[idx])
        quad = dict(inner_quad[idx]) if inner_quad else {}
        const = inner_const[idx] if inner_const is not None else 0.0

        r1 = dict(base)
        r1[_v(a)] = r1.get(_v(a), 0.0) + hi
        r1[y] = -1.0
        r2 = dict(base)
        r2[_v(a)] = r2.get(_v(a), 0.0) + lo
        r2[y] = -1.0
        rows.append(Row(f"g{k + 1}", r1, "<=", hi - const, quad, y))
        rows.append(Row(f"g{k + 2}", r2, ">=", lo - const, dict(quad), y))
        rows.append(Row(f"g{k + 3}", {_v(a): lo, y: -1.0}, "<=", 0.0, target=y))
        rows.append(Row(f"g{k + 4}", {_v(a): hi, y: -1.0}, ">=", 0.0, target=y))
        k += 4
    return rows


def _free_agents(p: PricingProblem) -> list[int]:
    return [i for i in range(p.inst.n) if (p.free >> i) & 1]


def _quadratic_model(p: PricingProblem, w: np.ndarray, lin: np.ndarray, u_coef: float) -> LinearizedModel:
    agents = _free_agents(p)
    lower, upper = glover_bounds(w, agents)
    inner = [{_v(j): float(w[i, j]) for j in agents if w[i, j] != 0.0} for i in agents]
    cont = [f"u{a + 1}" for a in agents]
    obj = {}
    for idx, a in enumerate(agents):
        if lin[a] != 0.0:
            obj[_v(a)] = float(lin[a])
        obj[cont[idx]] = u_coef
    rows = _forbidden_rows(p, agents) + _glover_rows(agents, inner, None, None, lower, upper, cont)
    return LinearizedModel(p.kind, agents, [_v(a) for a in agents], cont, obj, rows, lower, upper, p.inst.name)


def linearize_edge_sum(p: PricingProblem) -> LinearizedModel:
    """MILP form of edge-sum pricing.

    ``u_i`` stands for ``v_i * sum_j w_ij v_j``; summing over agents counts
    every internal edge twice, hence the 1/2 on ``u`` in the objective.
    """
    if p.kind is not Kind.EDGE_SUM:
        raise ValueError("linearize_edge_sum needs an edge_sum instance")
    return _quadratic_model(p, p.inst.weights, np.asarray(p.duals, dtype=float), 0.5)


def correlation_coefficients(inst: Instance, duals: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """``(w', p)``: halved signed weights and linear coefficients of the correlation MILP."""
    w_half = 0.5 * (inst.plus - inst.minus).astype(float)
    lin = 0.5 * inst.minus.sum(axis=1).astype(float) + np.asarray(duals, dtype=float)
    return w_half, lin


def linearize_correlation(p: PricingProblem) -> LinearizedModel:
    if p.kind is not Kind.CORRELATION:
        raise ValueError("linearize_correlation needs a correlation instance")
    w_half, lin = correlation_coefficients(p.inst, p.duals)
    return _quadratic_model(p, w_half, lin, 1.0)


def _triangle_tensor(w: np.ndarray) -> np.ndarray:
    """t[i, j, k] = w_ij * w_ik * w_jk."""
    return w[:, :, None] * w[:, None, :] * w[None, :, :]


def coordination_bounds(p: PricingProblem, shortcut: bool | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Bounds on ``sum_{j in U'} v_j (sum_{k in U'} t_ijk (1 - v_k) + sum_{k in U} t_ijk)``.

    With ``shortcut`` (default: unit-weight instances) the closed forms
    ``0 .. n^2`` at the root and ``0 .. |U'|^2/2 + |U'||U|`` at a node are used.
    """
    inst = p.inst
    agents = _free_agents(p)
    covered = [i for i in range(inst.n) if not (p.free >> i) & 1]
    if shortcut is None:
        shortcut = inst.unit_weights
    m = len(agents)
    if shortcut:
        hi = float(inst.n ** 2) if not covered else m * m / 2 + m * len(covered)
        return np.zeros(m), np.full(m, hi)
    t = _triangle_tensor(inst.weights)
    F = np.array(agents, dtype=np.int64)
    U = np.array(covered, dtype=np.int64)
    lower = np.zeros(m)
    upper = np.zeros(m)
    for idx, i in enumerate(agents):
        ff = t[i][np.ix_(F, F)]
        lower[idx] = np.minimum(ff, 0.0).sum() / 2
        upper[idx] = np.maximum(ff, 0.0).sum() / 2
        if len(U):
            fu = t[i][np.ix_(F, U)]
            lower[idx] += np.minimum(fu, 0.0).sum()
            upper[idx] += np.maximum(fu, 0.0).sum()
    return lower, upper


def reduce_coordination(p: PricingProblem, shortcut: bool | None = None,
                        second_stage: bool = False) -> LinearizedModel:
    """Degree-reduced coordination pricing model (quadratic constraints).

    With ``second_stage`` the inner products ``v_j * (...)`` are linearised
    again through variables ``z{i}_{j}``, which gives a pure MILP.
    """
    if p.kind is not Kind.COORDINATION:
        raise ValueError("reduce_coordination needs a coordination instance")
    inst = p.inst
    agents = _free_agents(p)
    t = _triangle_tensor(inst.weights)
    pair_total = t.sum(axis=2)  # sum over every third agent, covered ones included
    lower, upper = coordination_bounds(p, shortcut)
    cont = [f"z{a + 1}" for a in agents]
    duals = np.asarray(p.duals, dtype=float)
    obj = {}
    for idx, a in enumerate(agents):
        if duals[a] != 0.0:
            obj[_v(a)] = float(duals[a])
        obj[cont[idx]] = 1.0
    rows = _forbidden_rows(p, agents)
    continuous = list(cont)

    if not second_stage:
        inner_lin, inner_quad = [], []
        for i in agents:
            inner_lin.append({_v(j): float(pair_total[i, j]) for j in agents if pair_total[i, j] != 0.0})
            quad = {}
            for x, j in enumerate(agents):
                for k in agents[x + 1:]:
                    if t[i, j, k] != 0.0:
                        quad[(_v(j), _v(k))] = -2.0 * float(t[i, j, k])
            inner_quad.append(quad)
        rows += _glover_rows(agents, inner_lin, inner_quad, None, lower, upper, cont)
    else:
        covered = [k for k in range(inst.n) if not (p.free >> k) & 1]
        pair_vars = []
        pair_lo, pair_hi, pair_lin, pair_const = [], [], [], []
        inner_lin = []
        for i in agents:
            lin = {}
            for j in agents:
                if j == i or inst.weights[i, j] == 0.0:
                    continue
                name = f"z{i + 1}_{j + 1}"
                pair_vars.append((j, name))
                fixed = float(sum(t[i, j, k] for k in covered))
                tk = [float(t[i, j, k]) for k in agents]
                pair_lo.append(fixed + sum(x for x in tk if x < 0))
                pair_hi.append(fixed + sum(x for x in tk if x > 0))
                pair_lin.append({_v(k): -x for k, x in zip(agents, tk) if x != 0.0})
                pair_const.append(float(pair_total[i, j]))
                lin[name] = 1.0
            inner_lin.append(lin)
        hrows = _glover_rows([j for j, _ in pair_vars], pair_lin, None, pair_const,
                             pair_lo, pair_hi, [nm for _, nm in pair_vars])
        for r in hrows:
            r.name = "h" + r.name[1:]
        continuous += [nm for _, nm in pair_vars]
        rows += _glover_rows(agents, inner_lin, None, None, lower, upper, cont) + hrows
    return LinearizedModel(p.kind, agents, [_v(a) for a in agents], continuous, obj, rows,
                           lower, upper, inst.name)


def linearize(p: PricingProblem) -> LinearizedModel:
    if p.kind is Kind.EDGE_SUM:
        return linearize_edge_sum(p)
    if p.kind is Kind.CORRELATION:
        return linearize_correlation(p)
    return reduce_coordination(p)


# -- evaluation -------------------------------------------------------------

def _row_activity(row: Row, values: dict[str, float], skip: str | None = None) -> float:
    total = 0.0
    for name, c in row.linear.items():
        if name != skip:
            total += c * values[name]
    for (a, b), c in row.quadratic.items():
        total += c * values[a] * values[b]
    return total


def evaluate_linearized(m: LinearizedModel, v) -> float:
    """Objective at binary point ``v`` with every continuous variable at its best feasible value.

    ``v`` is a coalition bit mask or a 0/1 sequence aligned with ``m.agents``.
    """
    if isinstance(v, (int, np.integer)):
        bits = [(int(v) >> a) & 1 for a in m.agents]
    else:
        bits = [int(x) for x in v]
        if len(bits) != len(m.agents):
            raise ValueError("binary point has the wrong length")
    values: dict[str, float] = {name: float(b) for name, b in zip(m.binaries, bits)}

    for row in m.rows:
        if row.name.startswith("f"):
            act = _row_activity(row, values)
            if not _satisfied(act, row.sense, row.rhs):
                raise ValueError(f"binary point violates forbidden row {row.name}")

    rows_of: dict[str, list[Row]] = {y: [] for y in m.continuous}
    for row in m.rows:
        if row.target is not None:
            rows_of[row.target].append(row)
    pending = list(m.continuous)
    while pending:
        progressed = False
        for y in list(pending):
            rows = rows_of[y]
            if any(n not in values for r in rows for n in r.linear if n != y):
                continue
            lo, hi = -math.inf, math.inf
            for r in rows:
                c = r.linear[y]
                slack = (r.rhs - _row_activity(r, values, skip=y)) / c
                upper_side = (r.sense == "<=") == (c > 0)
                if r.sense == "=":
                    lo, hi = max(lo, slack), min(hi, slack)
                elif upper_side:
                    hi = min(hi, slack)
                else:
                    lo = max(lo, slack)
            if lo > hi + 1e-9 * max(1.0, abs(lo), abs(hi)):
                raise InconsistentModelError(f"no feasible value for {y}: [{lo}, {hi}]")
            coef = m.objective.get(y, 0.0)
            values[y] = lo if coef < 0 and math.isfinite(lo) else (hi if math.isfinite(hi) else lo)
            pending.remove(y)
            progressed = True
        if not progressed:
            raise InconsistentModelError("continuous variables depend on each other cyclically")
    return float(sum(c * values[name] for name, c in m.objective.items()))


def _satisfied(act: float, sense: str, rhs: float, tol: float = 1e-9) -> bool:
    if sense == "<=":
        return act <= rhs + tol
    if sense == ">=":
        return act >= rhs - tol
    return abs(act - rhs) <= tol


# -- LP file ----------------------------------------------------------------

def _num(c: float) -> str:
    return format(c, ".17g")


def _terms(linear: dict[str, float], quadratic: dict[tuple[str, str], float] | None = None) -> list[str]:
    out = []
    for name, c in linear.items():
        if c == 0.0:
            continue
        sign = "-" if c < 0 else "+"
        out.append(f"{sign} {_num(abs(c))} {name}")
    if quadratic:
        q = []
        for (a, b), c in quadratic.items():
            if c == 0.0:
                continue
            sign = "-" if c < 0 else "+"
            q.append(f"{sign} {_num(abs(c))} {a} * {b}")
        if q:
            first = q[0][2:] if q[0].startswith("+ ") else q[0]
            out.append("+ [ " + " ".join([first] + q[1:]) + " ]")
    if out and out[0].startswith("+ "):
        out[0] = out[0][2:]
    return out


def _wrap(prefix: str, terms: list[str], tail: str = "") -> list[str]:
    lines, cur = [], prefix
    for tm in terms:
        if len(cur) + len(tm) + 1 > 250:
            lines.append(cur)
            cur = "   "
        cur += " " + tm
    cur += tail
    lines.append(cur)
    return lines


def format_lp(m: LinearizedModel) -> str:
    rank = {name: k for k, name in enumerate(m.binaries + m.continuous)}

    def ordered(d: dict[str, float]) -> dict[str, float]:
        return dict(sorted(d.items(), key=lambda kv: rank[kv[0]]))

    sense_map = {"<=": "<=", ">=": ">=", "=": "="}
    out = [f"\\ Pricing model for {m.name or 'instance'} ({m.kind.value})"]
    if m.is_quadratic:
        out.append("\\ Quadratically constrained model (MIQCP)")
    out.append("Maximize")
    obj = _terms(ordered(m.objective)) or ([f"0 {m.binaries[0]}"] if m.binaries else ["0"])
    out += _wrap(" obj:", obj)
    out.append("Subject To")
    for r in m.rows:
        terms = _terms(ordered(r.linear), r.quadratic) or [f"0 {m.binaries[0]}"]
        out += _wrap(f" {r.name}:", terms, f" {sense_map[r.sense]} {_num(r.rhs + 0.0)}")
    out.append("Bounds")
    for y in m.continuous:
        out.append(f" {y} free")
    out.append("Binaries")
    for k in range(0, len(m.binaries), 10):
        out.append(" " + " ".join(m.binaries[k:k + 10]))
    out.append("End")
    return "\n".join(out) + "\n"


def export_lp(m: LinearizedModel, sink: IO[str] | str | Path) -> None:
    text = format_lp(m)
    if isinstance(sink, (str, Path)):
        Path(sink).write_text(text, encoding="utf-8")
    else:
        sink.write(text)
