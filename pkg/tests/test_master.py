from fractions import Fraction

import numpy as np
import pytest

from csgbp.instance import Instance, Kind, agents_to_mask
from csgbp.master import (
    EPS_PRICE, Column, MasterModel, build_root_rmp, generate_columns, reduced_cost, solve_rmp,
)
from csgbp.oracle import enumerate_optimum
from csgbp.pricing import NodePricer
from csgbp.valuation import coalition_value, coalition_values

from conftest import random_instance

M = agents_to_mask


class RecordingPricer:
    def __init__(self, inst):
        self.inner = NodePricer(inst)
        self.found = []

    def price(self, duals, forbidden, top_k=1, cutoff=None):
        res = self.inner.price(duals, forbidden, top_k=top_k, cutoff=cutoff)
        self.found.append(res[0].coalition)
        return res


def _check_lp(m: MasterModel):
    sol = m.solution
    A, c = m.matrix, m.costs
    assert np.all(sol.x >= -1e-9) and np.all(sol.x <= 1 + 1e-8)
    assert np.allclose(A @ sol.x, 1.0, atol=1e-8)
    y = -sol.duals[m.rows]
    reduced = c - A.T @ y
    assert np.all(reduced <= 1e-7)
    assert np.all(np.abs(sol.x * reduced) <= 1e-6)
    assert -sol.duals.sum() == pytest.approx(sol.objective, abs=1e-6)


def test_root_rmp_t3(t3):
    m = build_root_rmp(t3)
    assert [c.coalition for c in m.columns] == [1, 2, 4]
    assert [c.value for c in m.columns] == [0, 0, 0]
    x, pi, obj = solve_rmp(m)
    assert obj == 0 and np.allclose(x, 1) and np.allclose(pi, 0)


def test_root_rmp_s3(s3):
    m = build_root_rmp(s3)
    assert [c.value for c in m.columns] == [Fraction(1, 2), 0, Fraction(1, 2)]


def test_single_agent():
    inst = Instance(1, (), Kind.EDGE_SUM)
    m = build_root_rmp(inst)
    x, _, obj = solve_rmp(m)
    assert len(m.columns) == 1 and x[0] == 1 and obj == 0
    assert generate_columns(m, NodePricer(inst), EPS_PRICE) == 0


def test_t3_with_pair_column(t3):
    m = MasterModel(t3, columns=[1, 2, 4, M([2, 3])])
    x, pi, obj = solve_rmp(m)
    assert obj == pytest.approx(3.0)
    assert x[m.column_id(M([2, 3]))] == pytest.approx(1)
    assert x[m.column_id(M([1]))] == pytest.approx(1)
    _check_lp(m)


def test_duplicate_and_invalid_columns(t3):
    m = build_root_rmp(t3)
    assert m.add_column(1) is None
    with pytest.raises(ValueError):
        m.add_column(0)
    sub = MasterModel(t3, free=0b011)
    with pytest.raises(ValueError):
        sub.add_column(0b100)


def test_reduced_cost_examples(t3):
    assert reduced_cost((M([2, 3]), 3.0), [0, 0, 0]) == 3.0
    col = Column(M([1]), 0.5, 0)
    assert reduced_cost(col, [-0.5, 0, 0]) == 0


def test_generate_columns_t3(t3):
    m = build_root_rmp(t3)
    pricer = RecordingPricer(t3)
    generate_columns(m, pricer, EPS_PRICE)
    assert pricer.found[0] == M([2, 3])
    assert m.solution.objective == pytest.approx(3.0)


def test_generate_columns_s3(s3):
    m = build_root_rmp(s3)
    generate_columns(m, NodePricer(s3), EPS_PRICE)
    assert m.solution.objective == pytest.approx(2.0)


def test_full_column_of_optimum():
    """An RMP holding the oracle's optimal blocks reaches exactly the optimum."""
    for seed in range(8):
        inst = random_instance(Kind.EDGE_SUM, 7, seed=seed)
        best = enumerate_optimum(inst)
        m = MasterModel(inst, columns=[1 << i for i in range(7)] + list(best.best_partition))
        _, _, obj = solve_rmp(m)
        assert obj == pytest.approx(float(best.best_value), abs=1e-9)


@pytest.mark.parametrize("kind", list(Kind))
def test_dual_feasibility_over_all_coalitions(kind):
    for seed in range(4):
        n = 12 if kind is not Kind.COORDINATION else 10
        inst = random_instance(kind, n, seed=seed, p=0.7)
        for top_k in (1, 3):
            trace = []
            m = build_root_rmp(inst)
            generate_columns(m, _Tracing(NodePricer(inst), m, trace), EPS_PRICE, top_k=top_k)
            _check_lp(m)
            masks = np.arange(1, 1 << n, dtype=np.int64)
            vals = coalition_values(inst, masks)
            for i in range(n):
                vals += m.solution.duals[i] * ((masks >> i) & 1)
            assert vals.max() <= EPS_PRICE + 1e-9
            assert len({c.coalition for c in m.columns}) == len(m.columns)
            assert all(b >= a - 1e-7 for a, b in zip(trace, trace[1:]))


class _Tracing:
    """Records the RMP objective before every pricing round."""

    def __init__(self, inner, model, trace):
        self.inner, self.model, self.trace = inner, model, trace

    def price(self, duals, forbidden, top_k=1, cutoff=None):
        self.trace.append(self.model.solution.objective)
        return self.inner.price(duals, forbidden, top_k=top_k, cutoff=cutoff)


def test_column_values_match_valuation():
    inst = random_instance(Kind.CORRELATION, 9, seed=1, p=0.6)
    m = build_root_rmp(inst)
    generate_columns(m, NodePricer(inst), EPS_PRICE)
    for col in m.columns:
        assert col.value == coalition_value(inst, col.coalition)


def test_top_k_validation(t3):
    with pytest.raises(ValueError):
        generate_columns(build_root_rmp(t3), NodePricer(t3), top_k=6)
