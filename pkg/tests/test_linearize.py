import io
import itertools
from fractions import Fraction

import numpy as np
import pytest

from csgbp.instance import Edge, Instance, Kind, Sign, agents_to_mask
from csgbp.linearize import (
    InconsistentModelError, coordination_bounds, correlation_coefficients, evaluate_linearized, export_lp,
    format_lp, linearize, linearize_correlation, linearize_edge_sum, reduce_coordination,
)
from csgbp.pricing import PricingProblem, pricing_objective
from csgbp.valuation import coalition_value

from conftest import random_instance

M = agents_to_mask


def root(inst, duals=None, forbidden=()):
    return PricingProblem(inst, inst.full_mask, duals if duals is not None else [0.0] * inst.n, frozenset(forbidden))


def test_t3_structure_and_value(t3):
    m = linearize_edge_sum(root(t3))
    assert len(m.binaries) == 3 and len(m.continuous) == 3 and len(m.rows) == 12
    assert all(r.name.startswith("g") for r in m.rows)
    assert evaluate_linearized(m, M([2, 3])) == 3.0
    assert evaluate_linearized(m, [0, 1, 1]) == 3.0
    assert evaluate_linearized(m, 0) == 0.0
    assert (m.lower <= m.upper).all()


def test_zero_weight_graph():
    inst = Instance(4, (Edge(0, 1, 0.0), Edge(2, 3, 0.0)), Kind.EDGE_SUM)
    duals = [0.5, -1.0, 2.0, 0.25]
    m = linearize_edge_sum(root(inst, duals))
    assert (m.lower == 0).all() and (m.upper == 0).all()
    for c in range(16):
        assert evaluate_linearized(m, c) == sum(d for i, d in enumerate(duals) if (c >> i) & 1)


def test_s3_coefficients(s3):
    w, p = correlation_coefficients(s3, [0, 0, 0])
    assert list(p) == [0.5, 0.0, 0.5]
    assert w[0, 1] == 0.5 and w[0, 2] == -0.5 and w[1, 2] == 0.5
    m = linearize_correlation(root(s3))
    assert evaluate_linearized(m, 7) == 2


def test_all_plus_correlation_matches_unit_edge_sum():
    edges = [Edge(i, j, sign=Sign.PLUS) for i, j in itertools.combinations(range(5), 2) if (i + j) % 3]
    corr = Instance(5, tuple(edges), Kind.CORRELATION)
    unit = Instance(5, tuple(Edge(e.i, e.j, 1.0) for e in edges), Kind.EDGE_SUM)
    duals = [0.5, -1, 0, 1.5, -0.5]
    _, p = correlation_coefficients(corr, duals)
    assert list(p) == duals
    mc, me = linearize_correlation(root(corr, duals)), linearize_edge_sum(root(unit, duals))
    for c in range(32):
        assert evaluate_linearized(mc, c) == evaluate_linearized(me, c)


def test_k3_coordination_bounds_and_value(k3):
    lo, hi = coordination_bounds(root(k3))
    assert list(lo) == [0, 0, 0] and list(hi) == [9, 9, 9]
    node = PricingProblem(k3, M([1, 2]), [0, 0, 0])
    lo, hi = coordination_bounds(node)
    assert list(hi) == [4, 4]
    m = reduce_coordination(root(k3))
    assert m.is_quadratic
    assert evaluate_linearized(m, M([1, 2])) == 2 == coalition_value(k3, M([1, 2]))


def test_node_shortcut_below_three_quarters_n_squared():
    for n in range(2, 12):
        inst = Instance(n, tuple(Edge(i, j, 1.0) for i, j in itertools.combinations(range(n), 2)), Kind.COORDINATION)
        for free in (inst.full_mask >> 1, inst.full_mask >> (n // 2)):
            _, hi = coordination_bounds(PricingProblem(inst, free, [0] * n))
            assert (hi <= 0.75 * n * n).all()


def _inner_coordination(inst, free, v):
    w = inst.weights
    t = w[:, :, None] * w[:, None, :] * w[None, :, :]
    out = []
    for i in range(inst.n):
        if not (free >> i) & 1:
            continue
        total = 0.0
        for j in range(inst.n):
            if not (free >> j) & 1 or not (v >> j) & 1:
                continue
            for k in range(inst.n):
                if (free >> k) & 1:
                    total += t[i, j, k] * (1 - ((v >> k) & 1))
                else:
                    total += t[i, j, k]
        out.append(total)
    return np.array(out)


@pytest.mark.parametrize("unit", [True, False])
def test_coordination_bound_validity_exhaustive(unit):
    for seed in range(4):
        inst = random_instance(Kind.COORDINATION, 8, seed=seed, p=0.7, unit_weights=unit)
        for free in (inst.full_mask, 0b01101011):
            lo, hi = coordination_bounds(PricingProblem(inst, free, [0] * 8))
            for v in range(1 << 8):
                if v & ~free:
                    continue
                e = _inner_coordination(inst, free, v)
                assert (e >= lo - 1e-9).all() and (e <= hi + 1e-9).all()


def test_forbidden_cut_exactness_exhaustive():
    rng = np.random.default_rng(5)
    for n in (4, 7, 10):
        inst = random_instance(Kind.EDGE_SUM, n, seed=n)
        forbidden = {int(x) for x in rng.integers(1, 1 << n, 6)}
        m = linearize_edge_sum(root(inst, forbidden=forbidden))
        frows = [r for r in m.rows if r.name.startswith("f")]
        assert len(frows) == len(forbidden)
        for row, c in zip(frows, sorted(forbidden)):
            for v in range(1 << n):
                act = sum(coef * ((v >> (int(name[1:]) - 1)) & 1) for name, coef in row.linear.items())
                assert (act >= row.rhs) == (v != c)


def test_forbidden_point_rejected(t3):
    m = linearize_edge_sum(root(t3, forbidden={M([2, 3])}))
    with pytest.raises(ValueError):
        evaluate_linearized(m, M([2, 3]))
    assert evaluate_linearized(m, M([1, 2, 3])) == 2.0


def test_bad_bounds_reported(t3):
    m = linearize_edge_sum(root(t3))
    for r in m.rows:
        if r.name == "g12":  # W3+ v3 - u3 >= 0 with W3+ forced too small
            r.linear["v3"] = 0.5
    with pytest.raises(InconsistentModelError):
        evaluate_linearized(m, M([2, 3]))


def test_wrong_point_length(t3):
    with pytest.raises(ValueError):
        evaluate_linearized(linearize_edge_sum(root(t3)), [1, 0])


@pytest.mark.parametrize("kind", list(Kind))
def test_equivalence_random_points(kind, rng):
    for _ in range(60):
        n = int(rng.integers(1, 11))
        inst = random_instance(kind, n, seed=int(rng.integers(2**31)), p=0.8)
        free = inst.full_mask if rng.random() < 0.5 else int(rng.integers(1, 1 << n))
        duals = rng.integers(-6, 7, n) / 2
        m = linearize(PricingProblem(inst, free, duals))
        v = int(rng.integers(0, 1 << n)) & free
        got = evaluate_linearized(m, v)
        direct = pricing_objective(inst, v, duals) if v else 0.0
        if kind is Kind.CORRELATION:
            exact = coalition_value(inst, v) + sum(Fraction(d) for i, d in enumerate(duals) if (v >> i) & 1) if v else 0
            assert Fraction(got) == exact
        else:
            assert got == pytest.approx(direct, abs=1e-9)


def test_second_stage_variant(rng):
    for seed in range(5):
        inst = random_instance(Kind.COORDINATION, 6, seed=seed, p=0.8, unit_weights=seed % 2 == 0)
        duals = rng.uniform(-2, 2, 6)
        p = PricingProblem(inst, 0b111011, duals)
        m = reduce_coordination(p, second_stage=True)
        assert not m.is_quadratic
        pairs = [c for c in m.continuous if "_" in c]
        assert len([r for r in m.rows if r.name.startswith("h")]) == 4 * len(pairs)
        for v in range(64):
            if v & ~p.free:
                continue
            want = pricing_objective(inst, v, duals) if v else 0.0
            assert evaluate_linearized(m, v) == pytest.approx(want, abs=1e-9)


def test_lp_text_shape(t3, s3):
    text = format_lp(linearize_edge_sum(root(t3)))
    assert "Maximize" in text and "Subject To" in text and "Binaries" in text and text.endswith("End\n")
    assert " f1:" not in text and " g12:" in text
    assert "0.5 u1" in text and "[" not in text
    corr = format_lp(linearize_correlation(root(s3)))
    assert "obj: 0.5 v1 + 0.5 v3" in corr


def test_coordination_lp_has_quadratic_constraints_only(k3):
    text = format_lp(reduce_coordination(root(k3)))
    obj_line = next(line for line in text.splitlines() if line.startswith(" obj:"))
    assert "[" not in obj_line
    assert "[" in text.split("Subject To")[1] and "*" in text
    assert "Quadratically constrained" in text


def test_export_to_path_and_stream(tmp_path, t3):
    m = linearize_edge_sum(root(t3))
    export_lp(m, tmp_path / "t3.lp")
    buf = io.StringIO()
    export_lp(m, buf)
    assert (tmp_path / "t3.lp").read_text() == buf.getvalue()


@pytest.mark.parametrize("forbidden", [(), (M([2, 3]),), (1, 2, 4, M([1, 3]))])
def test_independent_reader_round_trip(tmp_path, t3, forbidden):
    highspy = pytest.importorskip("highspy")
    path = tmp_path / "t3.lp"
    export_lp(linearize_edge_sum(root(t3, forbidden=forbidden)), path)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    assert h.readModel(str(path)) == highspy.HighsStatus.kOk
    lp = h.getLp()
    kinds = dict(zip(lp.col_names_, lp.integrality_))
    assert sorted(n for n, k in kinds.items() if k == highspy.HighsVarType.kInteger) == ["v1", "v2", "v3"]
    assert sorted(n for n, k in kinds.items() if k == highspy.HighsVarType.kContinuous) == ["u1", "u2", "u3"]
    assert lp.num_row_ == 12 + len(forbidden)


def test_independent_reader_optimum_matches_pricing(tmp_path):
    """HiGHS solving the exported MILP agrees with the pricing optimum (linear kinds)."""
    highspy = pytest.importorskip("highspy")
    from csgbp.pricing import price
    rng = np.random.default_rng(11)
    for kind in (Kind.EDGE_SUM, Kind.CORRELATION):
        for seed in range(4):
            inst = random_instance(kind, 8, seed=seed, p=0.7)
            duals = rng.uniform(-1, 1, 8)
            p = PricingProblem(inst, inst.full_mask, duals, frozenset({int(x) for x in rng.integers(1, 256, 4)}))
            path = tmp_path / f"{kind.value}{seed}.lp"
            export_lp(linearize(p), path)
            h = highspy.Highs()
            h.setOptionValue("output_flag", False)
            h.readModel(str(path))
            h.run()
            assert h.getInfo().objective_function_value == pytest.approx(price(p).objective, abs=1e-6)
