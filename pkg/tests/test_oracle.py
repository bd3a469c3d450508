from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csgbp.bnb import solve
from csgbp.instance import Edge, Instance, Kind, agents_to_mask
from csgbp.oracle import ORACLE_LIMIT, enumerate_optimum, growth_strings, verify_report
from csgbp.valuation import structure_value

from conftest import random_instance

M = agents_to_mask
BELL = [1, 1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975]


@pytest.mark.parametrize("n", range(len(BELL)))
def test_bell_numbers(n):
    blocks = list(growth_strings(n))
    strings = np.vstack(blocks)
    assert len(strings) == BELL[n]
    assert len({s.tobytes() for s in strings}) == BELL[n]
    if n:
        assert (strings[:, 0] == 0).all()
        prefix_max = np.maximum.accumulate(strings, axis=1)
        assert (strings[:, 1:] <= prefix_max[:, :-1] + 1).all()
        keys = [tuple(s) for s in strings]
        assert keys == sorted(keys)


def test_t3_and_s3(t3, s3):
    r = enumerate_optimum(t3)
    assert r.partitions_scanned == 5 and r.best_value == 3.0 and r.best_partition == (M([1]), M([2, 3]))
    assert enumerate_optimum(s3).best_value == 2


def test_size_guard():
    with pytest.raises(ValueError):
        enumerate_optimum(Instance(ORACLE_LIMIT + 1, (), Kind.EDGE_SUM))


def test_ties_take_first_growth_string():
    # no edges: every partition scores 0, the first growth string is the grand coalition
    assert enumerate_optimum(Instance(4, (), Kind.EDGE_SUM)).best_partition == (15,)


def _brute_partitions(n):
    """Recursive block assignment, independent of the growth-string code."""
    def rec(i, blocks):
        if i == n:
            yield list(blocks)
            return
        for k in range(len(blocks)):
            blocks[k] |= 1 << i
            yield from rec(i + 1, blocks)
            blocks[k] &= ~(1 << i)
        blocks.append(1 << i)
        yield from rec(i + 1, blocks)
        blocks.pop()
    yield from rec(0, [])


@pytest.mark.parametrize("kind", list(Kind))
def test_matches_naive_enumeration(kind):
    for seed in range(3):
        inst = random_instance(kind, 7, seed=seed, p=0.7)
        best = max(float(structure_value(inst, p)) for p in _brute_partitions(7))
        assert float(enumerate_optimum(inst).best_value) == pytest.approx(best, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), kind=st.sampled_from(list(Kind)), n=st.integers(1, 8))
def test_relabeling_invariance(seed, kind, n):
    inst = random_instance(kind, n, seed=seed, p=0.7)
    perm = np.random.default_rng(seed).permutation(n)
    edges = []
    for e in inst.edges:
        i, j = sorted((int(perm[e.i]), int(perm[e.j])))
        edges.append(Edge(i, j, e.weight, e.sign))
    moved = Instance(n, tuple(edges), kind)
    assert float(enumerate_optimum(moved).best_value) == pytest.approx(float(enumerate_optimum(inst).best_value), abs=1e-9)


def test_verify_report(t3):
    r = solve(t3)
    assert verify_report(t3, r).ok
    worse = replace(r, best_int=r.best_int - 1)
    v = verify_report(t3, worse)
    assert not v.ok and v.delta == pytest.approx(1.0)
    low = replace(r, lp_root=r.best_int - 0.5)
    assert not verify_report(t3, low).ok
    bad_part = replace(r, best_partition=(M([1, 2]),))
    assert not verify_report(t3, bad_part).ok


def test_verify_correlation_exact(s3):
    r = solve(s3)
    assert verify_report(s3, r).ok
    assert not verify_report(s3, replace(r, best_int=r.best_int - 1)).ok
