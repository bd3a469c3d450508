"""Coalition and coalition-structure values.

Coalitions are int bit masks (bit ``i`` is agent ``i + 1``); a partition is a
sequence of such masks. Correlation values are returned as exact
:class:`~fractions.Fraction` half-integers; the other kinds are floats.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .instance import Instance, Kind, Sign

Value = Union[float, Fraction]
Partition = Sequence[int]


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def _check_coalition(inst: Instance, c: int) -> None:
    if c < 0 or c >> inst.n:
        raise ValueError(f"coalition mask {c:#x} has agents outside 1..{inst.n}")


def edge_sum_value(inst: Instance, c: int) -> float:
    _check_coalition(inst, c)
    total = 0.0
    for e in inst.edges:
        if (c >> e.i) & 1 and (c >> e.j) & 1:
            total += e.weight
    return total


def correlation_value2(inst: Instance, c: int) -> int:
    """Twice the correlation value: ``2 * Intra+(C) + Inter-(C)``."""
    _check_coalition(inst, c)
    intra_plus = inter_minus = 0
    for e in inst.edges:
        a, b = (c >> e.i) & 1, (c >> e.j) & 1
        if e.sign is Sign.PLUS and a and b:
            intra_plus += 1
        elif e.sign is Sign.MINUS and a != b:
            inter_minus += 1
    return 2 * intra_plus + inter_minus


def correlation_value(inst: Instance, c: int) -> Fraction:
    return Fraction(correlation_value2(inst, c), 2)


def coordination_value(inst: Instance, c: int) -> float:
    """Triple sum ``sum_ijk w_ij w_ik w_jk v_i v_j (1 - v_k)``."""
    _check_coalition(inst, c)
    w = inst.weights
    members = [i for i in range(inst.n) if (c >> i) & 1]
    outside = [k for k in range(inst.n) if not (c >> k) & 1]
    total = 0.0
    for i in members:
        for j in members:
            wij = w[i, j]
            if wij == 0.0:
                continue
            for k in outside:
                total += wij * w[i, k] * w[j, k]
    return float(total)


def coalition_value(inst: Instance, c: int) -> Value:
    if inst.kind is Kind.EDGE_SUM:
        return edge_sum_value(inst, c)
    if inst.kind is Kind.CORRELATION:
        return correlation_value(inst, c)
    return coordination_value(inst, c)


def coalition_values(inst: Instance, masks: np.ndarray) -> np.ndarray:
    """Vectorised coalition values for an int64 array of masks (float64 result).

    Correlation values are half-integers and therefore exact in float64.
    """
    masks = np.asarray(masks, dtype=np.int64)
    out = np.zeros(masks.shape, dtype=np.float64)
    if inst.kind is Kind.COORDINATION:
        # a triangle with exactly two members inside contributes 2 * w_ij w_ik w_jk
        for i, j, k, t in inst.triangles:
            inside = ((masks >> i) & 1) + ((masks >> j) & 1) + ((masks >> k) & 1)
            out += np.where(inside == 2, 2.0 * t, 0.0)
        return out
    for e in inst.edges:
        a = (masks >> e.i) & 1
        b = (masks >> e.j) & 1
        if inst.kind is Kind.EDGE_SUM:
            out += e.weight * (a & b)
        elif e.sign is Sign.PLUS:
            out += a & b
        else:
            out += 0.5 * (a ^ b)
    return out


def check_partition(n: int, classes: Partition) -> None:
    """Raise ``ValueError`` unless ``classes`` is a partition of all ``n`` agents."""
    seen = 0
    for c in classes:
        if c <= 0:
            raise ValueError("partition contains an empty class")
        if seen & c:
            raise ValueError("partition classes overlap")
        seen |= c
    if seen != (1 << n) - 1:
        raise ValueError("partition does not cover every agent")


def structure_value(inst: Instance, partition: Partition) -> Value:
    check_partition(inst.n, partition)
    if inst.kind is Kind.CORRELATION:
        return Fraction(sum(correlation_value2(inst, c) for c in partition), 2)
    return float(sum(coalition_value(inst, c) for c in partition))


def canonical_partition(partition: Partition) -> tuple[int, ...]:
    """Classes ordered by their smallest agent."""
    return tuple(sorted(partition, key=lambda m: m & -m))
