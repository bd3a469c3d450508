"""Exhaustive ground truth: score every set partition of the agents.

Partitions are enumerated as restricted growth strings ``a_1 .. a_n`` with
``a_1 = 0`` and ``a_k <= 1 + max(a_1 .. a_{k-1})``, in lexicographic order.
The strings are expanded position by position as numpy arrays, a block of
prefixes at a time, and scored from a table of all ``2^n`` coalition values.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .instance import Instance, Kind
from .valuation import Value, canonical_partition, coalition_values, structure_value

ORACLE_LIMIT = 14
_CHUNK_DEPTH = 10  # suffix length expanded in one numpy block


@dataclass
class OracleResult:
    best_value: Value
    best_partition: tuple[int, ...]
    partitions_scanned: int


def _expand(prefix: np.ndarray, prefix_max: np.ndarray, steps: int):
    """Extend every growth-string prefix by ``steps`` symbols (lexicographic order kept)."""
    strings, top = prefix, prefix_max
    for _ in range(steps):
        reps = top + 2  # symbols 0..top+1
        rows = np.repeat(np.arange(len(strings)), reps)
        offsets = np.arange(rows.size) - np.repeat(np.cumsum(reps) - reps, reps)
        sym = offsets.astype(np.int8)
        strings = np.hstack([strings[rows], sym[:, None]])
        top = np.maximum(top[rows], sym)
    return strings, top


def _prefixes(n: int, length: int):
    """Growth-string prefixes of the given length, lexicographic."""
    out = []

    def rec(cur, top):
        if len(cur) == length:
            out.append(list(cur))
            return
        for s in range(top + 2):
            cur.append(s)
            rec(cur, max(top, s))
            cur.pop()

    rec([0], 0)
    return out


def _block_masks(strings: np.ndarray) -> np.ndarray:
    """(rows, n) array: bit mask of every block index per string."""
    rows, n = strings.shape
    masks = np.zeros((rows, n), dtype=np.int64)
    for k in range(n):
        masks[np.arange(rows), strings[:, k]] |= np.int64(1) << k
    return masks


def growth_strings(n: int):
    """Yield all restricted growth strings of length ``n`` as int8 arrays, in blocks."""
    if n == 0:
        yield np.zeros((1, 0), dtype=np.int8)
        return
    head = max(1, n - _CHUNK_DEPTH)
    for pre in _prefixes(n, head):
        strings, _ = _expand(np.array([pre], dtype=np.int8), np.array([max(pre)]), n - head)
        yield strings


def enumerate_optimum(inst: Instance) -> OracleResult:
    n = inst.n
    if n > ORACLE_LIMIT:
        raise ValueError(f"oracle limited to n <= {ORACLE_LIMIT}")
    table = coalition_values(inst, np.arange(1 << n, dtype=np.int64))
    table[0] = 0.0

    best_score = -np.inf
    best_string = None
    scanned = 0
    for strings in growth_strings(n):
        masks = _block_masks(strings)
        scores = table[masks].sum(axis=1)
        scanned += len(strings)
        i = int(np.argmax(scores))
        if scores[i] > best_score:
            best_score, best_string = scores[i], strings[i]

    blocks: dict[int, int] = {}
    for k, b in enumerate(best_string):
        blocks[int(b)] = blocks.get(int(b), 0) | (1 << k)
    partition = canonical_partition(list(blocks.values()))
    return OracleResult(structure_value(inst, partition), partition, scanned)


@dataclass
class Verification:
    ok: bool
    findings: list[str] = field(default_factory=list)
    delta: float = 0.0


def verify_report(inst: Instance, report, oracle: OracleResult | None = None) -> Verification:
    """Compare a solve report with the exhaustive optimum."""
    oracle = oracle or enumerate_optimum(inst)
    findings = []
    best = report.best_int
    delta = float(oracle.best_value) - float(best)
    if inst.kind is Kind.CORRELATION:
        if Fraction(best) != Fraction(oracle.best_value):
            findings.append(f"best_int {best} != optimum {oracle.best_value} (delta {delta:+g})")
    elif abs(delta) > 1e-6:
        findings.append(f"best_int {best} != optimum {oracle.best_value} (delta {delta:+g})")
    if report.lp_root < float(oracle.best_value) - 1e-6:
        findings.append(f"lp_root {report.lp_root} below optimum {oracle.best_value}")
    if report.lp_root < float(best) - 1e-6:
        findings.append(f"lp_root {report.lp_root} below best_int {best}")
    try:
        value = structure_value(inst, report.best_partition)
        if abs(float(value) - float(best)) > 1e-9:
            findings.append(f"best_partition scores {value}, report says {best}")
    except ValueError as exc:
        findings.append(f"best_partition invalid: {exc}")
    return Verification(not findings, findings, delta)
