"""Graph instances: data model, Gilbert-model generators and the ``csg 1`` text format.

Agents are numbered ``1..n`` in files and in everything printed for humans.
Internally (edge tuples, bit masks, arrays) they are 0-based: agent ``i`` is
bit ``i - 1``.
"""
from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import IO, Iterable

import numpy as np


class Kind(str, enum.Enum):
    EDGE_SUM = "edge_sum"
    CORRELATION = "correlation"
    COORDINATION = "coordination"


class Sign(str, enum.Enum):
    PLUS = "+"
    MINUS = "-"
    NONE = ""


class InstanceFormatError(ValueError):
    """Raised by :func:`parse_instance`; carries the offending line number."""

    def __init__(self, reason: str, line: int | None = None):
        self.reason = reason
        self.line = line
        super().__init__(f"{reason} at line {line}" if line is not None else reason)


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    weight: float = 0.0
    sign: Sign = Sign.NONE


@dataclass(frozen=True)
class Instance:
    n: int
    edges: tuple[Edge, ...]
    kind: Kind
    name: str = ""

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "edges", tuple(self.edges))
        if self.n < 1:
            raise ValueError("an instance needs at least one agent")
        seen = set()
        for e in self.edges:
            if e.i == e.j:
                raise ValueError(f"self-loop on agent {e.i + 1}")
            if not (0 <= e.i < e.j < self.n):
                raise ValueError(f"edge ({e.i + 1}, {e.j + 1}) out of range or not ordered")
            if (e.i, e.j) in seen:
                raise ValueError(f"duplicate edge ({e.i + 1}, {e.j + 1})")
            seen.add((e.i, e.j))
            if kind is Kind.CORRELATION:
                if e.sign not in (Sign.PLUS, Sign.MINUS):
                    raise ValueError(f"correlation edge ({e.i + 1}, {e.j + 1}) has no sign")
            elif e.sign is not Sign.NONE:
                raise ValueError(f"{kind.value} edge ({e.i + 1}, {e.j + 1}) must not carry a sign")
            elif not math.isfinite(e.weight):
                raise ValueError(f"non-finite weight on edge ({e.i + 1}, {e.j + 1})")

    @property
    def full_mask(self) -> int:
        return (1 << self.n) - 1

    @cached_property
    def weights(self) -> np.ndarray:
        """Symmetric weight table with zero diagonal.

        For correlation instances this is ``w+ - w-`` (entries in {-1, 0, 1}).
        """
        w = np.zeros((self.n, self.n))
        for e in self.edges:
            if self.kind is Kind.CORRELATION:
                val = 1.0 if e.sign is Sign.PLUS else -1.0
            else:
                val = e.weight
            w[e.i, e.j] = w[e.j, e.i] = val
        w.setflags(write=False)
        return w

    @cached_property
    def plus(self) -> np.ndarray:
        """0/1 table of plus edges (correlation only)."""
        return self._sign_table(Sign.PLUS)

    @cached_property
    def minus(self) -> np.ndarray:
        """0/1 table of minus edges (correlation only)."""
        return self._sign_table(Sign.MINUS)

    def _sign_table(self, sign: Sign) -> np.ndarray:
        t = np.zeros((self.n, self.n), dtype=np.int64)
        for e in self.edges:
            if e.sign is sign:
                t[e.i, e.j] = t[e.j, e.i] = 1
        t.setflags(write=False)
        return t

    @cached_property
    def unit_weights(self) -> bool:
        return self.kind is not Kind.CORRELATION and all(e.weight == 1.0 for e in self.edges)

    @cached_property
    def triangles(self) -> tuple[tuple[int, int, int, float], ...]:
        """All 3-cliques ``(i, j, k, w_ij * w_ik * w_jk)`` with ``i < j < k``."""
        w = self.weights
        adj = [set() for _ in range(self.n)]
        for e in self.edges:
            adj[e.i].add(e.j)
            adj[e.j].add(e.i)
        out = []
        for i in range(self.n):
            for j in sorted(x for x in adj[i] if x > i):
                for k in sorted(x for x in adj[i] & adj[j] if x > j):
                    out.append((i, j, k, float(w[i, j] * w[i, k] * w[j, k])))
        return tuple(out)


@dataclass(frozen=True)
class GenSpec:
    """Parameters of one Gilbert-model draw.

    ``unit_weights`` only matters for coordination instances; ``None`` means
    unit weights for coordination and Gaussian weights otherwise.
    """

    n: int
    p: float
    sigma: float = 0.2
    mu: float = 0.0
    p_sign: float | None = None
    s: int = 0
    seed: int = 0
    unit_weights: bool | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.p_sign is not None and not 0.0 <= self.p_sign <= 1.0:
            raise ValueError("p_sign must lie in [0, 1]")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def _streams(spec: GenSpec) -> tuple[np.random.Generator, np.random.Generator]:
    # PCG64 with two spawned children: topology, then weights/signs.
    # The topology stream does not depend on the valuation kind.
    root = np.random.SeedSequence([spec.seed, spec.s])
    topo, vals = root.spawn(2)
    return np.random.Generator(np.random.PCG64(topo)), np.random.Generator(np.random.PCG64(vals))


def _box_muller(rng: np.random.Generator, count: int, mu: float, sigma: float) -> list[float]:
    out: list[float] = []
    while len(out) < count:
        u1 = 1.0 - rng.random()  # (0, 1]
        u2 = rng.random()
        r = math.sqrt(-2.0 * math.log(u1))
        out.append(mu + sigma * r * math.cos(2.0 * math.pi * u2))
        out.append(mu + sigma * r * math.sin(2.0 * math.pi * u2))
    return out[:count]


def generate_gilbert(spec: GenSpec, kind: Kind | str) -> Instance:
    """Draw a G(n, p) graph and decorate its edges for the given valuation."""
    kind = Kind(kind)
    topo, vals = _streams(spec)
    pairs = [(i, j) for i in range(spec.n) for j in range(i + 1, spec.n)]
    present = topo.random(len(pairs)) < spec.p
    chosen = [pr for pr, keep in zip(pairs, present) if keep]

    if kind is Kind.CORRELATION:
        if spec.p_sign is None:
            raise ValueError("correlation instances need p_sign")
        plus = vals.random(len(chosen)) < spec.p_sign
        edges = [Edge(i, j, 0.0, Sign.PLUS if s else Sign.MINUS) for (i, j), s in zip(chosen, plus)]
    else:
        unit = spec.unit_weights if spec.unit_weights is not None else kind is Kind.COORDINATION
        if unit:
            ws = [1.0] * len(chosen)
        else:
            ws = _box_muller(vals, len(chosen), spec.mu, spec.sigma)
        edges = [Edge(i, j, w) for (i, j), w in zip(chosen, ws)]
    return Instance(spec.n, tuple(edges), kind, instance_name(spec, kind))


def instance_name(spec: GenSpec, kind: Kind | str) -> str:
    if Kind(kind) is Kind.CORRELATION:
        return f"p{spec.p:.1f}pS{spec.p_sign:.1f}n{spec.n}s{spec.s}"
    return f"p{spec.p:.1f}n{spec.n}s{spec.s}"


# -- text format ------------------------------------------------------------

def format_instance(inst: Instance) -> str:
    lines = ["csg 1", f"n {inst.n} kind {inst.kind.value} name {inst.name}"]
    for e in inst.edges:
        if inst.kind is Kind.CORRELATION:
            lines.append(f"{e.i + 1} {e.j + 1} {e.sign.value}")
        else:
            lines.append(f"{e.i + 1} {e.j + 1} {e.weight:.17g}")
    return "\n".join(lines) + "\n"


def write_instance(inst: Instance, sink: IO[str] | str | Path) -> None:
    text = format_instance(inst)
    if isinstance(sink, (str, Path)):
        Path(sink).write_text(text, encoding="utf-8", newline="\n")
    else:
        sink.write(text)


def parse_instance(source: IO[str] | str | Path | Iterable[str]) -> Instance:
    """Read an instance from a path, an open text stream or an iterable of lines."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        text = Path(source).read_text(encoding="utf-8")
        lines: Iterable[str] = io.StringIO(text)
    elif isinstance(source, str):
        lines = io.StringIO(source)
    else:
        lines = source

    header_seen = False
    n = None
    kind = None
    name = ""
    edges: list[Edge] = []
    seen: set[tuple[int, int]] = set()
    lineno = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if not header_seen:
            if stripped.split() != ["csg", "1"]:
                raise InstanceFormatError("expected header 'csg 1'", lineno)
            header_seen = True
            continue
        if n is None:
            parts = stripped.split(maxsplit=5)
            if len(parts) < 4 or parts[0] != "n" or parts[2] != "kind":
                raise InstanceFormatError("expected 'n <n> kind <kind> name <name>'", lineno)
            try:
                n = int(parts[1])
            except ValueError:
                raise InstanceFormatError(f"bad agent count {parts[1]!r}", lineno) from None
            if n < 1:
                raise InstanceFormatError("agent count must be >= 1", lineno)
            try:
                kind = Kind(parts[3])
            except ValueError:
                raise InstanceFormatError(f"unknown kind {parts[3]!r}", lineno) from None
            if len(parts) >= 5:
                if parts[4] != "name":
                    raise InstanceFormatError("expected 'name' field", lineno)
                name = parts[5] if len(parts) == 6 else ""
            continue

        parts = stripped.split()
        if len(parts) < 2:
            raise InstanceFormatError("edge line needs two agents", lineno)
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise InstanceFormatError("bad agent index", lineno) from None
        if i == j:
            raise InstanceFormatError("self-loop", lineno)
        if not (1 <= i <= n and 1 <= j <= n):
            raise InstanceFormatError(f"agent index out of range 1..{n}", lineno)
        a, b = min(i, j) - 1, max(i, j) - 1
        if (a, b) in seen:
            raise InstanceFormatError("duplicate edge", lineno)
        seen.add((a, b))
        if kind is Kind.CORRELATION:
            if len(parts) != 3 or parts[2] not in ("+", "-"):
                raise InstanceFormatError("correlation edge needs a '+' or '-' sign", lineno)
            edges.append(Edge(a, b, 0.0, Sign(parts[2])))
        else:
            if len(parts) != 3:
                raise InstanceFormatError("weighted edge needs a weight", lineno)
            try:
                w = float(parts[2])
            except ValueError:
                raise InstanceFormatError(f"bad weight {parts[2]!r}", lineno) from None
            if not math.isfinite(w):
                raise InstanceFormatError("non-finite weight", lineno)
            edges.append(Edge(a, b, w))

    if not header_seen:
        raise InstanceFormatError("empty input", lineno or None)
    if n is None:
        raise InstanceFormatError("missing 'n ... kind ...' line", lineno)
    return Instance(n, tuple(edges), kind, name)


def mask_to_agents(mask: int) -> list[int]:
    """1-based agent list of a coalition bit mask."""
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i + 1)
        mask >>= 1
        i += 1
    return out


def agents_to_mask(agents: Iterable[int]) -> int:
    """Bit mask of a collection of 1-based agents."""
    m = 0
    for a in agents:
        if a < 1:
            raise ValueError(f"agent {a} out of range")
        m |= 1 << (a - 1)
    return m
