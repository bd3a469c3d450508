"""``csg`` command line: generate instances, solve them, export pricing models, run benchmarks.

Exit codes: 0 success (proven optimum), 2 bad flags, 3 IO or format error,
4 run stopped by a node or time limit, 5 oracle mismatch under ``--verify``.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .bnb import SolveConfig, SolveReport, solve
from .instance import GenSpec, InstanceFormatError, Kind, generate_gilbert, mask_to_agents, parse_instance, write_instance
from .linearize import export_lp, linearize, reduce_coordination
from .oracle import ORACLE_LIMIT, verify_report
from .pricing import PricingProblem

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_LIMIT, EXIT_MISMATCH = 0, 2, 3, 4, 5

CSV_FIELDS = ["name", "lp", "ilp", "t_total", "t_root", "t_node", "nodes", "vars", "int_sols", "gap"]
TIMING_FIELDS = ("t_total", "t_root", "t_node")


class UsageError(Exception):
    pass


@dataclass
class RunRecord:
    """One row of the results table; mirrors a ``SolveReport``."""

    name: str
    kind: str
    n: int
    lp: float | None
    ilp: float
    t_total: float
    t_root: float
    t_node: float
    nodes: int
    vars: int
    int_sols: int
    gap: str
    proven: bool
    partition: list[list[int]]
    verified: bool | None = None

    @classmethod
    def from_report(cls, r: SolveReport) -> "RunRecord":
        return cls(
            name=r.name,
            kind=r.kind.value,
            n=r.n,
            lp=r.lp_root if math.isfinite(r.lp_root) else None,
            ilp=float(r.best_int),
            t_total=round(r.time_total, 3),
            t_root=round(r.time_root, 3),
            t_node=round(r.time_per_node, 3),
            nodes=r.nodes,
            vars=r.columns_total,
            int_sols=r.int_solutions,
            gap=format_gap(r.gap),
            proven=r.proven,
            partition=[mask_to_agents(c) for c in r.best_partition],
        )

    def to_json(self, timing: bool = True) -> str:
        d = asdict(self)
        if not timing:
            for k in TIMING_FIELDS:
                d.pop(k)
        return json.dumps(d, sort_keys=True)


def format_gap(gap: float) -> str:
    return "inf%" if not math.isfinite(gap) else f"{100 * gap:.2f}%"


def default_seed() -> int:
    raw = os.environ.get("CSG_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"CSG_SEED must be an integer, got {raw!r}") from None


# -- commands ---------------------------------------------------------------

def cmd_generate(args) -> int:
    kind = Kind(args.kind)
    if kind is Kind.CORRELATION and args.p_sign is None:
        raise UsageError("--kind correlation requires --p-sign")
    if args.count < 1:
        raise UsageError("--count must be positive")
    seed = args.seed if args.seed is not None else default_seed()
    unit = None if args.weights == "auto" else args.weights == "unit"
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for s in range(args.count):
            try:
                spec = GenSpec(args.n, args.p, sigma=args.sigma, p_sign=args.p_sign, s=s, seed=seed,
                               unit_weights=unit)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            inst = generate_gilbert(spec, kind)
            path = out / f"{inst.name}.csg"
            write_instance(inst, path)
            print(f"{inst.name}\t{len(inst.edges)}\t{path}")
    except OSError as exc:
        print(f"csg: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _config(args) -> SolveConfig:
    if args.paper_mode:
        return SolveConfig.paper_mode(time_limit=args.time_limit)
    if args.node_limit is not None:
        if args.node_limit < 1:
            raise UsageError("--node-limit must be positive")
        return SolveConfig(node_limit=args.node_limit, time_limit=args.time_limit)
    return SolveConfig(time_limit=args.time_limit)


def _run_one(path: str, cfg: SolveConfig, verify: bool):
    """Solve one file; returns ``(record, exit code, message)``."""
    try:
        inst = parse_instance(Path(path))
    except (OSError, InstanceFormatError) as exc:
        return None, EXIT_IO, f"{path}: {exc}"
    report = solve(inst, cfg)
    rec = RunRecord.from_report(report)
    code = EXIT_OK if report.proven else EXIT_LIMIT
    msg = ""
    if verify:
        if inst.n > ORACLE_LIMIT:
            msg = f"{rec.name}: n={inst.n} too large for the oracle, not verified"
        else:
            v = verify_report(inst, report)
            # A limit-stopped run may legitimately miss the optimum.
            rec.verified = v.ok or not report.proven
            if not rec.verified:
                code = EXIT_MISMATCH
                msg = f"{rec.name}: " + "; ".join(v.findings)
    return rec, code, msg


def _print_table(records: list[RunRecord], mean: dict | None = None) -> None:
    head = f"{'name':<18}{'LP':>12}{'ILP':>12}{'total':>8}{'root':>8}{'node':>8}{'nodes':>7}{'vars':>7}{'int':>5}{'gap':>9}"
    print(head)
    for r in records:
        lp = "-" if r.lp is None else f"{r.lp:.4f}"
        print(f"{r.name:<18}{lp:>12}{r.ilp:>12.4f}{round(r.t_total):>8d}{round(r.t_root):>8d}"
              f"{round(r.t_node):>8d}{r.nodes:>7d}{r.vars:>7d}{r.int_sols:>5d}{r.gap:>9}")
    if mean:
        print(f"{'mean':<18}{mean['lp']:>12.4f}{mean['ilp']:>12.4f}{mean['t_total']:>8.1f}{mean['t_root']:>8.1f}"
              f"{mean['t_node']:>8.1f}{mean['nodes']:>7.1f}{mean['vars']:>7.1f}{mean['int_sols']:>5.1f}"
              f"{mean['gap']:>9}")


def _csv_row(r: RunRecord) -> list:
    return [r.name, "" if r.lp is None else repr(r.lp), repr(r.ilp), f"{r.t_total:.3f}", f"{r.t_root:.3f}",
            f"{r.t_node:.3f}", r.nodes, r.vars, r.int_sols, r.gap]


def cmd_solve(args) -> int:
    rec, code, msg = _run_one(args.path, _config(args), args.verify)
    if msg:
        print(f"csg: {msg}", file=sys.stderr)
    if rec is None:
        return code
    if args.json:
        print(rec.to_json())
    elif args.csv:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        w.writerow(_csv_row(rec))
    else:
        _print_table([rec])
        print("partition: " + " ".join("{" + ",".join(map(str, c)) + "}" for c in rec.partition))
    return code


def _read_duals(path: str, n: int) -> np.ndarray:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read duals: {exc}") from exc
    try:
        vals = [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError("duals file must contain numbers only") from None
    if len(vals) != n:
        raise UsageError(f"duals file has {len(vals)} values, instance has {n} agents")
    if not all(math.isfinite(v) for v in vals):
        raise UsageError("duals must be finite")
    return np.array(vals)


def cmd_export_lp(args) -> int:
    try:
        inst = parse_instance(Path(args.path))
        duals = np.zeros(inst.n) if args.root else _read_duals(args.duals, inst.n)
        p = PricingProblem(inst, inst.full_mask, duals)
        if args.second_stage:
            if inst.kind is not Kind.COORDINATION:
                raise UsageError("--second-stage only applies to coordination instances")
            model = reduce_coordination(p, second_stage=True)
        else:
            model = linearize(p)
        export_lp(model, args.out)
    except (OSError, InstanceFormatError) as exc:
        print(f"csg: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"{args.out}\t{len(model.binaries)} binaries\t{len(model.continuous)} continuous\t{len(model.rows)} rows"
          + ("\tquadratic" if model.is_quadratic else ""))
    return EXIT_OK


def bench_mean(records: list[RunRecord]) -> dict | None:
    if not records:
        return None
    num = ["lp", "ilp", "t_total", "t_root", "t_node", "nodes", "vars", "int_sols"]
    mean = {k: float(np.mean([getattr(r, k) for r in records if getattr(r, k) is not None] or [math.nan]))
            for k in num}
    gaps = [float(r.gap[:-1]) for r in records if r.gap != "inf%"]
    mean["gap"] = f"{np.mean(gaps):.2f}%" if gaps else "inf%"
    return mean


def cmd_bench(args) -> int:
    root = Path(args.dir)
    if not root.is_dir():
        print(f"csg: {root} is not a directory", file=sys.stderr)
        return EXIT_IO
    files = sorted(str(p) for p in root.glob("*.csg"))
    cfg = _config(args)
    if args.workers > 1 and len(files) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_run_one, files, [cfg] * len(files), [args.verify] * len(files)))
    else:
        results = [_run_one(f, cfg, args.verify) for f in files]

    records, codes = [], []
    for rec, code, msg in results:
        if msg:
            print(f"csg: {msg}", file=sys.stderr)
        codes.append(code)
        if rec is not None:
            records.append(rec)
    records.sort(key=lambda r: r.name)
    mean = bench_mean(records)

    if args.json:
        print(json.dumps({"rows": [json.loads(r.to_json()) for r in records], "mean": mean,
                          "failures": sum(c == EXIT_IO for c in codes)}, sort_keys=True))
    elif args.csv:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in records:
            w.writerow(_csv_row(r))
        if mean:
            w.writerow(["mean"] + [f"{mean[k]:.6g}" for k in CSV_FIELDS[1:-1]] + [mean["gap"]])
    else:
        _print_table(records, mean)

    for code in (EXIT_MISMATCH, EXIT_IO, EXIT_LIMIT):
        if code in codes:
            return code
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def _mode_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--paper-mode", action="store_true", help="stop after 40 branch-and-bound nodes")
    g.add_argument("--node-limit", type=int, metavar="N")
    g.add_argument("--exact", action="store_true", help="solve to proven optimality (default)")
    p.add_argument("--time-limit", type=float, metavar="SEC", help="CPU-time budget")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true")
    fmt.add_argument("--csv", action="store_true")
    p.add_argument("--verify", action="store_true", help=f"check against exhaustive search (n <= {ORACLE_LIMIT})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csg", description="Branch and price for coalition structure generation")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write random Gilbert-model instances")
    g.add_argument("--kind", required=True, choices=[k.value for k in Kind])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--p", type=float, required=True)
    g.add_argument("--p-sign", type=float)
    g.add_argument("--sigma", type=float, default=0.2)
    g.add_argument("--weights", choices=["auto", "unit", "gaussian"], default="auto",
                   help="auto: unit for coordination, Gaussian otherwise")
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--seed", type=int, help="default: $CSG_SEED or 0")
    g.add_argument("--out-dir", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve one instance file")
    s.add_argument("path")
    _mode_flags(s)
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("export-lp", help="write the linearized root pricing model")
    e.add_argument("path")
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--root", action="store_true", help="zero duals, no forbidden rows")
    src.add_argument("--duals", metavar="FILE", help="one dual price per agent")
    e.add_argument("--second-stage", action="store_true", help="coordination only: fully linear variant")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_export_lp)

    b = sub.add_parser("bench", help="solve every .csg file in a directory")
    b.add_argument("dir")
    b.add_argument("--workers", type=int, default=1)
    _mode_flags(b)
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"csg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
