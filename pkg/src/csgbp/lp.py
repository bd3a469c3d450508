"""Dense two-phase primal simplex for ``max c.x  s.t.  A x = b, x >= 0`` (``b >= 0``).

Sized for restricted master problems: a few dozen rows, up to a few thousand
columns. The basis inverse is refactored from scratch every iteration, which
costs little at this row count and keeps long degenerate runs stable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LPError(RuntimeError):
    pass


class InfeasibleError(LPError):
    pass


class IterationLimitError(LPError):
    pass


@dataclass
class LPResult:
    x: np.ndarray
    duals: np.ndarray  # y with A^T y >= c at optimality (maximisation form)
    objective: float
    basis: list[int]
    iterations: int


def _basis_inverse(A: np.ndarray, basis: list[int], check_cond: bool = False) -> np.ndarray | None:
    B = A[:, basis]
    try:
        Binv = np.linalg.inv(B)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(Binv)) or (check_cond and np.linalg.cond(B) > 1e12):
        return None
    return Binv


def _phase(c, A, b, basis, *, tol, max_iter, bland_after):
    """Primal simplex from a feasible basis; returns (basis, Binv, iterations)."""
    m, ncols = A.shape
    basis = list(basis)
    degenerate = 0
    bland = False
    for it in range(max_iter):
        Binv = _basis_inverse(A, basis)
        if Binv is None:
            raise LPError("basis became singular")
        xB = Binv @ b
        y = Binv.T @ c[basis]
        d = c - A.T @ y
        d[basis] = 0.0
        cand = np.flatnonzero(d > tol)
        if cand.size == 0:
            return basis, Binv, it
        if bland:
            j = int(cand[0])
        else:
            j = int(cand[np.argmax(d[cand])])
        col = Binv @ A[:, j]
        rows = np.flatnonzero(col > 1e-9)
        if rows.size == 0:
            raise LPError("problem is unbounded")
        ratios = np.maximum(xB[rows], 0.0) / col[rows]
        theta = ratios.min()
        ties = rows[ratios <= theta + 1e-12]
        if bland:
            r = int(min(ties, key=lambda k: basis[k]))
        else:
            r = int(ties[np.argmax(col[ties])])
        if theta <= tol:
            degenerate += 1
            if degenerate >= bland_after:
                bland = True
        else:
            degenerate = 0
            bland = False
        basis[r] = j
    raise IterationLimitError(f"simplex did not converge in {max_iter} iterations")


def simplex_max(
    c,
    A,
    b,
    basis: list[int] | None = None,
    *,
    tol: float = 1e-9,
    max_iter: int | None = None,
    bland_after: int = 50,
) -> LPResult:
    """Solve ``max c.x, A x = b, x >= 0``.

    ``basis`` is an optional warm start (one column index per row). It is used
    when it is nonsingular and primal feasible; otherwise phase 1 runs with
    one artificial variable per row.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, ncols = A.shape
    if np.any(b < 0):
        raise ValueError("right-hand side must be non-negative")
    if max_iter is None:
        max_iter = 50 * (m + ncols) + 1000
    total_iter = 0

    start = None
    if basis is not None and len(basis) == m and len(set(basis)) == m:
        Binv = _basis_inverse(A, list(basis), check_cond=True)
        if Binv is not None and np.all(Binv @ b >= -1e-9):
            start = list(basis)

    if start is None:
        # phase 1: maximise -sum(artificials)
        A1 = np.hstack([A, np.eye(m)])
        c1 = np.concatenate([np.zeros(ncols), -np.ones(m)])
        art = list(range(ncols, ncols + m))
        basis1, Binv, it = _phase(c1, A1, b, art, tol=tol, max_iter=max_iter, bland_after=bland_after)
        total_iter += it
        xB = Binv @ b
        infeas = sum(xB[r] for r, j in enumerate(basis1) if j >= ncols)
        if infeas > 1e-7:
            raise InfeasibleError(f"master problem infeasible (phase-1 residual {infeas:.3g})")
        # pivot remaining zero-level artificials out of the basis
        for r in range(m):
            if basis1[r] < ncols:
                continue
            row = Binv[r] @ A
            row[[j for j in basis1 if j < ncols]] = 0.0
            nz = np.flatnonzero(np.abs(row) > 1e-9)
            if nz.size == 0:
                raise LPError(f"redundant equality row {r}")
            basis1[r] = int(nz[0])
            Binv = _basis_inverse(A1, basis1)
        start = basis1

    basis, Binv, it = _phase(c, A, b, start, tol=tol, max_iter=max_iter, bland_after=bland_after)
    total_iter += it
    x = np.zeros(ncols)
    x[basis] = np.maximum(Binv @ b, 0.0)
    y = Binv.T @ c[basis]
    return LPResult(x=x, duals=y, objective=float(c @ x), basis=basis, iterations=total_iter)
