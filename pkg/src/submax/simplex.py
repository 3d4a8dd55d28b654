"""Small dense linear-program solver for equality-constrained problems.

Solves max/min of c.x subject to A x = b, x >= 0 with a two-phase tableau
method using Bland's rule throughout (smallest eligible index enters; among
minimum-ratio rows the one whose basic variable has the smallest index
leaves), which rules out cycling and makes the returned basic solution
deterministic.  Problem sizes here are tiny (tens of rows, at most a few
thousand columns), so no scaling or sparsity tricks are attempted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class SimplexResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: Optional[np.ndarray]
    value: Optional[float]


def _pivot(T: np.ndarray, basis, row: int, col: int):
    T[row] /= T[row, col]
    for r in range(len(T)):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col


def _run_phase(T: np.ndarray, basis, cost: np.ndarray, tol: float,
               max_iter: int) -> str:
    """Bland-rule simplex minimizing cost.x on the tableau; mutates T, basis."""
    m, width = T.shape
    ncols = width - 1
    for _ in range(max_iter):
        reduced = cost[:ncols] - cost[basis] @ T[:, :ncols]
        entering = -1
        for j in range(ncols):
            if reduced[j] < -tol:
                entering = j
                break
        if entering < 0:
            return "optimal"
        col = T[:, entering]
        rows = np.nonzero(col > tol)[0]
        if len(rows) == 0:
            return "unbounded"
        ratios = T[rows, ncols] / col[rows]
        best = ratios.min()
        candidates = rows[ratios <= best + tol]
        leave = min(candidates, key=lambda r: basis[r])
        _pivot(T, basis, int(leave), entering)
    raise RuntimeError("simplex iteration limit reached")


def solve_equality_lp(c, A, b, *, maximize: bool = True, tol: float = 1e-9,
                      max_iter: Optional[int] = None) -> SimplexResult:
    """Optimize c.x over {A x = b, x >= 0}; returns a basic optimal solution."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    if len(b) != m or len(c) != n:
        raise ValueError("inconsistent LP dimensions")
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0
    total = n + m
    T = np.zeros((m, total + 1))
    T[:, :n] = A
    T[:, n:total] = np.eye(m)
    T[:, total] = b
    basis = list(range(n, total))
    if max_iter is None:
        max_iter = 200 * (total + m) + 2000

    phase1 = np.zeros(total)
    phase1[n:] = 1.0
    _run_phase(T, basis, phase1, tol, max_iter)  # bounded below by 0
    if float(phase1[basis] @ T[:, total]) > 1e-7:
        return SimplexResult("infeasible", None, None)

    # Drive remaining artificial variables out; all-zero rows are redundant.
    keep = []
    for r in range(m):
        if basis[r] >= n:
            piv = -1
            for j in range(n):
                if abs(T[r, j]) > tol:
                    piv = j
                    break
            if piv < 0:
                continue
            _pivot(T, basis, r, piv)
        keep.append(r)
    if len(keep) < m:
        T = T[keep]
        basis = [basis[r] for r in keep]
    T = np.hstack([T[:, :n], T[:, total:total + 1]])

    cost = -c if maximize else c.copy()
    status = _run_phase(T, basis, cost, tol, max_iter)
    if status == "unbounded":
        return SimplexResult("unbounded", None, None)
    x = np.zeros(n)
    for r, bv in enumerate(basis):
        x[bv] = T[r, -1]
    return SimplexResult("optimal", x, float(c @ x))
