"""Dense tableau simplex with Bland's rule for small LPs.

Solves ``max c @ x  s.t.  A @ x <= b, x >= 0`` with ``b >= 0``, so the slack
basis is feasible from the start and no phase one is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LPError(RuntimeError):
    pass


@dataclass
class LPResult:
    x: np.ndarray
    value: float
    duals: np.ndarray
    iterations: int


def maximize(c, A, b, tol: float = 1e-11, max_iter: int = 20000) -> LPResult:
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
        raise LPError("non-finite problem data")
    if np.any(b < 0):
        raise LPError("right-hand side must be nonnegative")
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -c
    basis = list(range(n, n + m))
    scale = max(1.0, float(np.abs(c).max(initial=0.0)))
    for it in range(max_iter):
        reduced = T[m, :-1]
        candidates = np.flatnonzero(reduced < -tol * scale)
        if len(candidates) == 0:
            x = np.zeros(n + m)
            x[basis] = T[:m, -1]
            return LPResult(x[:n], float(T[m, -1]), T[m, n : n + m].copy(), it)
        col = int(candidates[0])
        column = T[:m, col]
        rows = np.flatnonzero(column > tol)
        if len(rows) == 0:
            raise LPError("problem is unbounded")
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        T[row] /= T[row, col]
        for r in range(m + 1):
            if r != row and T[r, col] != 0.0:
                T[r] -= T[r, col] * T[row]
        basis[row] = col
    raise LPError(f"no convergence after {max_iter} pivots")
