"""Dense two-phase tableau simplex for small linear programs.

Solves

    minimize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                x >= 0

with Bland's rule, so degenerate problems (common here: the zero vector is
often feasible) cannot cycle.  Intended for a few dozen variables at most.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOL = 1e-10


@dataclass
class LPResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    x: np.ndarray | None
    fun: float | None
    iterations: int


def _pivot(T: np.ndarray, row: int, col: int):
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]


def _simplex(T: np.ndarray, basis: list[int], n_cols: int, max_iter: int) -> tuple[str, int]:
    """Minimise the objective stored in the last row of ``T`` (reduced costs).

    Only the first ``n_cols`` columns may enter the basis.
    """
    m = T.shape[0] - 1
    for it in range(max_iter):
        obj = T[-1, :n_cols]
        entering = next((j for j in range(n_cols) if obj[j] < -TOL), None)
        if entering is None:
            return "optimal", it
        col = T[:m, entering]
        rhs = T[:m, -1]
        best = None
        for r in range(m):
            if col[r] > TOL:
                ratio = rhs[r] / col[r]
                if (best is None or ratio < best[0] - TOL
                        or (abs(ratio - best[0]) <= TOL and basis[r] < basis[best[1]])):
                    best = (ratio, r)
        if best is None:
            return "unbounded", it
        _pivot(T, best[1], entering)
        basis[best[1]] = entering
    raise RuntimeError("simplex iteration limit reached")


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, max_iter: int = 10_000) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    m_ub, m_eq = len(b_ub), len(b_eq)
    m = m_ub + m_eq

    # standard form: [A_ub I; A_eq 0] [x; s] = b, then flip rows with b < 0
    n_std = n + m_ub
    A = np.zeros((m, n_std))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # phase 1 with one artificial per row
    T = np.zeros((m + 1, n_std + m + 1))
    T[:m, :n_std] = A
    T[:m, n_std:n_std + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n_std] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n_std, n_std + m))
    _, it1 = _simplex(T, basis, n_std, max_iter)
    if -T[-1, -1] > 1e-9 * max(1.0, np.abs(b).max(initial=0.0)):
        return LPResult("infeasible", None, None, it1)

    # drive remaining artificials out of the basis; drop redundant rows
    keep = []
    for r in range(m):
        if basis[r] >= n_std:
            cand = [j for j in range(n_std) if abs(T[r, j]) > TOL]
            if not cand:
                continue
            _pivot(T, r, cand[0])
            basis[r] = cand[0]
        keep.append(r)
    T2 = np.zeros((len(keep) + 1, n_std + 1))
    T2[:-1, :n_std] = T[keep, :n_std]
    T2[:-1, -1] = T[keep, -1]
    basis = [basis[r] for r in keep]

    cost = np.zeros(n_std)
    cost[:n] = c
    T2[-1, :n_std] = cost
    for r, j in enumerate(basis):
        if cost[j] != 0.0:
            T2[-1] -= cost[j] * T2[r]
    status, it2 = _simplex(T2, basis, n_std, max_iter)
    if status == "unbounded":
        return LPResult("unbounded", None, None, it1 + it2)
    x = np.zeros(n_std)
    for r, j in enumerate(basis):
        x[j] = T2[r, -1]
    x = x[:n]
    return LPResult("optimal", x, float(c @ x), it1 + it2)
