"""Dense two-phase simplex for the tiny LPs the geometry layer generates.

The geometry operations solve thousands of problems of the form

    max c.x  subject to  A x <= b,  x free,

with at most a dozen variables and a few dozen rows. Generic solver
front-ends spend more time building the model than solving it, so we solve
the dual (min b.y s.t. A'y = c, y >= 0), whose tableau has only `dim` rows,
and read the primal answer off the simplex multipliers.

Every answer is certified before it is returned: optimal points are checked
for primal feasibility and duality gap, infeasibility comes with a Farkas
certificate. Anything that cannot be certified (or cycles past the pivot
cap) raises SimplexFallback so the caller can retry with scipy/HiGHS.
"""

from __future__ import annotations

import numpy as np

_EPS_COST = 1e-9
_EPS_PIVOT = 1e-10
_CERT_TOL = 1e-7


class SimplexFallback(Exception):
    """Numerical trouble; re-solve with the robust backend."""


def maximize(c, A, b, _aux=False):
    """max c.x over {A x <= b}; returns (status, x, value).

    status is "optimal", "infeasible" or "unbounded"; x is only set for
    "optimal".
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, d = A.shape
    if m == 0:
        raise SimplexFallback("no rows; caller should special-case the universe")
    status, y, value, x = _solve_dual(b, A.T, c)
    if status == "optimal":
        # certify: primal feasibility and duality gap
        scale = 1.0 + max(np.max(np.abs(b)), np.max(np.abs(value)))
        if np.max(A @ x - b) > _CERT_TOL * scale or abs(c @ x - value) > _CERT_TOL * scale:
            raise SimplexFallback("optimality certificate failed")
        return "optimal", x, value
    if status == "dual_unbounded":
        # dual objective -> -inf along a ray y + t*dir certifies primal infeasibility
        ray = y
        scale = 1.0 + np.max(np.abs(ray))
        if np.min(ray) < -_CERT_TOL * scale or np.max(np.abs(A.T @ ray)) > _CERT_TOL * scale \
                or b @ ray > -_EPS_COST:
            raise SimplexFallback("infeasibility certificate failed")
        return "infeasible", None, -np.inf
    # Dual infeasible: the primal is unbounded or infeasible. Decide with a
    # feasibility probe: max -s over {A x - s 1 <= b, s >= 0}, which is
    # always feasible and bounded; its optimum is minus the smallest
    # constraint violation achievable.
    if _aux:
        raise SimplexFallback("nested auxiliary probe")
    A_aux = np.hstack([np.vstack([A, np.zeros((1, d))]),
                       -np.ones((m + 1, 1))])
    b_aux = np.concatenate([b, [0.0]])
    c_aux = np.zeros(d + 1)
    c_aux[-1] = -1.0
    aux_status, _, aux_value = maximize(c_aux, A_aux, b_aux, _aux=True)
    if aux_status != "optimal":
        raise SimplexFallback("feasibility probe failed")
    if -aux_value <= _CERT_TOL * (1.0 + np.max(np.abs(b))):
        return "unbounded", None, np.inf
    return "infeasible", None, -np.inf


def _solve_dual(f, M, g):
    """min f.y s.t. M y = g, y >= 0 by full-tableau two-phase simplex.

    Returns (status, y_or_ray, value, multipliers). status "optimal" carries
    the multipliers pi (the primal solution of the caller); "dual_unbounded"
    carries an improving ray in y-space; "dual_infeasible" means phase 1
    could not zero the artificials.
    """
    M = np.asarray(M, dtype=float)
    g = np.asarray(g, dtype=float)
    f = np.asarray(f, dtype=float)
    r, n = M.shape
    sign = np.where(g < 0, -1.0, 1.0)
    Ms = M * sign[:, None]
    gs = g * sign

    # columns: y (n) | artificials (r) | rhs
    T = np.zeros((r + 2, n + r + 1))
    T[:r, :n] = Ms
    T[:r, n:n + r] = np.eye(r)
    T[:r, -1] = gs
    T[r, :n] = f                      # phase-2 costs (artificials cost 0)
    T[r + 1, :n] = -Ms.sum(axis=0)    # phase-1 reduced costs
    T[r + 1, -1] = -gs.sum()
    basis = list(range(n, n + r))
    cap = 200 * (n + r + 1)
    pivots = 0

    pivots = _phase(T, basis, r, n + r, r + 1, forbid_from=None, pivots=pivots, cap=cap)
    scale = 1.0 + np.max(np.abs(gs)) if r else 1.0
    if -T[r + 1, -1] > _EPS_COST * scale:
        return "dual_infeasible", None, None, None

    # Drive any basic artificial (level ~0 after phase 1) out of the basis,
    # otherwise phase 2 could push it positive again. A row with no usable
    # y-column is a redundant equality and can stay as is.
    for i in range(r):
        if basis[i] >= n:
            row = np.abs(T[i, :n])
            col = int(np.argmax(row))
            if row[col] > _EPS_PIVOT:
                _pivot(T, i, col)
                basis[i] = col

    result = _phase(T, basis, r, n, r, forbid_from=n, pivots=pivots, cap=cap)
    if isinstance(result, tuple):  # unbounded column found
        _, col = result
        ray = np.zeros(n)
        ray[col] = 1.0
        for i, bi in enumerate(basis):
            if bi < n:
                ray[bi] = -T[i, col]
        return "dual_unbounded", ray, None, None

    y = np.zeros(n)
    for i, bi in enumerate(basis):
        if bi < n:
            y[bi] = T[i, -1]
    value = -T[r, -1]
    pi = -sign * T[r, n:n + r]
    return "optimal", y, value, pi


def _phase(T, basis, r, n_cols, cost_row, forbid_from, pivots, cap):
    """Pivot until the cost row is reduced-optimal.

    Columns at or beyond forbid_from may not enter (artificials in phase 2).
    Returns the pivot count, or ("unbounded", col) when an entering column
    has no positive ratio. Dantzig pricing with a switch to Bland's rule
    guards against cycling; the hard cap raises SimplexFallback.
    """
    bland_after = cap // 4
    while True:
        limit = n_cols if forbid_from is None else min(n_cols, forbid_from)
        costs = T[cost_row, :limit]
        if pivots < bland_after:
            col = int(np.argmin(costs))
            if costs[col] >= -_EPS_COST:
                return pivots
        else:
            neg = np.where(costs < -_EPS_COST)[0]
            if neg.size == 0:
                return pivots
            col = int(neg[0])
        column = T[:r, col]
        pos = np.where(column > _EPS_PIVOT)[0]
        if pos.size == 0:
            if cost_row == r:
                return ("unbounded", col)
            raise SimplexFallback("phase-1 cost unbounded; numerical trouble")
        ratios = T[pos, -1] / column[pos]
        best = np.min(ratios)
        ties = pos[ratios <= best + _EPS_PIVOT]
        row = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, row, col)
        basis[row] = col
        pivots += 1
        if pivots > cap:
            raise SimplexFallback("pivot cap exceeded")


def _pivot(T, row, col):
    T[row] /= T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row])
