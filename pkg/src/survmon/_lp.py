"""LP backend for the geometry layer.

Problems are the tiny dense kind (max c.x over A x <= b with free x, at
most a dozen variables). A small certified simplex handles the bulk; any
answer it cannot certify is re-solved with scipy's HiGHS. Both paths build
a fresh problem per call, so the backend is reentrant and safe to use from
concurrent workers. Set SURVMON_LP_BACKEND=scipy to force the robust path.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.optimize import linprog

from . import _simplex

# Chebyshev radius solves are clamped here so unbounded directions cannot
# make the LP diverge; any radius at the clamp means "effectively unbounded".
RADIUS_CLAMP = 1e6

_STATUS_OPTIMAL = 0
_STATUS_INFEASIBLE = 2
_STATUS_UNBOUNDED = 3


class LPError(RuntimeError):
    """The LP backend returned a status we cannot interpret geometrically."""


def default_tol() -> float:
    """Global geometric tolerance; overridable via SURVMON_LP_TOL."""
    raw = os.environ.get("SURVMON_LP_TOL")
    return float(raw) if raw else 1e-7


def _use_fast_path() -> bool:
    return os.environ.get("SURVMON_LP_BACKEND", "").lower() != "scipy"


def _maximize_scipy(direction, A, b):
    res = linprog(-direction, A_ub=A, b_ub=b, bounds=(None, None), method="highs")
    if res.status == _STATUS_OPTIMAL:
        return "optimal", res.x, -res.fun
    if res.status == _STATUS_INFEASIBLE:
        return "infeasible", None, -np.inf
    if res.status == _STATUS_UNBOUNDED:
        return "unbounded", None, np.inf
    raise LPError(f"linprog failed with status {res.status}: {res.message}")


def maximize(direction, A, b):
    """Maximize ``direction @ x`` over ``A x <= b``.

    Returns (status, x, value) with status one of "optimal", "infeasible",
    "unbounded". value is +inf when unbounded, -inf when infeasible.
    """
    direction = np.asarray(direction, dtype=float)
    if A is None or A.shape[0] == 0:
        if np.allclose(direction, 0.0):
            return "optimal", np.zeros(direction.size), 0.0
        return "unbounded", None, np.inf
    if _use_fast_path():
        try:
            return _simplex.maximize(direction, A, b)
        except _simplex.SimplexFallback:
            pass
    return _maximize_scipy(direction, A, b)


def support_value(A, b, direction):
    """Support function max_{x in P} direction @ x; +inf if unbounded."""
    status, _, value = maximize(direction, A, b)
    if status == "infeasible":
        return -np.inf
    return value


def chebyshev(A, b, clamp=RADIUS_CLAMP):
    """Center and radius of the largest inscribed ball of ``A x <= b``.

    Rows of A must be unit-normalized. The radius variable is bounded to
    [-clamp, clamp], so empty sets come back with a negative radius and
    unbounded ones saturate at the clamp instead of erroring.
    """
    m, d = A.shape
    if m == 0:
        return np.zeros(d), float(clamp)
    # variables (x, r): max r subject to A x + r <= b, -clamp <= r <= clamp
    A_ext = np.hstack([A, np.ones((m, 1))])
    r_rows = np.zeros((2, d + 1))
    r_rows[0, -1] = 1.0
    r_rows[1, -1] = -1.0
    A_lp = np.vstack([A_ext, r_rows])
    b_lp = np.concatenate([b, [clamp, clamp]])
    c = np.zeros(d + 1)
    c[-1] = 1.0
    status, x, _ = maximize(c, A_lp, b_lp)
    if status != "optimal":
        raise LPError(f"chebyshev LP reported {status}")
    return x[:d], float(x[-1])


def feasible_point(A, b, tol):
    """A point of ``A x <= b`` (its Chebyshev center), or None if empty."""
    center, radius = chebyshev(A, b)
    if radius < tol:
        return None
    return center
