"""Halfspace polytopes and finite unions, with LP-backed exact operations.

Everything downstream (hybrid models, invariant synthesis, monitoring)
manipulates sets through this module. The canonical representation is the
closed set {x : A x <= b} with unit-normalized facet rows; unions are plain
part lists that may overlap. All values are immutable after construction and
all operations are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._lp import chebyshev, default_tol, maximize, support_value

_ZERO_ROW = 1e-12


@dataclass(frozen=True)
class ChebyshevBall:
    """Largest inscribed ball; radius < tol is the emptiness certificate."""

    center: np.ndarray
    radius: float


class HPolytope:
    """Closed convex polyhedron {x in R^d : A x <= b} in halfspace form.

    Rows are normalized to unit length at construction. Zero rows are
    resolved immediately: vacuous ones (b >= 0) are dropped, contradictory
    ones (b < 0) collapse the set to the canonical empty polytope. m = 0
    encodes the universe of the given dimension.
    """

    __slots__ = ("A", "b", "_cheb", "_bbox")

    def __init__(self, A, b, dim=None, normalize=True):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float)).ravel()
        if A.size == 0:
            if dim is None:
                raise ValueError("dimension required for a constraint-free polytope")
            A = A.reshape(0, dim)
        if A.shape[0] != b.size:
            raise ValueError(f"A has {A.shape[0]} rows but b has {b.size} entries")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("polytope data must be finite")
        if normalize and A.shape[0] > 0:
            norms = np.linalg.norm(A, axis=1)
            zero = norms < _ZERO_ROW
            if np.any(zero):
                if np.any(b[zero] < -_ZERO_ROW):
                    A, b = _empty_rows(A.shape[1])
                else:
                    A, b = A[~zero], b[~zero]
                norms = np.linalg.norm(A, axis=1) if A.shape[0] else norms[:0]
            if A.shape[0] > 0:
                A = A / norms[:, None]
                b = b / norms
        A = np.ascontiguousarray(A)
        b = np.ascontiguousarray(b)
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "_cheb", None)
        object.__setattr__(self, "_bbox", None)

    def __setattr__(self, name, value):
        raise AttributeError("HPolytope is immutable")

    # -- constructors -------------------------------------------------

    @classmethod
    def box(cls, lo, hi):
        """Axis-aligned box; facet order is (x1<=hi1, -x1<=-lo1, x2<=hi2, ...)."""
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.size != hi.size:
            raise ValueError("bound vectors must have equal length")
        if np.any(lo > hi):
            raise ValueError("lower bounds exceed upper bounds")
        d = lo.size
        A = np.zeros((2 * d, d))
        b = np.zeros(2 * d)
        for i in range(d):
            A[2 * i, i] = 1.0
            b[2 * i] = hi[i]
            A[2 * i + 1, i] = -1.0
            b[2 * i + 1] = -lo[i]
        return cls(A, b, normalize=False)

    @classmethod
    def universe(cls, dim):
        return cls(np.zeros((0, dim)), np.zeros(0), dim=dim, normalize=False)

    @classmethod
    def empty(cls, dim):
        A, b = _empty_rows(dim)
        return cls(A, b, normalize=False)

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data["A"], dtype=float), np.asarray(data["b"], dtype=float),
                   dim=data.get("dim"))

    # -- basic queries -------------------------------------------------

    @property
    def dim(self):
        return self.A.shape[1]

    @property
    def n_facets(self):
        return self.A.shape[0]

    def __repr__(self):
        return f"HPolytope(dim={self.dim}, facets={self.n_facets})"

    def margins(self, points):
        """Min normalized facet slack for each point, shape (n,).

        Positive means strictly inside, negative outside; the universe gives
        +inf everywhere.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.dim:
            raise ValueError(f"points have dim {points.shape[1]}, polytope has {self.dim}")
        if self.n_facets == 0:
            return np.full(points.shape[0], np.inf)
        return np.min(self.b[None, :] - points @ self.A.T, axis=1)

    def contains(self, point, tol=0.0):
        """Membership of one point: (bool, margin)."""
        margin = float(self.margins(np.asarray(point, dtype=float)[None, :])[0])
        return margin >= -tol, margin

    def chebyshev_ball(self) -> ChebyshevBall:
        cached = self._cheb
        if cached is None:
            center, radius = chebyshev(self.A, self.b)
            cached = ChebyshevBall(center, radius)
            object.__setattr__(self, "_cheb", cached)
        return cached

    def is_empty(self, tol=None):
        """True iff the Chebyshev radius is below tol; the universe never is."""
        if self.n_facets == 0:
            return False
        tol = default_tol() if tol is None else tol
        return self.chebyshev_ball().radius < tol

    def bounding_box(self):
        """(lo, hi) per coordinate via 2d support LPs; inf on unbounded axes.

        Cached: the box doubles as a cheap prefilter for inclusion tests.
        """
        cached = self._bbox
        if cached is None:
            lo = np.empty(self.dim)
            hi = np.empty(self.dim)
            for i in range(self.dim):
                e = np.zeros(self.dim)
                e[i] = 1.0
                hi[i] = support_value(self.A, self.b, e)
                lo[i] = -support_value(self.A, self.b, -e)
            lo.setflags(write=False)
            hi.setflags(write=False)
            cached = (lo, hi)
            object.__setattr__(self, "_bbox", cached)
        return cached

    def support(self, direction):
        return support_value(self.A, self.b, np.asarray(direction, dtype=float))

    def is_subset_of(self, other, tol=None):
        """Inclusion in another polytope: one support LP per facet of other.

        Bounding boxes give a necessary condition checked first; a box
        rejection can only keep a redundant part, never drop one.
        """
        tol = default_tol() if tol is None else tol
        if self.is_empty(tol):
            return True
        lo_p, hi_p = self.bounding_box()
        lo_q, hi_q = other.bounding_box()
        cushion = 10.0 * tol
        if np.any(lo_p < lo_q - cushion) or np.any(hi_p > hi_q + cushion):
            return False
        for a_row, b_row in zip(other.A, other.b):
            if support_value(self.A, self.b, a_row) > b_row + tol:
                return False
        return True

    # -- core operations -----------------------------------------------

    def with_rows(self, A_extra, b_extra):
        """Row-concatenation without reduction (cheap internal helper)."""
        A_extra = np.atleast_2d(np.asarray(A_extra, dtype=float))
        b_extra = np.atleast_1d(np.asarray(b_extra, dtype=float))
        return HPolytope(np.vstack([self.A, A_extra]), np.concatenate([self.b, b_extra]))

    def reduce(self, tol=None):
        """Minimal representation: drop duplicate and LP-redundant facets.

        Row j is redundant iff maximizing its normal subject to the other
        (relaxed) rows stays below b_j + tol. Idempotent; an empty input
        yields the canonical empty polytope.
        """
        tol = default_tol() if tol is None else tol
        if self.n_facets == 0:
            return self
        if self.is_empty(tol):
            return HPolytope.empty(self.dim)
        A, b = _drop_duplicate_rows(self.A, self.b)
        keep = list(range(A.shape[0]))
        j = 0
        while j < len(keep):
            idx = keep[j]
            others = keep[:j] + keep[j + 1 :]
            if not others:
                break
            A_test = A[others + [idx]]
            b_test = np.concatenate([b[others], [b[idx] + 1.0]])
            _, _, value = maximize(A[idx], A_test, b_test)
            if value <= b[idx] + tol:
                keep.pop(j)
            else:
                j += 1
        return HPolytope(A[keep], b[keep], dim=self.dim, normalize=False)

    def intersect(self, other, tol=None):
        """P cap Q as row-concatenation followed by reduce."""
        if other.dim != self.dim:
            raise ValueError("dimension mismatch in intersection")
        stacked = HPolytope(np.vstack([self.A, other.A]),
                            np.concatenate([self.b, other.b]),
                            dim=self.dim, normalize=False)
        return stacked.reduce(tol)

    def affine_preimage(self, M, c=None, tol=None):
        """{eta : M eta + c in P} = {eta : (A M) eta <= b - A c}, reduced."""
        M = np.atleast_2d(np.asarray(M, dtype=float))
        if M.shape[0] != self.dim:
            raise ValueError(f"map produces dim {M.shape[0]}, polytope has {self.dim}")
        c = np.zeros(self.dim) if c is None else np.asarray(c, dtype=float)
        if self.n_facets == 0:
            return HPolytope.universe(M.shape[1])
        pre = HPolytope(self.A @ M, self.b - self.A @ c)
        return pre.reduce(tol)

    def robust_eliminate(self, elim_dims, U, tol=None):
        """Universal elimination of input coordinates, facet by facet.

        Returns {eta : for all u in U, (eta, u) in P} where the eliminated
        coordinates are listed in elim_dims and U lives in exactly those
        coordinates. Each facet with a nonzero eliminated block is tightened
        by the support function of U; U must be bounded and nonempty.
        """
        tol = default_tol() if tol is None else tol
        elim = sorted(elim_dims)
        keep = [i for i in range(self.dim) if i not in elim]
        if U.dim != len(elim):
            raise ValueError("input set dimension must match eliminated coordinates")
        # degenerate (measure-zero) input sets are fine; infeasible ones are not
        if U.n_facets > 0 and U.chebyshev_ball().radius < -tol:
            raise ValueError("input set is empty")
        lo_u, hi_u = U.bounding_box()
        if not (np.all(np.isfinite(lo_u)) and np.all(np.isfinite(hi_u))):
            raise ValueError("input set must be bounded for robust elimination")
        if self.n_facets == 0:
            return HPolytope.universe(len(keep))
        A_keep = self.A[:, keep]
        A_elim = self.A[:, elim]
        new_b = np.array(self.b)
        for i in range(self.n_facets):
            row = A_elim[i]
            if np.linalg.norm(row) < _ZERO_ROW:
                continue
            new_b[i] = self.b[i] - U.support(row)
        return HPolytope(A_keep, new_b, dim=len(keep)).reduce(tol)

    def project_out(self, elim_dims, tol=None):
        """Orthogonal projection onto the kept coordinates (Fourier-Motzkin).

        Eliminates one coordinate at a time, reducing after each step to
        bound facet growth. Kept coordinates retain their original order.
        """
        tol = default_tol() if tol is None else tol
        poly = self.reduce(tol)
        for i in sorted(elim_dims, reverse=True):
            if poly.is_empty(tol):
                return HPolytope.empty(self.dim - len(elim_dims))
            poly = _fm_step(poly, i, tol)
        if poly.is_empty(tol):
            return HPolytope.empty(self.dim - len(elim_dims))
        return poly

    # -- serialization --------------------------------------------------

    def to_dict(self):
        return {"A": self.A.tolist(), "b": self.b.tolist(), "dim": self.dim}

    def to_union(self):
        return PolyUnion([self], self.dim)


class PolyUnion:
    """Finite union of same-dimension polytopes; parts may overlap.

    An empty part list encodes the empty set.
    """

    __slots__ = ("parts", "dim")

    def __init__(self, parts, dim=None):
        parts = tuple(parts)
        if dim is None:
            if not parts:
                raise ValueError("dimension required for an empty union")
            dim = parts[0].dim
        for p in parts:
            if p.dim != dim:
                raise ValueError("union parts must share dimension")
        object.__setattr__(self, "parts", parts)
        object.__setattr__(self, "dim", dim)

    def __setattr__(self, name, value):
        raise AttributeError("PolyUnion is immutable")

    def __len__(self):
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)

    def __repr__(self):
        return f"PolyUnion(dim={self.dim}, parts={len(self.parts)})"

    @property
    def n_facets(self):
        return sum(p.n_facets for p in self.parts)

    def margins(self, points):
        """Max over parts of the per-part min slack; -inf for the empty union."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if not self.parts:
            return np.full(points.shape[0], -np.inf)
        out = np.full(points.shape[0], -np.inf)
        for p in self.parts:
            np.maximum(out, p.margins(points), out=out)
        return out

    def contains(self, point, tol=0.0):
        margin = float(self.margins(np.asarray(point, dtype=float)[None, :])[0])
        return margin >= -tol, margin

    def is_empty(self, tol=None):
        tol = default_tol() if tol is None else tol
        return all(p.is_empty(tol) for p in self.parts)

    def pruned(self, tol=None):
        """Drop empty parts and parts contained in an earlier kept part."""
        tol = default_tol() if tol is None else tol
        kept = []
        for p in self.parts:
            if p.is_empty(tol):
                continue
            if any(p.is_subset_of(q, tol) for q in kept):
                continue
            kept.append(p)
        return PolyUnion(kept, self.dim)

    def to_dict(self):
        return {"dim": self.dim, "parts": [{"A": p.A.tolist(), "b": p.b.tolist()} for p in self.parts]}

    @classmethod
    def from_dict(cls, data):
        dim = int(data["dim"])
        return cls([HPolytope(np.asarray(p["A"], dtype=float), np.asarray(p["b"], dtype=float), dim=dim)
                    for p in data["parts"]], dim)


# -- module-level set operations -----------------------------------------


def as_union(S) -> PolyUnion:
    return S if isinstance(S, PolyUnion) else S.to_union()


def region_diff(A, B, tol=None) -> PolyUnion:
    """Set difference A \\ B as a union of closed polytopes.

    Uses recursive splitting of each A-part by the facets of intersecting
    B-parts, processing facets in row order; the interior-point sets agree
    with the exact difference (boundary slivers below tol are dropped).
    """
    tol = default_tol() if tol is None else tol
    A = as_union(A)
    B = as_union(B)
    if A.dim != B.dim:
        raise ValueError("dimension mismatch in region difference")
    b_parts = [q for q in B.parts if not q.is_empty(tol)]
    pieces = []
    for p in A.parts:
        if not p.is_empty(tol):
            pieces.extend(_diff_one(p.reduce(tol), b_parts, tol))
    return PolyUnion(pieces, A.dim)


def _diff_one(P, b_parts, tol):
    hit = None
    for i, Q in enumerate(b_parts):
        if not P.with_rows(Q.A, Q.b).is_empty(tol):
            hit = i
            break
    if hit is None:
        return [P]
    Q = b_parts[hit]
    rest = b_parts[:hit] + b_parts[hit + 1 :]
    pieces = []
    cur = P
    for a_row, b_row in zip(Q.A, Q.b):
        outside = cur.with_rows(-a_row[None, :], [-b_row])
        if not outside.is_empty(tol):
            pieces.extend(_diff_one(outside.reduce(tol), rest, tol))
        cur = cur.with_rows(a_row[None, :], [b_row])
        if cur.is_empty(tol):
            break
    return pieces


def union_subset(A, B, tol=None) -> bool:
    """True iff every part of region_diff(A, B) has Chebyshev radius < tol.

    Parts covered by a single B-part are settled with support LPs first;
    the remainder runs the recursive difference with an early exit on the
    first surviving piece.
    """
    tol = default_tol() if tol is None else tol
    A = as_union(A)
    B = as_union(B)
    b_parts = [q for q in B.parts if not q.is_empty(tol)]
    for p in A.parts:
        if p.is_empty(tol):
            continue
        if any(p.is_subset_of(q, tol) for q in b_parts):
            continue
        if not _covered(p.reduce(tol), b_parts, tol):
            return False
    return True


def _covered(P, b_parts, tol):
    """True iff polytope P is covered by the union of b_parts."""
    return uncovered_witness(P, b_parts, tol) is None


def uncovered_witness(P, b_parts, tol):
    """First piece of P \\ union(b_parts) found, or None if covered."""
    hit = None
    for i, Q in enumerate(b_parts):
        if not P.with_rows(Q.A, Q.b).is_empty(tol):
            hit = i
            break
    if hit is None:
        return P
    Q = b_parts[hit]
    rest = b_parts[:hit] + b_parts[hit + 1 :]
    cur = P
    for a_row, b_row in zip(Q.A, Q.b):
        outside = cur.with_rows(-a_row[None, :], [-b_row])
        if not outside.is_empty(tol):
            piece = outside.reduce(tol)
            if rest:
                piece = uncovered_witness(piece, rest, tol)
            if piece is not None:
                return piece
        cur = cur.with_rows(a_row[None, :], [b_row])
        if cur.is_empty(tol):
            break
    return None


def envelope(P, Q, tol=None) -> HPolytope:
    """Outer polytope from the facets of P valid for Q and vice versa."""
    tol = default_tol() if tol is None else tol
    rows_A, rows_b = [], []
    for a_row, b_row in zip(P.A, P.b):
        if Q.support(a_row) <= b_row + tol:
            rows_A.append(a_row)
            rows_b.append(b_row)
    for a_row, b_row in zip(Q.A, Q.b):
        if P.support(a_row) <= b_row + tol:
            rows_A.append(a_row)
            rows_b.append(b_row)
    if not rows_A:
        return HPolytope.universe(P.dim)
    return HPolytope(np.array(rows_A), np.array(rows_b), dim=P.dim, normalize=False)


def try_merge(P, Q, tol=None):
    """The convex union of P and Q if it is exactly convex, else None."""
    tol = default_tol() if tol is None else tol
    env = envelope(P, Q, tol)
    if env.n_facets == 0:
        return None
    if union_subset(env, PolyUnion([P, Q]), tol):
        return env.reduce(tol)
    return None


# -- internals -------------------------------------------------------------


def _empty_rows(dim):
    """Contradictory normalized pair x_1 <= -1, -x_1 <= -1."""
    A = np.zeros((2, dim))
    A[0, 0] = 1.0
    A[1, 0] = -1.0
    return A, np.array([-1.0, -1.0])


def _drop_duplicate_rows(A, b):
    """Remove repeated facets (same direction: keep the tightest offset)."""
    norms = np.linalg.norm(A, axis=1)
    norms[norms < _ZERO_ROW] = 1.0
    unit = A / norms[:, None]
    scaled_b = b / norms
    keep = []
    for i in range(A.shape[0]):
        dup = False
        for j in keep:
            if unit[i] @ unit[j] >= 1.0 - 1e-12:
                dup = True
                if scaled_b[i] < scaled_b[j] - 1e-12:
                    scaled_b = scaled_b.copy()
                    scaled_b[j] = scaled_b[i]
                break
        if not dup:
            keep.append(i)
    return unit[keep], scaled_b[keep]


def _fm_step(poly, col, tol):
    """One Fourier-Motzkin elimination of coordinate `col`, then reduce."""
    A, b = poly.A, poly.b
    coef = A[:, col]
    pos = np.where(coef > _ZERO_ROW)[0]
    neg = np.where(coef < -_ZERO_ROW)[0]
    zero = np.where(np.abs(coef) <= _ZERO_ROW)[0]
    keep_cols = [i for i in range(poly.dim) if i != col]
    rows = [A[zero][:, keep_cols]] if zero.size else []
    offs = [b[zero]] if zero.size else []
    for j in pos:
        for k in neg:
            # coef[j] > 0 > coef[k]; the combination cancels the column
            w_j, w_k = -coef[k], coef[j]
            rows.append((w_j * A[j] + w_k * A[k])[None, keep_cols])
            offs.append(np.array([w_j * b[j] + w_k * b[k]]))
    if not rows:
        return HPolytope.universe(poly.dim - 1)
    new_A = np.vstack(rows)
    new_b = np.concatenate(offs)
    return HPolytope(new_A, new_b, dim=poly.dim - 1).reduce(tol)
