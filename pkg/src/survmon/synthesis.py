"""Maximal invariant sets by fixed-point iteration of predecessor operators.

The iteration runs over the joint frame (x1, x2, z_i..., u1, u2): starting
from the domain box D, each step intersects D with the union over guarded
modes of the one-step predecessors of the current iterate, where the next
input is quantified per the configured semantics:

  exists            some admissible next input keeps the successor inside
                    (maximal control-invariant set; the useful monitor);
  forall_admissible every workspace-respecting next input does (robust);
  forall_raw        every input in U does, even workspace-violating ones
                    (documented sanity mode; erodes any bounded workspace).

The iterates are monotone decreasing; termination is by mutual containment
within the tolerance or by the iteration cap.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ._lp import default_tol, feasible_point
from .geometry import (HPolytope, PolyUnion, region_diff, uncovered_witness,
                       union_subset)
from .scenario import Mode, Scenario, build_modes

QUANTIFIERS = ("exists", "forall_admissible", "forall_raw")


@dataclass(frozen=True)
class SynthOptions:
    tol: float = 1e-7
    max_iters: int = 200
    input_quant: str = "exists"
    vertex_strategy: str = "worst_case"
    reduce_every_iter: bool = True
    trace_iterates: bool = False

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.input_quant not in QUANTIFIERS:
            raise ValueError(f"unknown input quantifier {self.input_quant!r}")
        if self.vertex_strategy not in ("worst_case", "all_vertices"):
            raise ValueError(f"unknown vertex strategy {self.vertex_strategy!r}")


@dataclass(frozen=True)
class Frame:
    """Coordinate layout (x1, x2, z per part, u1, u2) of a subsystem."""

    part_ids: tuple

    @property
    def n_z(self):
        return len(self.part_ids)

    @property
    def dim(self):
        return 4 + self.n_z

    @property
    def x_dims(self):
        return (0, 1)

    @property
    def u_dims(self):
        return (self.dim - 2, self.dim - 1)

    @property
    def z_dims(self):
        return tuple(range(2, 2 + self.n_z))

    def z_dim(self, part_id):
        return 2 + self.part_ids.index(part_id)

    @property
    def labels(self):
        return ("x1", "x2") + tuple(f"z{p}" for p in self.part_ids) + ("u1", "u2")

    def lift(self, poly: HPolytope, cols) -> HPolytope:
        """Embed a polytope constraining the given coordinates into the frame."""
        cols = list(cols)
        A = np.zeros((poly.n_facets, self.dim))
        A[:, cols] = poly.A
        return HPolytope(A, poly.b, dim=self.dim, normalize=False)

    def point(self, x, z, u):
        return np.concatenate([np.atleast_1d(x), np.atleast_1d(z), np.atleast_1d(u)])


@dataclass
class SynthesisReport:
    quantifier: str
    iterations: int = 0
    converged: bool = False
    termination: str = ""
    polytope_counts: list = field(default_factory=list)
    facet_counts: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    iterates: list = field(default_factory=list)

    def to_dict(self, with_timing=True):
        d = {
            "quantifier": self.quantifier,
            "iterations": self.iterations,
            "converged": self.converged,
            "termination": self.termination,
            "polytope_counts": self.polytope_counts,
            "facet_counts": self.facet_counts,
        }
        if with_timing:
            d["timing"] = self.timing
        return d


@dataclass(frozen=True)
class InvariantSet:
    set: PolyUnion
    frame: Frame
    quantifier: str
    factor_vertices: tuple
    iterations: int
    converged: bool
    scenario_fingerprint: str
    options: SynthOptions

    @property
    def part_ids(self):
        return self.frame.part_ids

    def to_dict(self):
        return {
            "frame": list(self.frame.labels),
            "part_ids": list(self.part_ids),
            "quantifier": self.quantifier,
            "factor_vertices": [list(v) for v in self.factor_vertices],
            "iterations": self.iterations,
            "converged": self.converged,
            "scenario_fingerprint": self.scenario_fingerprint,
            "options": {
                "tol": self.options.tol,
                "max_iters": self.options.max_iters,
                "input_quant": self.options.input_quant,
                "vertex_strategy": self.options.vertex_strategy,
                "reduce_every_iter": self.options.reduce_every_iter,
            },
            "set": self.set.to_dict(),
        }

    @classmethod
    def from_dict(cls, data):
        opts = SynthOptions(trace_iterates=False, **data["options"])
        return cls(
            set=PolyUnion.from_dict(data["set"]),
            frame=Frame(tuple(data["part_ids"])),
            quantifier=data["quantifier"],
            factor_vertices=tuple(tuple(v) for v in data["factor_vertices"]),
            iterations=int(data["iterations"]),
            converged=bool(data["converged"]),
            scenario_fingerprint=data["scenario_fingerprint"],
            options=opts,
        )


# -- building blocks --------------------------------------------------------


def domain_polytope(scenario: Scenario, part_ids) -> HPolytope:
    """D = X x prod_i [0, z_crit_i] x U in the subsystem frame."""
    frame = Frame(tuple(part_ids))
    rows = [frame.lift(scenario.workspace, frame.x_dims)]
    for pid in frame.part_ids:
        part = scenario.part(pid)
        zbox = HPolytope.box([0.0], [part.z_crit])
        rows.append(frame.lift(zbox, [frame.z_dim(pid)]))
    rows.append(frame.lift(scenario.U, frame.u_dims))
    A = np.vstack([r.A for r in rows])
    b = np.concatenate([r.b for r in rows])
    return HPolytope(A, b, dim=frame.dim, normalize=False)


def _base_box(scenario, frame) -> HPolytope:
    """B = X x prod_i [0, z_crit_i] in (x', z') coordinates."""
    dim = 2 + frame.n_z
    A_rows = [np.hstack([scenario.workspace.A, np.zeros((scenario.workspace.n_facets, frame.n_z))])]
    b_rows = [scenario.workspace.b]
    for k, pid in enumerate(frame.part_ids):
        part = scenario.part(pid)
        row_hi = np.zeros((1, dim))
        row_hi[0, 2 + k] = 1.0
        row_lo = np.zeros((1, dim))
        row_lo[0, 2 + k] = -1.0
        A_rows.extend([row_hi, row_lo])
        b_rows.extend([np.array([part.z_crit]), np.array([0.0])])
    return HPolytope(np.vstack(A_rows), np.concatenate(b_rows), dim=dim, normalize=False)


def input_section(S: PolyUnion, U: HPolytope, quant: str, scenario: Scenario,
                  part_ids=None, tol=None, _proj_cache=None) -> PolyUnion:
    """Successor states (x', z') acceptable under the input quantifier.

    exists:            the projection of S along the input coordinates;
    forall_raw:        B \\ proj((B x U) \\ S), quantifying over all of U;
    forall_admissible: the same with the next input restricted to
                       U(x') = {u : x' + Ts*u in X}.
    """
    tol = default_tol() if tol is None else tol
    part_ids = tuple(part_ids) if part_ids is not None else tuple(
        p for p in scenario.part_ids)[: S.dim - 4]
    frame = Frame(part_ids)
    if S.dim != frame.dim:
        raise ValueError(f"iterate dim {S.dim} does not match frame dim {frame.dim}")
    u_dims = list(frame.u_dims)

    if quant == "exists":
        # iterates shrink monotonically, so most parts persist between
        # iterations; cache their projections by object identity
        parts = []
        for p in S.parts:
            entry = None if _proj_cache is None else _proj_cache.get(id(p))
            if entry is not None and entry[0] is p:
                parts.append(entry[1])
                continue
            proj = p.project_out(u_dims, tol)
            if _proj_cache is not None:
                _proj_cache[id(p)] = (p, proj)
            parts.append(proj)
        return PolyUnion(parts, 2 + frame.n_z).pruned(tol)

    base = _base_box(scenario, frame)
    cyl = HPolytope(
        np.vstack([frame.lift(base, range(2 + frame.n_z)).A, frame.lift(U, u_dims).A]),
        np.concatenate([base.b, U.b]),
        dim=frame.dim, normalize=False)
    if quant == "forall_admissible":
        # next input must keep the robot in the workspace: A_X (x' + Ts u) <= b_X
        X = scenario.workspace
        adm_A = np.zeros((X.n_facets, frame.dim))
        adm_A[:, :2] = X.A
        adm_A[:, u_dims] = scenario.Ts * X.A
        cyl = HPolytope(np.vstack([cyl.A, adm_A]), np.concatenate([cyl.b, X.b]),
                        dim=frame.dim)
    elif quant != "forall_raw":
        raise ValueError(f"unknown input quantifier {quant!r}")

    escape = region_diff(cyl, S, tol)
    bad = PolyUnion([p.project_out(u_dims, tol) for p in escape.parts],
                    2 + frame.n_z).pruned(tol)
    return region_diff(base, bad, tol).pruned(tol)


def pre_mode(section: PolyUnion, mode: Mode, scenario: Scenario,
             part_ids, tol=None) -> PolyUnion:
    """One-step predecessors within a mode of a successor section.

    {(x, z, u) : x in guard, (x + Ts u, diag(gamma) z) in section}, realized
    as the affine preimage of every section part intersected with the
    guard and input cylinders.
    """
    tol = default_tol() if tol is None else tol
    frame = Frame(tuple(part_ids))
    n_z = frame.n_z
    M = np.zeros((2 + n_z, frame.dim))
    M[0, 0] = M[1, 1] = 1.0
    M[0, frame.u_dims[0]] = M[1, frame.u_dims[1]] = scenario.Ts
    for k in range(n_z):
        M[2 + k, 2 + k] = mode.factors[k]
    guard_lift = frame.lift(mode.guard, frame.x_dims)
    input_lift = frame.lift(scenario.U, frame.u_dims)
    parts = []
    for sect in section.parts:
        pre = HPolytope(sect.A @ M, sect.b, dim=frame.dim)
        combined = HPolytope(
            np.vstack([pre.A, guard_lift.A, input_lift.A]),
            np.concatenate([pre.b, guard_lift.b, input_lift.b]),
            dim=frame.dim, normalize=False).reduce(tol)
        parts.append(combined)
    return PolyUnion(parts, frame.dim).pruned(tol)


# -- the fixed point --------------------------------------------------------


def rpi_fixed_point(modes, scenario: Scenario, part_ids, opts: SynthOptions):
    """Greatest fixed point of S -> D cap U_m Pre_m(section(S)).

    Returns (InvariantSet, SynthesisReport); `converged` is False on an
    iteration-cap exit (the forall modes shrink the uncertainty coordinates
    geometrically and never terminate finitely).
    """
    tol = opts.tol
    part_ids = tuple(str(p) for p in part_ids)
    frame = Frame(part_ids)
    D = domain_polytope(scenario, part_ids)
    if D.is_empty(tol):
        raise ValueError("empty synthesis domain")
    guards = PolyUnion([m.guard for m in modes], 2)
    if not union_subset(scenario.workspace, guards, tol):
        raise ValueError("mode guards do not cover the workspace")

    report = SynthesisReport(quantifier=opts.input_quant)
    started = time.monotonic()
    S = PolyUnion([D])
    if opts.trace_iterates:
        report.iterates.append(S)
    converged = False
    iters_done = 0
    proj_cache = {}
    for _ in range(opts.max_iters):
        section = input_section(S, scenario.U, opts.input_quant, scenario,
                                part_ids, tol, _proj_cache=proj_cache)
        parts = []
        for mode in modes:
            parts.extend(pre_mode(section, mode, scenario, part_ids, tol).parts)
        clipped = []
        for p in parts:
            q = p.intersect(D, tol) if opts.reduce_every_iter else p.with_rows(D.A, D.b)
            if not q.is_empty(tol):
                clipped.append(q)
        nxt = PolyUnion(clipped, frame.dim).pruned(tol)
        iters_done += 1
        report.polytope_counts.append(len(nxt.parts))
        report.facet_counts.append(nxt.n_facets)
        if opts.trace_iterates:
            report.iterates.append(nxt)
        if union_subset(S, nxt, tol) and union_subset(nxt, S, tol):
            S = nxt
            converged = True
            break
        S = nxt
    report.iterations = iters_done
    report.converged = converged
    report.termination = "fixed_point" if converged else "max_iters"
    report.timing["wall_s"] = time.monotonic() - started

    vertices = tuple((scenario.part(p).a_max, scenario.part(p).b_max) for p in part_ids)
    inv = InvariantSet(
        set=S.pruned(tol),
        frame=frame,
        quantifier=opts.input_quant,
        factor_vertices=(vertices,),
        iterations=iters_done,
        converged=converged,
        scenario_fingerprint=scenario.fingerprint(),
        options=opts,
    )
    return inv, report


def synthesize(scenario: Scenario, part_ids=None, opts: SynthOptions = None,
               cell_ids=None):
    """Convenience wrapper: build modes and run the fixed point.

    With vertex_strategy="all_vertices" the fixed point is computed at every
    factor-interval vertex and the results are intersected (monotonicity
    makes this coincide with the worst-case vertex; kept as a cross-check).
    """
    opts = SynthOptions() if opts is None else opts
    part_ids = tuple(str(p) for p in (part_ids or scenario.part_ids))
    if opts.vertex_strategy == "worst_case":
        modes = build_modes(scenario, part_ids, cell_ids=cell_ids, tol=opts.tol)
        return rpi_fixed_point(modes, scenario, part_ids, opts)

    combos = _vertex_combos(scenario, part_ids)
    runs = []
    for combo in combos:
        modes = build_modes(scenario, part_ids, cell_ids=cell_ids,
                            factors=dict(zip(part_ids, combo)), tol=opts.tol)
        runs.append(rpi_fixed_point(modes, scenario, part_ids, opts))
    inv0, rep0 = runs[0]
    result = inv0.set
    for inv, _ in runs[1:]:
        crossed = [a.intersect(b, opts.tol) for a in result.parts for b in inv.set.parts]
        result = PolyUnion(crossed, inv0.set.dim).pruned(opts.tol)
    merged = InvariantSet(
        set=result,
        frame=inv0.frame,
        quantifier=opts.input_quant,
        factor_vertices=tuple(combos),
        iterations=max(r.iterations for _, r in runs),
        converged=all(i.converged for i, _ in runs),
        scenario_fingerprint=inv0.scenario_fingerprint,
        options=opts,
    )
    rep0.timing["wall_s"] = sum(r.timing["wall_s"] for _, r in runs)
    return merged, rep0


def _vertex_combos(scenario, part_ids):
    per_part = []
    for pid in part_ids:
        p = scenario.part(pid)
        per_part.append([(a, b) for a in (p.a_min, p.a_max) for b in (p.b_min, p.b_max)])
    combos = [()]
    for choices in per_part:
        combos = [c + (ch,) for c in combos for ch in choices]
    return combos


# -- composition ------------------------------------------------------------


def lift_to_frame(inv: InvariantSet, frame: Frame) -> PolyUnion:
    """Cylinder-extend a per-part invariant over the remaining z coordinates."""
    cols = [0, 1] + [frame.z_dim(p) for p in inv.part_ids] + list(frame.u_dims)
    lifted = []
    for p in inv.set.parts:
        A = np.zeros((p.n_facets, frame.dim))
        A[:, cols] = p.A
        lifted.append(HPolytope(A, p.b, dim=frame.dim, normalize=False))
    return PolyUnion(lifted, frame.dim)


def conjunction(part_invs, scenario: Scenario, part_ids=None, tol=None) -> PolyUnion:
    """The compositional set: D intersected with every lifted per-part set."""
    tol = default_tol() if tol is None else tol
    all_ids = tuple(part_ids) if part_ids is not None else tuple(
        pid for inv in part_invs for pid in inv.part_ids)
    frame = Frame(all_ids)
    result = PolyUnion([domain_polytope(scenario, all_ids)])
    for inv in part_invs:
        lifted = lift_to_frame(inv, frame)
        crossed = [a.intersect(b, tol) for a in result.parts for b in lifted.parts]
        result = PolyUnion(crossed, frame.dim).pruned(tol)
    return result


@dataclass
class CompositionReport:
    tol: float
    full_in_conjunction: bool
    conjunction_in_full: bool
    witnesses_full_minus_conjunction: list
    witnesses_conjunction_minus_full: list

    @property
    def equal(self):
        return self.full_in_conjunction and self.conjunction_in_full

    def to_dict(self):
        return {
            "tol": self.tol,
            "full_in_conjunction": self.full_in_conjunction,
            "conjunction_in_full": self.conjunction_in_full,
            "witnesses_full_minus_conjunction":
                [list(w) for w in self.witnesses_full_minus_conjunction],
            "witnesses_conjunction_minus_full":
                [list(w) for w in self.witnesses_conjunction_minus_full],
        }


def check_composition(full: InvariantSet, part_invs, scenario: Scenario,
                      tol=1e-6) -> CompositionReport:
    """Test both inclusions between the full invariant and the per-part
    conjunction; on failure the witness is the Chebyshev center of the
    first difference piece found."""
    if any(inv.scenario_fingerprint != full.scenario_fingerprint for inv in part_invs):
        raise ValueError("invariants were synthesized from different scenarios")
    covered = tuple(pid for inv in part_invs for pid in inv.part_ids)
    if set(covered) != set(full.part_ids):
        raise ValueError("per-part invariants do not cover the full part set")
    conj = conjunction(part_invs, scenario, part_ids=full.part_ids)
    wit_a = _first_uncovered(full.set, conj, tol)
    wit_b = _first_uncovered(conj, full.set, tol)
    return CompositionReport(
        tol=tol,
        full_in_conjunction=wit_a is None,
        conjunction_in_full=wit_b is None,
        witnesses_full_minus_conjunction=[] if wit_a is None else [wit_a],
        witnesses_conjunction_minus_full=[] if wit_b is None else [wit_b],
    )


def _first_uncovered(A: PolyUnion, B: PolyUnion, tol):
    """Chebyshev center of the first piece of A \\ B, or None if A is covered."""
    b_parts = [q for q in B.parts if not q.is_empty(tol)]
    for p in A.parts:
        if p.is_empty(tol) or any(p.is_subset_of(q, tol) for q in b_parts):
            continue
        piece = uncovered_witness(p.reduce(tol), b_parts, tol)
        if piece is not None:
            return piece.chebyshev_ball().center
    return None


# -- verification oracles ----------------------------------------------------


def _poly_vertices_2d(P: HPolytope, tol):
    """Vertices of a bounded 2-D polytope via pairwise facet intersection."""
    verts = []
    m = P.n_facets
    for i in range(m):
        for j in range(i + 1, m):
            M = np.vstack([P.A[i], P.A[j]])
            if abs(np.linalg.det(M)) < 1e-10:
                continue
            v = np.linalg.solve(M, np.array([P.b[i], P.b[j]]))
            if P.contains(v, 1e-9)[0] and not any(np.allclose(v, w, atol=1e-9) for w in verts):
                verts.append(v)
    return verts


def _input_candidates(U: HPolytope, grid_n, tol):
    cands = list(_poly_vertices_2d(U, tol))
    lo, hi = U.bounding_box()
    axes = [np.linspace(lo[i], hi[i], grid_n) for i in range(2)]
    for a in axes[0]:
        for b in axes[1]:
            u = np.array([a, b])
            if U.contains(u, tol)[0]:
                cands.append(u)
    return cands


def _sample_from_union(union: PolyUnion, n, rng, tol, max_tries=200):
    boxes = [p.bounding_box() for p in union.parts]
    samples = []
    while len(samples) < n:
        idx = int(rng.integers(len(union.parts)))
        lo, hi = boxes[idx]
        for _ in range(max_tries):
            pt = rng.uniform(lo, hi)
            if union.parts[idx].contains(pt, 0.0)[0]:
                samples.append(pt)
                break
        else:
            raise RuntimeError("rejection sampling failed; part too thin")
    return samples


@dataclass
class ClosureReport:
    n_samples: int
    n_pass: int
    seed: int
    counterexamples: list

    @property
    def pass_fraction(self):
        return 1.0 if self.n_samples == 0 else self.n_pass / self.n_samples

    def to_dict(self):
        return {"n_samples": self.n_samples, "n_pass": self.n_pass,
                "pass_fraction": self.pass_fraction, "seed": self.seed,
                "counterexamples": [list(map(float, c)) for c in self.counterexamples]}


def verify_one_step_closure(inv: InvariantSet, modes, scenario: Scenario,
                            samples=1000, seed=0, grid_n=5, tol=None) -> ClosureReport:
    """Sampled invariance check: successors of sampled member states.

    Under exists semantics a next input keeping membership is searched over
    the input-set vertices and a grid, with an exact per-part LP fallback;
    under the forall semantics every candidate input must keep membership.
    """
    tol = default_tol() if tol is None else tol
    rng = np.random.default_rng(seed)
    if not inv.set.parts or inv.set.is_empty(tol):
        return ClosureReport(0, 0, seed, [])
    frame = inv.frame
    pts = _sample_from_union(inv.set, samples, rng, tol)
    candidates = _input_candidates(scenario.U, grid_n, tol)
    X = scenario.workspace
    n_pass = 0
    bad = []
    for pt in pts:
        x = pt[:2]
        z = pt[list(frame.z_dims)]
        u = pt[list(frame.u_dims)]
        mode = _mode_at(modes, x, tol)
        x_next = x + scenario.Ts * u
        z_next = np.asarray(mode.factors) * z
        if inv.quantifier == "exists":
            ok = _exists_next_input(inv.set, frame, x_next, z_next, candidates,
                                    scenario, tol)
        else:
            ok = True
            for cand in candidates:
                if inv.quantifier == "forall_admissible" and \
                        not X.contains(x_next + scenario.Ts * cand, tol)[0]:
                    continue
                succ = frame.point(x_next, z_next, cand)
                if not inv.set.contains(succ, tol)[0]:
                    ok = False
                    break
        if ok:
            n_pass += 1
        elif len(bad) < 10:
            bad.append(pt)
    return ClosureReport(len(pts), n_pass, seed, bad)


def _mode_at(modes, x, tol):
    best, best_margin = None, -np.inf
    for m in modes:
        inside, margin = m.guard.contains(x, tol)
        if inside:
            return m
        if margin > best_margin:
            best, best_margin = m, margin
    return best


def _exists_next_input(S: PolyUnion, frame, x_next, z_next, candidates,
                       scenario, tol):
    for cand in candidates:
        if S.contains(frame.point(x_next, z_next, cand), tol)[0]:
            return True
    # exact fallback: feasibility of the input slice of each part
    xz = np.concatenate([x_next, z_next])
    keep = list(range(2 + frame.n_z))
    u_cols = list(frame.u_dims)
    for p in S.parts:
        A_u = np.vstack([p.A[:, u_cols], scenario.U.A])
        b_u = np.concatenate([p.b - p.A[:, keep] @ xz, scenario.U.b])
        if feasible_point(A_u, b_u, tol) is not None:
            return True
    return False


@dataclass
class MaximalityReport:
    n_grid: int
    n_excluded: int
    n_certified: int
    n_uncertified: int
    contradictions: list
    horizon: int

    @property
    def certified_fraction(self):
        return 1.0 if self.n_excluded == 0 else self.n_certified / self.n_excluded

    def to_dict(self):
        return {"n_grid": self.n_grid, "n_excluded": self.n_excluded,
                "n_certified": self.n_certified, "n_uncertified": self.n_uncertified,
                "certified_fraction": self.certified_fraction,
                "horizon": self.horizon,
                "contradictions": [list(map(float, c)) for c in self.contradictions[:10]]}


def verify_maximality(inv: InvariantSet, modes, scenario: Scenario,
                      grid_resolution=0.25, horizon=20, tol=None) -> MaximalityReport:
    """Brute-force viability search over grid states outside the invariant.

    A state is certified excluded when every lattice input sequence leaves
    the domain within the horizon; finding a surviving strategy (reaching a
    loiterable observed region, where uncertainty decays forever) from an
    excluded state contradicts maximality. States neither killed nor saved
    within the horizon are reported as uncertified.
    """
    tol = default_tol() if tol is None else tol
    frame = inv.frame
    if frame.n_z > 2:
        raise ValueError("maximality oracle supports subsystems with at most 4 state dims")
    X = scenario.workspace
    parts = [scenario.part(p) for p in frame.part_ids]
    z_crit = np.array([p.z_crit for p in parts])
    lo, hi = X.bounding_box()
    xs = [np.arange(lo[i], hi[i] + 1e-9, grid_resolution) for i in range(2)]
    zs = [np.arange(0.0, p.z_crit + 1e-9, grid_resolution) for p in parts]
    u_lo, u_hi = scenario.U.bounding_box()
    u_axes = [sorted({u_lo[i], 0.0, u_hi[i]}) for i in range(2)]
    u_lattice = [np.array([a, b]) for a in u_axes[0] for b in u_axes[1]
                 if scenario.U.contains(np.array([a, b]), tol)[0]]
    can_loiter = scenario.U.contains(np.zeros(2), tol)[0]
    Ts = scenario.Ts

    def factors_at(x):
        return np.asarray(_mode_at(modes, x, tol).factors)

    def harbored(x, z):
        if not can_loiter:
            return False
        for part in parts:
            if not part.obs_region.contains(x, -tol)[0]:
                return False
        return True

    memo = {}

    def search(x, z, rem):
        if harbored(x, z):
            return "alive"
        if rem == 0:
            return "unknown"
        key = (tuple(np.round(x, 9)), tuple(np.round(z, 9)), rem)
        if key in memo:
            return memo[key]
        gamma = factors_at(x)
        z1 = gamma * z
        status = "dead"
        if np.all(z1 <= z_crit + tol):
            any_unknown = False
            for u in u_lattice:
                x1 = x + Ts * u
                if not X.contains(x1, tol)[0]:
                    continue
                r = search(x1, z1, rem - 1)
                if r == "alive":
                    status = "alive"
                    break
                if r == "unknown":
                    any_unknown = True
            else:
                status = "unknown" if any_unknown else "dead"
        memo[key] = status
        return status

    n_grid = n_excluded = n_certified = n_uncertified = 0
    contradictions = []
    for x0 in xs[0]:
        for x1 in xs[1]:
            x = np.array([x0, x1])
            gamma = factors_at(x)
            for z_combo in _z_grid(zs):
                for u in u_lattice:
                    n_grid += 1
                    state = frame.point(x, z_combo, u)
                    if inv.set.contains(state, tol)[0]:
                        continue
                    n_excluded += 1
                    if horizon == 0:
                        n_uncertified += 1
                        continue
                    x_next = x + Ts * u
                    z_next = gamma * z_combo
                    if not X.contains(x_next, tol)[0] or np.any(z_next > z_crit + tol):
                        n_certified += 1
                        continue
                    status = search(x_next, z_next, horizon - 1)
                    if status == "dead":
                        n_certified += 1
                    elif status == "unknown":
                        n_uncertified += 1
                    else:
                        contradictions.append(state)
    return MaximalityReport(n_grid, n_excluded, n_certified, n_uncertified,
                            contradictions, horizon)


def _z_grid(axes):
    combos = [()]
    for ax in axes:
        combos = [c + (v,) for c in combos for v in ax]
    return [np.array(c) for c in combos]
