"""Declarative surveillance scenarios and their hybrid mode structure.

A scenario fixes the workspace, an observation-consistent cell partition,
per-part uncertainty factor intervals, the input set and the sampling time.
From it we derive guarded modes (one per cell, factors chosen by observation
status) and the one-step successor map

    x+ = x + Ts * u,    z_i+ = gamma_i(x) * z_i.

Scenario and Mode values are immutable; every operation here is pure.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field

import numpy as np

from ._lp import default_tol
from .geometry import HPolytope, PolyUnion, region_diff, try_merge, union_subset
from .serialize import fingerprint, load_json

logger = logging.getLogger(__name__)


class ScenarioError(ValueError):
    """Configuration that does not describe a valid scenario."""


@dataclass(frozen=True)
class Part:
    id: str
    obs_region: PolyUnion
    a_min: float
    a_max: float
    b_min: float
    b_max: float
    z_crit: float
    z_init: float = 0.0


@dataclass(frozen=True)
class Cell:
    id: str
    poly: HPolytope


@dataclass(frozen=True)
class Mode:
    """One guarded affine mode: a convex guard region with a worst-case
    growth/decay factor per part in scope."""

    guard: HPolytope
    factors: tuple
    observed: tuple
    cell_ids: tuple

    @property
    def name(self):
        return "+".join(self.cell_ids)


@dataclass(frozen=True)
class JointState:
    x: np.ndarray
    z: np.ndarray
    u: np.ndarray


@dataclass(frozen=True)
class Scenario:
    workspace: HPolytope
    cells: tuple
    parts: tuple
    U: HPolytope
    Ts: float
    config: dict = field(repr=False, default_factory=dict)

    @property
    def part_ids(self):
        return tuple(p.id for p in self.parts)

    def part(self, part_id) -> Part:
        for p in self.parts:
            if p.id == str(part_id):
                return p
        raise KeyError(f"unknown part id {part_id!r}")

    def cell(self, cell_id) -> Cell:
        for c in self.cells:
            if c.id == cell_id:
                return c
        raise KeyError(f"unknown cell id {cell_id!r}")

    def active_cell(self, x, tol=None) -> Cell:
        """The first cell containing x (cells only overlap on boundaries)."""
        tol = default_tol() if tol is None else tol
        best, best_margin = None, -np.inf
        for c in self.cells:
            inside, margin = c.poly.contains(x, tol)
            if inside:
                return c
            if margin > best_margin:
                best, best_margin = c, margin
        raise ScenarioError(f"point {np.asarray(x)} lies outside every cell "
                            f"(closest: {best.id}, margin {best_margin:.3g})")

    def fingerprint(self) -> str:
        return fingerprint(self.config)


# -- construction ----------------------------------------------------------


def _poly_from_config(spec, what):
    if isinstance(spec, HPolytope):
        return spec
    if isinstance(spec, dict):
        if "square" in spec:
            sq = spec["square"]
            c = np.asarray(sq["center"], dtype=float)
            h = float(sq["half_side"])
            return HPolytope.box(c - h, c + h)
        if "box" in spec:
            bounds = np.asarray(spec["box"], dtype=float)
            return HPolytope.box(bounds[:, 0], bounds[:, 1])
        if "A" in spec and "b" in spec:
            return HPolytope(np.asarray(spec["A"], dtype=float),
                             np.asarray(spec["b"], dtype=float))
    if isinstance(spec, (list, tuple)):
        bounds = np.asarray(spec, dtype=float)
        if bounds.ndim == 2 and bounds.shape[1] == 2:
            return HPolytope.box(bounds[:, 0], bounds[:, 1])
    raise ScenarioError(f"cannot interpret {what} geometry: {spec!r}")


def _union_from_config(spec, what) -> PolyUnion:
    if isinstance(spec, list) and spec and isinstance(spec[0], dict):
        return PolyUnion([_poly_from_config(s, what) for s in spec])
    return _poly_from_config(spec, what).to_union()


def build_scenario(config, tol=None) -> Scenario:
    """Validate a configuration (dict or JSON path) into a Scenario.

    When no explicit cells are given, an axis-aligned slab decomposition of
    the workspace is generated, refined against every observation region so
    each cell is entirely inside or outside each region.
    """
    tol = default_tol() if tol is None else tol
    if isinstance(config, str):
        config = load_json(config)
    if not isinstance(config, dict):
        raise ScenarioError("scenario config must be a dict or a JSON path")
    config = copy.deepcopy(config)  # the fingerprint must not track caller edits

    X = _poly_from_config(config.get("workspace"), "workspace")
    if X.dim != 2:
        raise ScenarioError("workspace must be two-dimensional")
    U = _poly_from_config(config.get("input_set"), "input_set")
    if U.dim != 2:
        raise ScenarioError("input set must be two-dimensional")
    Ts = float(config.get("sampling_time", 1.0))
    if Ts <= 0:
        raise ScenarioError("sampling time must be positive")

    lo, hi = U.bounding_box()
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ScenarioError("input set must be bounded")
    if not U.contains(np.zeros(2), tol)[0]:
        logger.warning("input set does not contain the origin; loitering is impossible")

    parts = []
    for pc in config.get("parts", []):
        obs = _union_from_config(pc["obs"], f"part {pc.get('id')} observation region")
        a_min, a_max = (float(v) for v in pc["a"])
        b_min, b_max = (float(v) for v in pc["b"])
        if not (0.0 < a_min <= a_max < 1.0):
            raise ScenarioError(f"decay interval [{a_min}, {a_max}] must lie in (0, 1)")
        if not (1.0 < b_min <= b_max):
            raise ScenarioError(f"growth interval [{b_min}, {b_max}] must lie in (1, inf)")
        z_crit = float(pc["z_crit"])
        if z_crit <= 0:
            raise ScenarioError("z_crit must be positive")
        if not union_subset(obs, X, tol):
            raise ScenarioError(f"observation region of part {pc.get('id')} exceeds the workspace")
        parts.append(Part(str(pc["id"]), obs, a_min, a_max, b_min, b_max,
                          z_crit, float(pc.get("z_init", 0.0))))
    if not parts:
        raise ScenarioError("scenario needs at least one part")
    ids = [p.id for p in parts]
    if len(set(ids)) != len(ids):
        raise ScenarioError("duplicate part ids")

    if config.get("cells"):
        cells = [Cell(str(c["id"]), _poly_from_config(c, f"cell {c.get('id')}"))
                 for c in config["cells"]]
    else:
        cells = _auto_cells(X, parts, tol)
    _validate_cells(X, cells, parts, tol)

    return Scenario(X, tuple(cells), tuple(parts), U, Ts, config=config)


def _auto_cells(X, parts, tol):
    """Slab decomposition of X refined against every observation region."""
    cells = [X]
    for part in parts:
        for obs in part.obs_region.parts:
            refined = []
            for cell in cells:
                inter = cell.intersect(obs, tol)
                if inter.is_empty(tol):
                    refined.append(cell)
                elif cell.is_subset_of(obs, tol):
                    refined.append(cell)
                else:
                    refined.append(inter)
                    refined.extend(region_diff(cell, obs, tol).parts)
            cells = refined
    return [Cell(f"c{i}", poly) for i, poly in enumerate(cells)]


def _validate_cells(X, cells, parts, tol):
    union = PolyUnion([c.poly for c in cells], 2)
    if not union_subset(X, union, tol):
        raise ScenarioError("cells do not cover the workspace")
    if not union_subset(union, X, tol):
        raise ScenarioError("cells extend beyond the workspace")
    for i, c in enumerate(cells):
        for d in cells[i + 1 :]:
            if not c.poly.intersect(d.poly, tol).is_empty(tol):
                raise ScenarioError(f"cells {c.id} and {d.id} overlap")
    for c in cells:
        for part in parts:
            inside = union_subset(c.poly, part.obs_region, tol)
            touches = any(not c.poly.intersect(o, tol).is_empty(tol)
                          for o in part.obs_region.parts)
            if touches and not inside:
                raise ScenarioError(
                    f"cell {c.id} straddles the observation region of part {part.id}")


# -- mode structure ---------------------------------------------------------


def _cells_in_scope(scenario, cell_ids):
    if cell_ids is None:
        return list(scenario.cells)
    return [scenario.cell(cid) for cid in cell_ids]


def build_modes(scenario, part_ids=None, cell_ids=None, merge=True,
                factors=None, tol=None):
    """Guarded modes for the subsystem over the given part subset.

    One mode per in-scope cell, with the factor vector assembled from each
    part's observation status (a_max when the cell is observed, b_max
    otherwise; `factors` overrides the vertex per part as (a, b) pairs).
    Adjacent cells with identical factor vectors are merged whenever their
    union is exactly convex, which is what collapses a single-part system to
    its observed/unobserved modes.
    """
    tol = default_tol() if tol is None else tol
    part_ids = scenario.part_ids if part_ids is None else tuple(str(i) for i in part_ids)
    if not part_ids:
        raise ScenarioError("mode construction needs a nonempty part subset")
    parts = [scenario.part(pid) for pid in part_ids]
    entries = []
    for cell in _cells_in_scope(scenario, cell_ids):
        observed = tuple(union_subset(cell.poly, p.obs_region, tol) for p in parts)
        fac = []
        for p, obs in zip(parts, observed):
            a, b = (p.a_max, p.b_max) if factors is None else factors[p.id]
            fac.append(a if obs else b)
        entries.append((cell.poly, tuple(fac), observed, (cell.id,)))
    if merge:
        entries = _merge_same_factor(entries, tol)
    return [Mode(guard, fac, obs, cids) for guard, fac, obs, cids in entries]


def _merge_same_factor(entries, tol):
    entries = list(entries)
    changed = True
    while changed:
        changed = False
        for i in range(len(entries)):
            for j in range(i + 1, len(entries)):
                if entries[i][1] != entries[j][1]:
                    continue
                merged = try_merge(entries[i][0], entries[j][0], tol)
                if merged is not None:
                    gi, fac, obs, ci = entries[i]
                    cj = entries[j][3]
                    entries[i] = (merged, fac, obs, ci + cj)
                    entries.pop(j)
                    changed = True
                    break
            if changed:
                break
    return entries


def unobserved_cells(scenario, part_id, cell_ids=None, merge=True, tol=None):
    """Guards of the part's unobserved modes (merged where convex)."""
    modes = build_modes(scenario, [part_id], cell_ids=cell_ids, merge=merge, tol=tol)
    return [m.guard for m in modes if not m.observed[0]]


# -- dynamics ---------------------------------------------------------------


class GuardError(ValueError):
    pass


def successor(state: JointState, next_u, mode: Mode, scenario: Scenario,
              tol=None) -> JointState:
    """One step of the hybrid dynamics under the given mode."""
    tol = default_tol() if tol is None else tol
    inside, _ = mode.guard.contains(state.x, tol)
    if not inside:
        actual = scenario.active_cell(state.x, tol)
        raise GuardError(
            f"state x={state.x} violates the mode guard; it lies in cell {actual.id}")
    if len(state.z) != len(mode.factors):
        raise GuardError("uncertainty vector does not match the mode's part subset")
    x_next = state.x + scenario.Ts * state.u
    z_next = np.asarray(mode.factors) * state.z
    return JointState(x_next, z_next, np.asarray(next_u, dtype=float))
