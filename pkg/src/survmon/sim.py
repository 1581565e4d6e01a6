"""Deterministic closed-loop simulator: greedy patrol, faults, traces.

The robot is a single integrator steered by an uncertainty-greedy policy:
pick the part with the largest uncertainty (subject to a hysteresis band and
a minimum inter-visit time), head for the center of its observation region,
dwell until the uncertainty drops below the target level, reselect. Per-part
uncertainties evolve multiplicatively with factors drawn from the scenario
intervals; observed-decay factors can adapt to detection counts. Faults
override the input (loiter, freeze) or the recorded uncertainties (spoof).
Runs are fully reproducible from the seed.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

import numpy as np

from ._lp import default_tol
from .geometry import union_subset
from .monitor import Sample
from .scenario import Scenario

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PolicyParams:
    z_target: float | dict = 1.0
    band: float = 0.2
    tau_min: float = 5.0
    waypoint_tol: float = 0.1

    def __post_init__(self):
        targets = self.z_target.values() if isinstance(self.z_target, dict) \
            else [self.z_target]
        if any(t < 0 for t in targets):
            raise ValueError("z_target must be nonnegative")
        if self.tau_min < 0:
            raise ValueError("tau_min must be nonnegative")

    def target_for(self, part_id):
        if isinstance(self.z_target, dict):
            return float(self.z_target[part_id])
        return float(self.z_target)


@dataclass(frozen=True)
class FaultSpec:
    kind: str
    activation: int
    cell_id: str | None = None
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in ("loiter", "freeze", "spoof_z"):
            raise ValueError(f"unknown fault kind {self.kind!r}")
        if self.activation < 0:
            raise ValueError("fault activation step must be nonnegative")

    @classmethod
    def parse(cls, text):
        """Parse "kind@step[:key=value,...]", e.g. "loiter@50:cell=mid"."""
        m = re.fullmatch(r"(\w+)@(\d+)(?::(.*))?", text.strip())
        if not m:
            raise ValueError(f"cannot parse fault spec {text!r}")
        kind, step, rest = m.group(1), int(m.group(2)), m.group(3)
        kwargs = {}
        if rest:
            for item in rest.split(","):
                key, _, val = item.partition("=")
                if key == "cell":
                    kwargs["cell_id"] = val
                elif key == "offset":
                    kwargs["offset"] = float(val)
                else:
                    raise ValueError(f"unknown fault parameter {key!r}")
        return cls(kind, step, **kwargs)

    def label(self):
        extra = ""
        if self.cell_id:
            extra += f":cell={self.cell_id}"
        if self.offset:
            extra += f":offset={self.offset}"
        return f"{self.kind}@{self.activation}{extra}"


@dataclass
class SimState:
    x: np.ndarray
    z: np.ndarray
    target: str | None = None
    last_visit_end: dict = field(default_factory=dict)
    detections: dict = field(default_factory=dict)       # part -> C_i this visit
    prev_detections: dict = field(default_factory=dict)  # part -> C_i last visit
    decay: dict = field(default_factory=dict)            # part -> adapted a_i
    inside: dict = field(default_factory=dict)           # part -> was observed last step
    counted_cells: dict = field(default_factory=dict)    # part -> cells counted this visit


def adapt_decay(c_prev, c_now, a_min, a_max, r_max=2.0):
    """Map the detection ratio monotonically into the decay interval.

    a = clip(a_min + (min(r, r_max) - 1) / (r_max - 1) * (a_max - a_min))
    with r = c_now / c_prev; more detections push the decay factor toward
    a_max, i.e. uncertainty decays more slowly.
    """
    if r_max <= 1:
        raise ValueError("r_max must exceed 1")
    if c_prev <= 0:
        logger.warning("adapt_decay called with nonpositive C_prev; using a_min")
        return a_min
    r = c_now / c_prev
    a = a_min + (min(r, r_max) - 1.0) / (r_max - 1.0) * (a_max - a_min)
    return float(np.clip(a, a_min, a_max))


def _obs_center(scenario, part):
    best = max(part.obs_region.parts, key=lambda p: p.chebyshev_ball().radius)
    return best.chebyshev_ball().center


def policy_decide(state: SimState, scenario: Scenario, params: PolicyParams,
                  now: float = 0.0) -> np.ndarray:
    """Uncertainty-greedy patrol input (proportional step clamped to U)."""
    parts = scenario.parts
    idx = {p.id: i for i, p in enumerate(parts)}
    if state.target is not None:
        part = scenario.part(state.target)
        center = _obs_center(scenario, part)
        if np.max(np.abs(state.x - center)) <= params.waypoint_tol and \
                state.z[idx[state.target]] <= params.target_for(state.target):
            state.last_visit_end[state.target] = now
            state.target = None
    if state.target is None:
        eligible = [p for p in parts
                    if now - state.last_visit_end.get(p.id, -np.inf) >= params.tau_min]
        if eligible:
            best = max(eligible, key=lambda p: (state.z[idx[p.id]], p.id))
            # hysteresis band: a new target must beat the incumbent clearly
            ranked = sorted(eligible, key=lambda p: state.z[idx[p.id]], reverse=True)
            chosen = ranked[0]
            for cand in ranked:
                if state.z[idx[cand.id]] >= state.z[idx[chosen.id]] - params.band \
                        and cand.id < chosen.id:
                    chosen = cand
            state.target = chosen.id
    if state.target is None:
        return np.zeros(2)
    center = _obs_center(scenario, scenario.part(state.target))
    step = (center - state.x) / scenario.Ts
    lo, hi = scenario.U.bounding_box()
    return np.clip(step, lo, hi)


def _draw_factor(rng, lo, hi, mode):
    if mode == "worst_case":
        return hi
    return float(rng.uniform(lo, hi))


def _clamp_to_workspace(x, scenario):
    lo, hi = scenario.workspace.bounding_box()
    return np.clip(x, lo, hi)


def simulate(scenario: Scenario, params: PolicyParams = None, faults=(),
             steps: int = 300, seed: int = 0, factor_mode: str = "sampled",
             objects=None, start=None, input_noise: float = 0.0, tol=None):
    """Run the closed loop; returns (trace, truth) lists.

    The trace holds monitor-ready samples (x, z, u per step, pre-update);
    the truth sidecar records the active cell, the drawn factors and the
    fault flag. Recorded z differs from ground truth only under a spoof
    fault. `input_noise` emulates local tracking error: the motion applies
    the commanded input plus a uniform perturbation bounded by it (the
    offline input set is expected to be inflated accordingly).
    """
    if steps < 1:
        raise ValueError("need at least one step")
    if factor_mode not in ("worst_case", "sampled"):
        raise ValueError(f"unknown factor mode {factor_mode!r}")
    tol = default_tol() if tol is None else tol
    params = PolicyParams() if params is None else params
    sim_cfg = scenario.config.get("sim", {})
    if objects is None:
        objects = sim_cfg.get("objects", {})
    if start is None:
        start = sim_cfg.get("start")
    x0 = np.asarray(start, dtype=float) if start is not None \
        else scenario.workspace.chebyshev_ball().center
    rng = np.random.default_rng(seed)
    state = SimState(x=np.array(x0, dtype=float),
                     z=np.array([p.z_init for p in scenario.parts], dtype=float))
    for p in scenario.parts:
        state.decay[p.id] = p.a_max
        state.inside[p.id] = False
    observed_cache = {}

    def observed(cell, part):
        key = (cell.id, part.id)
        if key not in observed_cache:
            observed_cache[key] = union_subset(cell.poly, part.obs_region, tol)
        return observed_cache[key]

    trace, truth = [], []
    for k in range(steps):
        now = k * scenario.Ts
        cell = scenario.active_cell(state.x, tol)
        active_faults = [f for f in faults if k >= f.activation]
        fault_active = bool(active_faults)

        factors = np.empty(len(scenario.parts))
        for i, part in enumerate(scenario.parts):
            if observed(cell, part):
                if not state.inside[part.id]:
                    # re-entry: update the adaptive decay from detection counts
                    c_prev = state.prev_detections.get(part.id, 0)
                    c_now = state.detections.get(part.id, 0)
                    if c_prev > 0 and c_now > 0:
                        state.decay[part.id] = adapt_decay(
                            c_prev, c_now, part.a_min, part.a_max)
                    if c_now > 0:
                        state.prev_detections[part.id] = c_now
                    state.detections[part.id] = 0
                    state.counted_cells[part.id] = set()
                    state.inside[part.id] = True
                if cell.id in objects and cell.id not in state.counted_cells[part.id]:
                    state.detections[part.id] = state.detections.get(part.id, 0) \
                        + int(objects[cell.id])
                    state.counted_cells[part.id].add(cell.id)
                hi = state.decay[part.id] if factor_mode == "sampled" else part.a_max
                factors[i] = _draw_factor(rng, part.a_min, hi, factor_mode)
            else:
                state.inside[part.id] = False
                factors[i] = _draw_factor(rng, part.b_min, part.b_max, factor_mode)

        u = policy_decide(state, scenario, params, now)
        for f in active_faults:
            if f.kind == "freeze":
                u = np.zeros(2)
            elif f.kind == "loiter":
                pin = scenario.cell(f.cell_id).poly if f.cell_id else cell.poly
                center = pin.chebyshev_ball().center
                inside_pin, _ = pin.contains(state.x, tol)
                u = np.zeros(2) if inside_pin and \
                    np.max(np.abs(state.x - center)) <= params.waypoint_tol else \
                    np.clip((center - state.x) / scenario.Ts,
                            *scenario.U.bounding_box())
        z_rec = state.z.copy()
        for f in active_faults:
            if f.kind == "spoof_z":
                z_rec = z_rec + f.offset
        trace.append(Sample(k=k, t=now, x=state.x.copy(), z=z_rec, u=np.array(u)))
        truth.append({"k": k, "cell": cell.id, "factors": factors.tolist(),
                      "z_true": state.z.tolist(), "fault_active": fault_active})

        state.z = factors * state.z
        applied = u if input_noise == 0.0 else \
            u + rng.uniform(-input_noise, input_noise, size=2)
        state.x = _clamp_to_workspace(state.x + scenario.Ts * applied, scenario)
    return trace, truth
