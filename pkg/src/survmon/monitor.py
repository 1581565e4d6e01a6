"""Online compositional monitoring of measured traces.

Each sample (x, z_1..z_N, optional u) is checked against the per-part
invariant sets; health of part i is membership of (x, z_i, u) with margin at
least eta. Alerts are raised after a configurable number of consecutive
unhealthy verdicts per part, and an optional anticipatory check flags states
whose worst-case successor already leaves the set. A threshold baseline
(z_i >= z_crit) runs alongside for lead-time and false-alert accounting.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ._lp import default_tol
from .geometry import HPolytope
from .scenario import Scenario
from .synthesis import InvariantSet, input_section, union_subset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Sample:
    k: int
    t: float
    x: np.ndarray
    z: np.ndarray
    u: np.ndarray | None = None

    @classmethod
    def from_dict(cls, d):
        u = d.get("u")
        return cls(int(d["k"]), float(d["t"]), np.asarray(d["x"], dtype=float),
                   np.asarray(d["z"], dtype=float),
                   None if u is None else np.asarray(u, dtype=float))

    def to_dict(self):
        d = {"k": self.k, "t": self.t, "x": list(self.x), "z": list(self.z)}
        if self.u is not None:
            d["u"] = list(self.u)
        return d


@dataclass(frozen=True)
class MonitorOptions:
    hysteresis_m: int = 1
    margin_eta: float = 0.0
    anticipate: bool = False
    u_mode: str = "use_measured"
    grace_window: int = 30
    tol: float = None

    def __post_init__(self):
        if self.hysteresis_m < 1:
            raise ValueError("hysteresis_m must be at least 1")
        if self.margin_eta < 0:
            raise ValueError("margin_eta must be nonnegative")
        if self.u_mode not in ("use_measured", "quantify_offline"):
            raise ValueError(f"unknown u_mode {self.u_mode!r}")
        if self.tol is None:
            object.__setattr__(self, "tol", default_tol())


@dataclass
class Verdict:
    healthy: bool
    h: dict
    margins: dict
    alert_kind: str = "none"
    offending: list = field(default_factory=list)


@dataclass
class AlertEvent:
    k: int
    t: float
    kind: str
    parts: list
    margin: float

    def to_dict(self):
        return {"k": self.k, "t": self.t, "kind": self.kind,
                "parts": list(self.parts), "margin": self.margin}


@dataclass
class AlertReport:
    alerts: list = field(default_factory=list)
    lead_time: dict = field(default_factory=dict)
    baseline_crossing: dict = field(default_factory=dict)
    first_alert: dict = field(default_factory=dict)
    false_alerts: int = 0
    n_steps: int = 0
    latency: dict = field(default_factory=dict)
    per_step: list = field(default_factory=list)

    def to_dict(self):
        return {
            "alerts": [a.to_dict() for a in self.alerts],
            "lead_time": self.lead_time,
            "baseline_crossing": self.baseline_crossing,
            "first_alert": self.first_alert,
            "false_alerts": self.false_alerts,
            "n_steps": self.n_steps,
            "timing": self.latency,
        }


class CompiledInvariant:
    """Per-part invariant prepared for fast online membership.

    Parts are sorted by facet count and paired with bounding boxes for
    early rejection; the input-quantified section (u dropped under the
    invariant's own quantifier) is precomputed for input-free checks and
    for the anticipatory successor test.
    """

    def __init__(self, inv: InvariantSet, scenario: Scenario, tol=None):
        tol = default_tol() if tol is None else tol
        self.inv = inv
        self.part_ids = inv.part_ids
        order = sorted(inv.set.parts, key=lambda p: p.n_facets)
        self.parts = [(p, p.bounding_box()) for p in order]
        dropped = input_section(inv.set, scenario.U, inv.quantifier, scenario,
                                inv.part_ids, tol)
        self.dropped = [(p, p.bounding_box()) for p in
                        sorted(dropped.parts, key=lambda p: p.n_facets)]
        self.facet_ops = 0

    def margin(self, point, with_input):
        """Max-over-parts min facet slack; bounding boxes prune parts that
        cannot beat the best margin found so far."""
        parts = self.parts if with_input else self.dropped
        point = np.asarray(point, dtype=float)
        best = -np.inf
        for poly, (lo, hi) in parts:
            box_margin = min(np.min(point - lo), np.min(hi - point))
            if box_margin <= best:
                continue
            self.facet_ops += poly.n_facets
            m = float(poly.margins(point[None, :])[0])
            if m > best:
                best = m
        return best

    def margins_batch(self, points, with_input=True):
        parts = self.parts if with_input else self.dropped
        out = np.full(points.shape[0], -np.inf)
        for poly, _ in parts:
            np.maximum(out, poly.margins(points), out=out)
            self.facet_ops += poly.n_facets * points.shape[0]
        return out


class MonitorFrameError(ValueError):
    pass


def compile_invariants(invariants, scenario: Scenario, tol=None):
    compiled = []
    for inv in invariants:
        if inv.scenario_fingerprint != scenario.fingerprint():
            raise MonitorFrameError(
                "invariant fingerprint does not match the scenario")
        compiled.append(CompiledInvariant(inv, scenario, tol))
    return compiled


def _clamp_input(u, U: HPolytope):
    if U.contains(u, 1e-9)[0]:
        return u, False
    lo, hi = U.bounding_box()
    clamped = np.clip(u, lo, hi)
    if not U.contains(clamped, 1e-9)[0]:
        # non-box input set: shrink toward the origin
        scale = 1.0
        for a_row, b_row in zip(U.A, U.b):
            val = a_row @ clamped
            if val > b_row > 0:
                scale = min(scale, b_row / val)
        clamped = clamped * scale
    return clamped, True


def _worst_case_factors(scenario: Scenario, cell, part_ids, tol):
    out = {}
    for pid in part_ids:
        part = scenario.part(pid)
        observed = union_subset(cell.poly, part.obs_region, tol)
        out[pid] = part.a_max if observed else part.b_max
    return out


def check_sample(compiled, sample: Sample, opts: MonitorOptions,
                 scenario: Scenario, _cell_factors=None) -> Verdict:
    """Health verdict for one sample against each compiled invariant."""
    use_u = opts.u_mode == "use_measured"
    u = sample.u
    if use_u:
        if u is None:
            raise MonitorFrameError("u_mode=use_measured but the sample has no input")
        u, clamped = _clamp_input(np.asarray(u, dtype=float), scenario.U)
        if clamped:
            logger.warning("sample k=%d: measured input outside U, clamped", sample.k)
    h = {}
    margins = {}
    for ci in compiled:
        z_i = sample.z[[_part_index(scenario, pid) for pid in ci.part_ids]]
        if use_u:
            point = np.concatenate([sample.x, z_i, u])
        else:
            point = np.concatenate([sample.x, z_i])
        m = ci.margin(point, with_input=use_u)
        margins[_key(ci)] = m
        h[_key(ci)] = bool(m >= opts.margin_eta)
    healthy = all(h.values())
    verdict = Verdict(healthy=healthy, h=h, margins=margins)
    if not healthy:
        verdict.alert_kind = "violation"
        verdict.offending = [k for k, ok in h.items() if not ok]
        return verdict
    if opts.anticipate and sample.u is not None:
        cell = scenario.active_cell(sample.x, opts.tol)
        factors = _cell_factors[cell.id] if _cell_factors else \
            _worst_case_factors(scenario, cell, scenario.part_ids, opts.tol)
        x_next = sample.x + scenario.Ts * np.asarray(sample.u, dtype=float)
        bad = []
        for ci in compiled:
            idx = [_part_index(scenario, pid) for pid in ci.part_ids]
            z_next = np.array([factors[pid] for pid in ci.part_ids]) * sample.z[idx]
            m = ci.margin(np.concatenate([x_next, z_next]), with_input=False)
            if m < opts.margin_eta:
                bad.append(_key(ci))
        if bad:
            verdict.alert_kind = "imminent"
            verdict.offending = bad
    return verdict


def _key(ci: CompiledInvariant):
    return "+".join(ci.part_ids)


def _part_index(scenario, pid):
    return scenario.part_ids.index(pid)


def run_trace(invariants, trace, opts: MonitorOptions, scenario: Scenario) -> AlertReport:
    """Monitor a whole trace with hysteresis, baseline comparison and
    lead-time/false-alert accounting."""
    trace = list(trace)
    if not trace:
        raise ValueError("trace is empty")
    compiled = invariants if invariants and isinstance(invariants[0], CompiledInvariant) \
        else compile_invariants(invariants, scenario, opts.tol)
    cell_factors = {c.id: _worst_case_factors(scenario, c, scenario.part_ids, opts.tol)
                    for c in scenario.cells} if opts.anticipate else None
    report = AlertReport()
    consec = {_key(ci): 0 for ci in compiled}
    alerted = {_key(ci): False for ci in compiled}
    imminent_active = False
    z_crit = {p.id: p.z_crit for p in scenario.parts}
    step_times = []
    last_k = None
    for sample in trace:
        if last_k is not None and sample.k <= last_k:
            raise ValueError("trace step indices must be strictly increasing")
        last_k = sample.k
        t0 = time.perf_counter()
        verdict = check_sample(compiled, sample, opts, scenario, cell_factors)
        step_times.append(time.perf_counter() - t0)
        report.n_steps += 1

        # baseline: threshold rule on the measured uncertainties
        for pid in scenario.part_ids:
            zi = sample.z[_part_index(scenario, pid)]
            if zi >= z_crit[pid] and pid not in report.baseline_crossing:
                report.baseline_crossing[pid] = sample.t

        event_parts = []
        kind = None
        if verdict.alert_kind == "imminent":
            if not imminent_active:
                kind = "imminent"
                event_parts = list(verdict.offending)
            imminent_active = True
        else:
            imminent_active = False
        for key in consec:
            if not verdict.h[key]:
                consec[key] += 1
                if consec[key] >= opts.hysteresis_m and not alerted[key]:
                    alerted[key] = True
                    kind = "violation"
                    event_parts.append(key)
            else:
                consec[key] = 0
                alerted[key] = False
        if kind and event_parts:
            margin = min(verdict.margins.get(k, np.inf) for k in event_parts)
            report.alerts.append(AlertEvent(sample.k, sample.t, kind,
                                            sorted(set(event_parts)), margin))
            for key in event_parts:
                for pid in key.split("+"):
                    report.first_alert.setdefault(pid, sample.t)
        report.per_step.append({
            "k": sample.k, "t": sample.t,
            "margins": dict(verdict.margins), "h": dict(verdict.h),
            "alert": kind or "none",
        })

    for pid, t_cross in report.baseline_crossing.items():
        t_alert = report.first_alert.get(pid)
        if t_alert is not None:
            report.lead_time[pid] = t_cross - t_alert
    # false alerts: no baseline crossing at, before, or within the grace
    # window after the alert
    dt = _median_dt(report.per_step)
    for ev in report.alerts:
        ok = False
        for key in ev.parts:
            for pid in key.split("+"):
                t_cross = report.baseline_crossing.get(pid)
                if t_cross is not None and t_cross <= ev.t + opts.grace_window * dt:
                    ok = True
        if not ok:
            report.false_alerts += 1
    if step_times:
        arr = np.asarray(step_times)
        report.latency = {
            "median_s": float(np.median(arr)),
            "mean_s": float(np.mean(arr)),
            "max_s": float(np.max(arr)),
            "facet_ops": int(sum(ci.facet_ops for ci in compiled)),
        }
    return report


def _median_dt(per_step):
    if len(per_step) < 2:
        return 1.0
    ts = [row["t"] for row in per_step]
    return float(np.median(np.diff(ts)))


def csv_rows(report: AlertReport, part_keys):
    """Per-step margin table for external plotting."""
    header = ["k", "t"] + [f"margin_{k}" for k in part_keys] + \
             [f"h_{k}" for k in part_keys] + ["alert"]
    rows = [header]
    for row in report.per_step:
        rows.append([row["k"], row["t"]]
                    + [row["margins"][k] for k in part_keys]
                    + [int(row["h"][k]) for k in part_keys]
                    + [row["alert"]])
    return rows
