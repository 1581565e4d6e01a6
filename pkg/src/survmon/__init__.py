"""Invariant-set runtime monitoring for persistent surveillance.

Offline, `synthesize` computes maximal invariant sets of the patrol hybrid
model by polyhedral fixed-point iteration; online, `run_trace` (or the
scikit-learn style `SurveillanceMonitor`) checks measured samples against
the per-part sets and raises anticipatory alerts.
"""

from .geometry import ChebyshevBall, HPolytope, PolyUnion, region_diff, union_subset
from .scenario import (JointState, Mode, Scenario, ScenarioError, build_modes,
                       build_scenario, successor, unobserved_cells)
from .synthesis import (Frame, InvariantSet, SynthOptions, SynthesisReport,
                        check_composition, conjunction, input_section, pre_mode,
                        rpi_fixed_point, synthesize, verify_maximality,
                        verify_one_step_closure)
from .monitor import (AlertReport, MonitorOptions, Sample, Verdict,
                      check_sample, compile_invariants, run_trace)
from .sim import FaultSpec, PolicyParams, SimState, adapt_decay, policy_decide, simulate
from .estimator import SurveillanceMonitor

__version__ = "0.1.0"

__all__ = [
    "AlertReport", "ChebyshevBall", "FaultSpec", "Frame", "HPolytope",
    "InvariantSet", "JointState", "Mode", "MonitorOptions", "PolicyParams",
    "PolyUnion", "Sample", "Scenario", "ScenarioError", "SimState",
    "SurveillanceMonitor", "SynthOptions", "SynthesisReport", "Verdict",
    "adapt_decay", "build_modes", "build_scenario", "check_composition",
    "check_sample", "compile_invariants", "conjunction", "input_section",
    "policy_decide", "pre_mode", "region_diff", "rpi_fixed_point", "run_trace",
    "simulate", "successor", "synthesize", "union_subset", "unobserved_cells",
    "verify_maximality", "verify_one_step_closure",
]
