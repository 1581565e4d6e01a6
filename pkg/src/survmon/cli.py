"""Command-line front end: synth / simulate / monitor / verify.

Exit codes: 0 success, 1 input error, 2 non-convergence or a failed
assertion. All persisted artifacts are canonical JSON (traces as JSON
Lines, plot data as CSV); wall-clock measurements live in "timing" objects
so reruns with the same config and seed are byte-identical elsewhere.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time

import numpy as np

from .monitor import MonitorOptions, Sample, compile_invariants, csv_rows, run_trace
from .scenario import build_modes, build_scenario
from .serialize import canonical_dump, load_json, load_jsonl
from .sim import FaultSpec, PolicyParams, simulate
from .synthesis import (InvariantSet, SynthOptions, check_composition, synthesize,
                        verify_maximality, verify_one_step_closure)

_QUANT_FLAGS = {"exists": "exists", "forall-admissible": "forall_admissible",
                "forall-raw": "forall_raw"}


class InputError(ValueError):
    pass


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser():
    p = argparse.ArgumentParser(prog="survmon",
                                description="invariant-set monitoring for persistent surveillance")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("synth", help="synthesize invariant sets offline")
    ps.add_argument("--scenario", required=True)
    ps.add_argument("--parts", default="all", help='comma-separated part ids or "all"')
    ps.add_argument("--mode", choices=["compositional", "full"], default="compositional")
    ps.add_argument("--quant", choices=sorted(_QUANT_FLAGS), default="exists")
    ps.add_argument("--tol", type=float, default=1e-7)
    ps.add_argument("--max-iters", type=int, default=200)
    ps.add_argument("--vertex-strategy", choices=["worst-case", "all-vertices"],
                    default="worst-case")
    ps.add_argument("--threads", type=int, default=1)
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=cmd_synth)

    pm = sub.add_parser("simulate", help="run the closed-loop simulator")
    pm.add_argument("--scenario", required=True)
    pm.add_argument("--steps", type=int, default=300)
    pm.add_argument("--seed", type=int, default=0)
    pm.add_argument("--fault", action="append", default=[],
                    help='e.g. "loiter@50:cell=mid", repeatable')
    pm.add_argument("--factor-mode", choices=["sampled", "worst-case"], default="sampled")
    pm.add_argument("--input-noise", type=float, default=0.0,
                    help="bound of the tracking-error perturbation on applied inputs")
    pm.add_argument("--z-target", type=float, default=1.0)
    pm.add_argument("--band", type=float, default=0.2)
    pm.add_argument("--tau-min", type=float, default=5.0)
    pm.add_argument("--waypoint-tol", type=float, default=0.1)
    pm.add_argument("--out", required=True)
    pm.set_defaults(func=cmd_simulate)

    pn = sub.add_parser("monitor", help="check a trace against invariants")
    pn.add_argument("--scenario", required=True)
    pn.add_argument("--invariants", required=True, help="directory or file list")
    pn.add_argument("--trace", required=True)
    pn.add_argument("--hysteresis", type=int, default=1)
    pn.add_argument("--eta", type=float, default=0.0)
    pn.add_argument("--anticipate", action="store_true")
    pn.add_argument("--no-input", action="store_true",
                    help="ignore measured inputs (quantified-offline checks)")
    pn.add_argument("--grace", type=int, default=30)
    pn.add_argument("--repeats", type=int, default=1,
                    help="latency measurement repeats (median reported)")
    pn.add_argument("--out", required=True)
    pn.add_argument("--csv", default=None)
    pn.set_defaults(func=cmd_monitor)

    pv = sub.add_parser("verify", help="invariance/maximality/composition checks")
    pv.add_argument("check", choices=["closure", "maximality", "composition"])
    pv.add_argument("--scenario", required=True)
    pv.add_argument("--invariants", nargs="+", required=True)
    pv.add_argument("--samples", type=int, default=1000)
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--grid", type=float, default=0.25)
    pv.add_argument("--horizon", type=int, default=20)
    pv.add_argument("--tol", type=float, default=1e-6)
    pv.add_argument("--full", default=None,
                    help="full-system invariant file (composition check)")
    pv.add_argument("--out", default=None)
    pv.set_defaults(func=cmd_verify)
    return p


def _load_scenario(path):
    if not os.path.exists(path):
        raise InputError(f"scenario file {path} does not exist")
    return build_scenario(path)


def _invariant_paths(spec):
    if os.path.isdir(spec):
        paths = sorted(os.path.join(spec, f) for f in os.listdir(spec)
                       if f.startswith("invariant") and f.endswith(".json"))
        if not paths:
            raise InputError(f"no invariant files in {spec}")
        return paths
    return [spec]


def _load_invariants(spec):
    return [InvariantSet.from_dict(load_json(p)) for p in _invariant_paths(spec)]


def cmd_synth(args):
    scenario = _load_scenario(args.scenario)
    part_ids = list(scenario.part_ids) if args.parts == "all" else \
        [p.strip() for p in args.parts.split(",")]
    opts = SynthOptions(tol=args.tol, max_iters=args.max_iters,
                        input_quant=_QUANT_FLAGS[args.quant],
                        vertex_strategy=args.vertex_strategy.replace("-", "_"))
    os.makedirs(args.out, exist_ok=True)
    jobs = [part_ids] if args.mode == "full" else [[pid] for pid in part_ids]

    def run(job):
        return synthesize(scenario, job, opts)

    if args.threads > 1 and len(jobs) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]

    all_converged = True
    report = {"scenario": scenario.fingerprint(), "mode": args.mode,
              "quantifier": opts.input_quant, "runs": [], "timing": {}}
    total = 0.0
    for job, (inv, rep) in zip(jobs, results):
        name = "invariant_full.json" if args.mode == "full" else \
            f"invariant_part_{job[0]}.json"
        payload = inv.to_dict()
        payload["report"] = rep.to_dict(with_timing=False)
        canonical_dump(payload, os.path.join(args.out, name))
        all_converged &= inv.converged
        total += rep.timing["wall_s"]
        degenerate = len(inv.set.parts) == 0
        report["runs"].append({"parts": job, "file": name, "degenerate": degenerate,
                               **rep.to_dict(with_timing=False)})
        report["timing"][name] = {"wall_s": rep.timing["wall_s"]}
        counts = f"polytopes={rep.polytope_counts[-1] if rep.polytope_counts else 0}"
        print(f"{name}: iters={rep.iterations} converged={inv.converged} {counts} "
              f"facets={inv.set.n_facets} wall={rep.timing['wall_s']:.2f}s")
        if degenerate:
            print(f"warning: {name} is the empty set (degenerate invariant)",
                  file=sys.stderr)
    report["timing"]["total_wall_s"] = total
    canonical_dump(report, os.path.join(args.out, "synth_report.json"))
    if not all_converged:
        print("warning: iteration cap reached before the fixed point", file=sys.stderr)
        return 2
    return 0


def cmd_simulate(args):
    scenario = _load_scenario(args.scenario)
    faults = [FaultSpec.parse(f) for f in args.fault]
    params = PolicyParams(z_target=args.z_target, band=args.band,
                          tau_min=args.tau_min, waypoint_tol=args.waypoint_tol)
    trace, truth = simulate(scenario, params, faults, steps=args.steps,
                            seed=args.seed,
                            factor_mode=args.factor_mode.replace("-", "_"),
                            input_noise=args.input_noise)
    os.makedirs(args.out, exist_ok=True)
    from .serialize import dump_jsonl
    dump_jsonl([s.to_dict() for s in trace], os.path.join(args.out, "trace.jsonl"))
    dump_jsonl(truth, os.path.join(args.out, "truth.jsonl"))
    config = {"scenario": scenario.fingerprint(), "steps": args.steps,
              "seed": args.seed, "faults": [f.label() for f in faults],
              "factor_mode": args.factor_mode, "input_noise": args.input_noise,
              "policy": {"z_target": args.z_target, "band": args.band,
                         "tau_min": args.tau_min, "waypoint_tol": args.waypoint_tol}}
    canonical_dump(config, os.path.join(args.out, "run_config.json"))
    print(f"wrote {len(trace)} samples to {args.out}/trace.jsonl")
    return 0


def cmd_monitor(args):
    scenario = _load_scenario(args.scenario)
    invariants = _load_invariants(args.invariants)
    compiled = compile_invariants(invariants, scenario)
    trace = [Sample.from_dict(d) for d in load_jsonl(args.trace)]
    opts = MonitorOptions(hysteresis_m=args.hysteresis, margin_eta=args.eta,
                          anticipate=args.anticipate,
                          u_mode="quantify_offline" if args.no_input else "use_measured",
                          grace_window=args.grace)
    reports = []
    for _ in range(max(1, args.repeats)):
        reports.append(run_trace(compiled, trace, opts, scenario))
    report = reports[0]
    med = float(np.median([r.latency["median_s"] for r in reports]))
    report.latency["median_s"] = med
    canonical_dump(report.to_dict(), args.out)
    if args.csv:
        keys = ["+".join(ci.part_ids) for ci in compiled]
        with open(args.csv, "w", newline="") as fh:
            csv.writer(fh).writerows(csv_rows(report, keys))
    print(f"alerts={len(report.alerts)} false_alerts={report.false_alerts} "
          f"lead_time={report.lead_time} median_check={med*1e3:.3f}ms")
    return 0


def cmd_verify(args):
    scenario = _load_scenario(args.scenario)
    invariants = _load_invariants(args.invariants[0]) if len(args.invariants) == 1 \
        else [InvariantSet.from_dict(load_json(p)) for p in args.invariants]
    failed = False
    out = {"check": args.check, "results": []}
    if args.check == "closure":
        for inv in invariants:
            modes = build_modes(scenario, inv.part_ids)
            rep = verify_one_step_closure(inv, modes, scenario,
                                          samples=args.samples, seed=args.seed)
            out["results"].append({"parts": list(inv.part_ids), **rep.to_dict()})
            print(f"closure {'+'.join(inv.part_ids)}: pass fraction {rep.pass_fraction}")
            if rep.pass_fraction < 1.0:
                failed = True
    elif args.check == "maximality":
        for inv in invariants:
            modes = build_modes(scenario, inv.part_ids)
            rep = verify_maximality(inv, modes, scenario,
                                    grid_resolution=args.grid, horizon=args.horizon)
            out["results"].append({"parts": list(inv.part_ids), **rep.to_dict()})
            print(f"maximality {'+'.join(inv.part_ids)}: certified {rep.n_certified}"
                  f"/{rep.n_excluded} excluded, contradictions {len(rep.contradictions)}")
            if rep.n_excluded and rep.n_certified == 0 and not rep.contradictions:
                print("warning: nothing certified (horizon too short?)", file=sys.stderr)
            if rep.contradictions:
                failed = True
    else:
        if not args.full:
            raise InputError("composition check needs --full")
        full = InvariantSet.from_dict(load_json(args.full))
        rep = check_composition(full, invariants, scenario, tol=args.tol)
        out["results"].append(rep.to_dict())
        print(f"composition: full⊆conjunction {rep.full_in_conjunction}, "
              f"conjunction⊆full {rep.conjunction_in_full}")
        if not rep.full_in_conjunction:
            failed = True
        if full.quantifier.startswith("forall") and not rep.conjunction_in_full:
            failed = True
    if args.out:
        canonical_dump(out, args.out)
    return 2 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
