"""Batch front end: deterministic file-producing commands.

Subcommands: profile, evans, wind, hfbound, zero-ea, sweep.  Every command
reads a JSON config, writes CSV/JSON outputs under --out, and exits with
0 (success), 2 (validation), 3 (numerical failure), or 4 (uncertified
winding).  Reruns with identical configs produce byte-identical files; the
pipeline contains no randomness.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import itertools
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import model, zero_ea
from .errors import (
    InvalidParameterError,
    NearZeroOnContourError,
    NumericalError,
    UncertifiedWindingError,
)
from .model import ModelParams, q_max, validate
from .profile import ProfileSolution, solve_profile
from .spectral import EvansSolver, EvansTrace, SpectralSystem, hf_bound
from .winding import build_contour, stability_report, winding_number
from .zero_ea import ZeroEaProfile, _NoConnection, bench_frontier, solve_zero_ea_profile, zero_ea_system

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_UNCERTIFIED = 4

SCHEMA_VERSION = 1

# 25-point heat-release grid used throughout the experiments (u_plus = 0);
# for other unburned states it is rescaled by q_max(u_plus) / 0.5
BASE_Q_GRID = (
    0.001, 0.005, 0.01, 0.025, 0.05, 0.1, 0.125, 0.2, 0.25, 0.3, 0.32,
    0.37, 0.40, 0.425, 0.44, 0.45, 0.46, 0.47, 0.48, 0.485, 0.49,
    0.492, 0.494, 0.496, 0.499,
)

DEFAULT_FEASIBILITY = 1e5
ZERO_EA_DEFAULT_RADIUS = 10.0


def auto_q_grid(u_plus: float) -> list[float]:
    scale = q_max(u_plus) / 0.5
    return [q * scale for q in BASE_Q_GRID]


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _params_from_config(cfg: dict) -> ModelParams:
    if "params" not in cfg:
        raise InvalidParameterError("config must contain a 'params' object")
    return ModelParams.from_dict(cfg["params"])


# ---------------------------------------------------------------------------
# single-point pipeline

@dataclass
class PointResult:
    params: ModelParams
    profile_meta: dict
    bound: dict | None
    radius: float
    radius_perturbed: bool
    trace: EvansTrace
    winding: object
    verdict: dict


def evans_pipeline(prof, *, radius=None, nodes=120, feasibility=DEFAULT_FEASIBILITY) -> PointResult:
    """Bound, contour, trace, certified winding for a solved wave."""
    if isinstance(prof, ZeroEaProfile):
        bound = None
        R = radius if radius is not None else ZERO_EA_DEFAULT_RADIUS
        system = zero_ea_system(prof)
        L = M = None
    else:
        hb = hf_bound(prof)
        bound = hb.to_json_dict()
        L, M = hb.L, hb.M
        R = radius if radius is not None else hb.R
        system = SpectralSystem.from_profile(prof)
    if R > feasibility:
        raise NumericalError(
            f"required contour radius {R:.3g} exceeds the feasibility threshold {feasibility:.3g}")

    perturbed = False
    last_err = None
    for factor in (1.0, 1.02, 0.98):
        ev = EvansSolver(system)
        contour = build_contour(R * factor, nodes)
        trace = ev.trace(contour)
        try:
            res = winding_number(trace, refine=ev.refiner(contour))
        except NearZeroOnContourError as err:
            last_err = err
            perturbed = True
            continue
        verdict = stability_report(prof.params, R * factor, res, L=L, M=M)
        verdict["radius_perturbed"] = factor != 1.0
        return PointResult(params=prof.params, profile_meta=prof.meta_dict(),
                           bound=bound, radius=R * factor, radius_perturbed=factor != 1.0,
                           trace=trace, winding=res, verdict=verdict)
    raise last_err


def solve_any_profile(p: ModelParams, guess=None, domain=None):
    """Route to the smooth or step-ignition solver on ea."""
    if p.ea == 0:
        return solve_zero_ea_profile(p)
    return solve_profile(p, guess=guess, domain=domain)


# ---------------------------------------------------------------------------
# commands

def cmd_profile(cfg: dict, out: str, args) -> int:
    p = _params_from_config(cfg)
    diag = validate(p)
    if not diag.ok:
        _dump_json({"schema_version": SCHEMA_VERSION, "error": "; ".join(diag.issues)},
                   os.path.join(out, "error.json"))
        print("validation failed:", "; ".join(diag.issues), file=sys.stderr)
        return EXIT_VALIDATION
    try:
        prof = solve_any_profile(p, domain=cfg.get("domain"))
    except _NoConnection as err:
        err.profile.to_csv(os.path.join(out, "profile.csv"))
        err.profile.to_json(os.path.join(out, "profile.json"))
        print(f"no connection: {err.classification}", file=sys.stderr)
        return EXIT_NUMERICAL
    except NumericalError as err:
        print(f"profile solve failed: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    prof.to_csv(os.path.join(out, "profile.csv"))
    prof.to_json(os.path.join(out, "profile.json"))
    return EXIT_OK


def cmd_evans(cfg: dict, out: str, args) -> int:
    p = _params_from_config(cfg)
    diag = validate(p)
    if not diag.ok:
        print("validation failed:", "; ".join(diag.issues), file=sys.stderr)
        return EXIT_VALIDATION
    nodes = cfg.get("contour", {}).get("nodes", 120)
    try:
        prof = solve_any_profile(p)
        result = evans_pipeline(prof, radius=args.radius, nodes=nodes)
    except UncertifiedWindingError as err:
        print(f"uncertified winding: {err}", file=sys.stderr)
        return EXIT_UNCERTIFIED
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    result.trace.to_csv(os.path.join(out, "evans_trace.csv"))
    _dump_json(result.verdict, os.path.join(out, "verdict.json"))
    if not result.winding.certified:
        return EXIT_UNCERTIFIED
    return EXIT_OK


def cmd_wind(cfg: dict, out: str, args) -> int:
    trace_path = cfg.get("trace") or getattr(args, "trace", None)
    if not trace_path:
        print("wind requires a 'trace' CSV path in the config", file=sys.stderr)
        return EXIT_VALIDATION
    trace = EvansTrace.from_csv(trace_path)
    try:
        res = winding_number(trace, refine=None)
    except (UncertifiedWindingError, NearZeroOnContourError) as err:
        print(f"uncertified: {err}", file=sys.stderr)
        return EXIT_UNCERTIFIED
    rec = {
        "schema_version": SCHEMA_VERSION,
        "winding": res.winding,
        "max_arg_step": res.max_arg_step,
        "node_count": res.node_count,
        "certified": res.certified,
    }
    _dump_json(rec, os.path.join(out, "winding.json"))
    return EXIT_OK if res.certified else EXIT_UNCERTIFIED


def cmd_hfbound(cfg: dict, out: str, args) -> int:
    p = _params_from_config(cfg)
    diag = validate(p)
    if not diag.ok:
        print("validation failed:", "; ".join(diag.issues), file=sys.stderr)
        return EXIT_VALIDATION
    if p.ea == 0:
        print("high-frequency bound needs a smooth ignition function (ea > 0)", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        prof = solve_profile(p)
    except NumericalError as err:
        print(f"profile solve failed: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    hb = hf_bound(prof)
    rec = hb.to_json_dict()
    threshold = cfg.get("feasibility_threshold", DEFAULT_FEASIBILITY)
    rec["feasible"] = hb.R <= threshold
    rec["feasibility_threshold"] = threshold
    _dump_json(rec, os.path.join(out, "hfbound.json"))
    print(json.dumps(rec, sort_keys=True))
    return EXIT_OK


def cmd_zero_ea(cfg: dict, out: str, args) -> int:
    p = _params_from_config(cfg)
    if p.ea != 0:
        print("zero-ea command requires ea = 0", file=sys.stderr)
        return EXIT_VALIDATION
    diag = validate(p)
    if not diag.ok:
        print("validation failed:", "; ".join(diag.issues), file=sys.stderr)
        return EXIT_VALIDATION
    co = zero_ea.zero_ea_coeffs(p)
    rec = {
        "schema_version": SCHEMA_VERSION,
        "s_tilde": co.s_tilde, "mu_plus": co.mu_plus, "mu_minus": co.mu_minus,
        "c0": co.c0, "d0": co.d0,
    }
    if cfg.get("frontier"):
        rec["q_star"] = bench_frontier(p)
    status = EXIT_OK
    try:
        prof = solve_zero_ea_profile(p)
        prof.to_csv(os.path.join(out, "profile.csv"))
        prof.to_json(os.path.join(out, "profile.json"))
        rec["classification"] = prof.classification
    except _NoConnection as err:
        err.profile.to_csv(os.path.join(out, "profile.csv"))
        err.profile.to_json(os.path.join(out, "profile.json"))
        rec["classification"] = err.classification
        status = EXIT_NUMERICAL
    _dump_json(rec, os.path.join(out, "zero_ea.json"))
    return status


# ---------------------------------------------------------------------------
# sweep

@dataclass
class SweepConfig:
    ea: list
    k: list
    D: list
    u_plus: list
    u_ig: list
    q: object                      # list of floats or "auto"
    k_scaling: str | None = None   # "exp_ea_half" replaces the k grid
    radius: float | None = None
    nodes: int = 120
    feasibility_threshold: float = DEFAULT_FEASIBILITY
    write_traces: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        grids = d.get("grids", {})
        contour = d.get("contour", {})
        return cls(
            ea=list(grids["ea"]),
            k=list(grids.get("k", [1.0])),
            D=list(grids["D"]),
            u_plus=list(grids["u_plus"]),
            u_ig=list(grids["u_ig"]),
            q=grids.get("q", "auto"),
            k_scaling=d.get("k_scaling"),
            radius=contour.get("radius"),
            nodes=contour.get("nodes", 120),
            feasibility_threshold=d.get("feasibility_threshold", DEFAULT_FEASIBILITY),
            write_traces=d.get("write_traces", False),
        )

    def to_dict(self) -> dict:
        return {
            "grids": {"ea": self.ea, "k": self.k, "D": self.D,
                      "u_plus": self.u_plus, "u_ig": self.u_ig, "q": self.q},
            "k_scaling": self.k_scaling,
            "contour": {"radius": self.radius, "nodes": self.nodes},
            "feasibility_threshold": self.feasibility_threshold,
            "write_traces": self.write_traces,
        }

    def families(self) -> list[dict]:
        fams = []
        for ea, k, D, up, uig in itertools.product(self.ea, self.k, self.D,
                                                   self.u_plus, self.u_ig):
            if self.k_scaling == "exp_ea_half":
                k = math.exp(ea / 2.0)
            qs = auto_q_grid(up) if self.q == "auto" else list(self.q)
            fams.append({"ea": ea, "k": k, "D": D, "u_plus": up, "u_ig": uig,
                         "q": sorted(qs)})
        return fams


def _point_record(p: ModelParams, status: str, reason: str = "", extra: dict | None = None,
                  wall: float = 0.0) -> dict:
    rec = {
        "params": {k: getattr(p, k) for k in model.PARAM_KEYS},
        "status": status,
        "reason": reason,
        "wall_time": wall,
    }
    if extra:
        rec.update(extra)
    return rec


def run_family(family: dict, *, radius=None, nodes=120,
               feasibility=DEFAULT_FEASIBILITY) -> list[dict]:
    """One (ea, k, D, u_plus, u_ig) family, heat release ascending with
    profile continuation; each point gets exactly one ledger record."""
    records = []
    guess = None
    for q in family["q"]:
        t0 = time.perf_counter()
        try:
            p = ModelParams(q=q, k=family["k"], D=family["D"], ea=family["ea"],
                            u_plus=family["u_plus"], u_ig=family["u_ig"])
        except InvalidParameterError as err:
            records.append(_point_record(
                ModelParams(q=0, k=1, D=1, ea=1, u_plus=0, u_ig=0.1), "skipped", str(err)))
            continue
        diag = validate(p)
        if not diag.ok:
            records.append(_point_record(p, "skipped", "; ".join(diag.issues),
                                         wall=time.perf_counter() - t0))
            continue
        try:
            prof = solve_any_profile(p, guess=guess)
            if isinstance(prof, ProfileSolution):
                guess = prof
        except _NoConnection as err:
            records.append(_point_record(p, "failed", f"no connection: {err.classification}",
                                         wall=time.perf_counter() - t0))
            continue
        except NumericalError as err:
            records.append(_point_record(p, "failed", f"profile: {err}",
                                         wall=time.perf_counter() - t0))
            continue
        try:
            result = evans_pipeline(prof, radius=radius, nodes=nodes,
                                    feasibility=feasibility)
        except NumericalError as err:
            reason = str(err)
            status = "skipped" if "feasibility" in reason else "failed"
            extra = {}
            if isinstance(prof, ProfileSolution):
                hb = hf_bound(prof)
                extra = {"L": hb.L, "M": hb.M, "R": hb.R}
            records.append(_point_record(p, status, reason, extra,
                                         wall=time.perf_counter() - t0))
            continue
        extra = {
            "profile": {
                "residual_norm": result.profile_meta.get("residual_norm"),
                "endpoint_error": result.profile_meta["endpoint_error"],
                "domain": result.profile_meta["domain"],
            },
            "R": result.radius,
            "winding": result.winding.winding,
            "max_arg_step": result.winding.max_arg_step,
            "node_count": result.winding.node_count,
            "certified": result.winding.certified,
            "verdict": result.verdict["verdict"],
        }
        if result.bound:
            extra["L"] = result.bound["L"]
            extra["M"] = result.bound["M"]
        records.append(_point_record(p, "done", "", extra,
                                     wall=time.perf_counter() - t0))
    return records


def _family_worker(payload):
    family, radius, nodes, feasibility = payload
    return run_family(family, radius=radius, nodes=nodes, feasibility=feasibility)


def run_sweep(config: SweepConfig, jobs: int = 1) -> dict:
    fams = config.families()
    payloads = [(f, config.radius, config.nodes, config.feasibility_threshold)
                for f in fams]
    if jobs > 1 and len(fams) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_family_worker, payloads))
    else:
        results = [_family_worker(pl) for pl in payloads]
    records = [rec for recs in results for rec in recs]
    total = len(records)
    done = sum(1 for r in records if r["status"] == "done")
    failed = sum(1 for r in records if r["status"] == "failed")
    skipped = sum(1 for r in records if r["status"] == "skipped")
    return {
        "schema_version": SCHEMA_VERSION,
        "config": config.to_dict(),
        "records": records,
        "summary": {
            "total": total,
            "done": done,
            "failed": failed,
            "skipped": skipped,
            "skip_fraction": (failed + skipped) / total if total else 0.0,
        },
    }


def cmd_sweep(cfg: dict, out: str, args) -> int:
    try:
        config = SweepConfig.from_dict(cfg)
    except (KeyError, TypeError, ValueError) as err:
        print(f"bad sweep config: {err!r}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.radius is not None:
        config.radius = args.radius
    ledger = run_sweep(config, jobs=args.jobs)
    _dump_json(ledger, os.path.join(out, "sweep_ledger.json"))
    s = ledger["summary"]
    print(f"sweep: {s['done']}/{s['total']} done, {s['failed']} failed, "
          f"{s['skipped']} skipped")
    return EXIT_OK


# ---------------------------------------------------------------------------

_COMMANDS = {
    "profile": cmd_profile,
    "evans": cmd_evans,
    "wind": cmd_wind,
    "hfbound": cmd_hfbound,
    "zero-ea": cmd_zero_ea,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="detstab",
        description="Spectral stability of viscous strong-detonation waves")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=(name != "wind"), help="JSON config path")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--radius", type=float, default=None, help="contour radius override")
        sp.add_argument("--jobs", type=int, default=1, help="parallel workers")
        if name == "wind":
            sp.add_argument("--trace", default=None, help="EvansTrace CSV path")
    args = parser.parse_args(argv)

    cfg = {}
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
    os.makedirs(args.out, exist_ok=True)
    try:
        return _COMMANDS[args.command](cfg, args.out, args)
    except InvalidParameterError as err:
        print(f"invalid parameters: {err}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
