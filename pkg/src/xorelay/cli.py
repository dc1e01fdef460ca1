"""Command-line front end.

Four subcommands wire the library together and emit machine-readable
results (RFC-4180-style CSV with a header row, UTF-8 JSON validating
against the schemas shipped in ``xorelay/schemas``):

* analyze  -- closed-form threshold grid + optimal thresholds
* solve    -- exact MDP solution via rvi, lp, or dvi
* simulate -- single-relay or line-network runs
* sweep    -- batch driver over a list of config points

Every JSON output embeds a manifest (command, parameters, seed, version)
that pins the run; results are deterministic given the manifest.  Exit
codes: 0 success, 2 invalid input, 3 solver non-convergence, 4 partial
sweep failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from . import __version__
from .analytics import (
    ThresholdPair,
    average_cost,
    mean_delay,
    optimize_thresholds,
    threshold_search_bound,
    tradeoff_curve,
)
from .errors import ConvergenceError, SimplexError, XorelayError
from .model import ActionKind, QState, RelayParams
from .policies import (
    Opportunistic,
    PolicySpec,
    QThreshold,
    QueueOrWait,
    RandomizedQThreshold,
    WaitThreshold,
)
from .sim import LineParams, RelayCosts, SimConfig, SimReport, run_line_network, run_single_relay
from .solver import (
    TruncatedSpace,
    build_occupancy_lp,
    discounted_value_iteration,
    extract_thresholds,
    relative_value_iteration,
    solve_occupancy_lp,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NO_CONVERGENCE = 3
EXIT_PARTIAL_FAILURE = 4

_POLICY_FAMILIES = {
    "opportunistic": (Opportunistic, ()),
    "q_threshold": (QThreshold, ("l1", "l2")),
    "randomized_q_threshold": (RandomizedQThreshold, ("l1", "l2", "transmit_prob")),
    "wait_threshold": (WaitThreshold, ("w1", "w2")),
    "queue_or_wait": (QueueOrWait, ("l1", "l2", "w1", "w2")),
}


def parse_policy(obj: dict[str, Any] | str) -> PolicySpec:
    """Build a policy spec from its config-file form, e.g.
    {"family": "q_threshold", "l1": 1, "l2": 2}."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    if not isinstance(obj, dict) or "family" not in obj:
        raise ValueError(f"policy must be an object with a 'family' key, got {obj!r}")
    family = obj["family"]
    if family not in _POLICY_FAMILIES:
        raise ValueError(f"unknown policy family {family!r}; choose from {sorted(_POLICY_FAMILIES)}")
    cls, fields = _POLICY_FAMILIES[family]
    missing = [f for f in fields if f not in obj]
    if missing:
        raise ValueError(f"policy family {family!r} needs fields {missing}")
    return cls(**{f: obj[f] for f in fields})


def policy_to_dict(spec: PolicySpec) -> dict[str, Any]:
    for name, (cls, _) in _POLICY_FAMILIES.items():
        if type(spec) is cls:
            return {"family": name, **dataclasses.asdict(spec)}
    raise ValueError(f"not a policy spec: {spec!r}")


def _manifest(command: str, parameters: dict[str, Any], seed: int | None, outputs: list[str]) -> dict:
    return {
        "tool": "xorelay",
        "version": __version__,
        "command": command,
        "parameters": parameters,
        "seed": seed,
        "outputs": outputs,
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _report_to_dict(report: SimReport) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for f in dataclasses.fields(report):
        value = getattr(report, f.name)
        if f.name == "empirical_state_freq":
            value = None if value is None else {f"{s.q1},{s.q2}": p for s, p in value.items()}
        elif f.name == "per_relay":
            value = None if value is None else [dataclasses.asdict(b) for b in value]
        out[f.name] = value
    return out


def _derive_seed(*parts: Any) -> int:
    blob = json.dumps(parts, sort_keys=True, default=str).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big") % (2**31)


class _Options:
    """Flag values backed by an optional --config JSON file."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config: dict[str, Any] = {}
        if getattr(args, "config", None):
            self.config = json.loads(Path(args.config).read_text(encoding="utf-8"))
            if not isinstance(self.config, dict):
                raise ValueError("--config must contain a JSON object")

    def get(self, name: str, default: Any = None, required: bool = False) -> Any:
        value = getattr(self.args, name, None)
        if value is None:
            value = self.config.get(name, default)
        if required and value is None:
            raise ValueError(f"missing required parameter {name!r} (flag or config)")
        return value


def _params_from(opts: _Options) -> RelayParams:
    return RelayParams(
        p1=float(opts.get("p1", required=True)),
        p2=float(opts.get("p2", required=True)),
        c_transmit=float(opts.get("c_transmit", 1.0)),
        c_hold=float(opts.get("c_hold", 1.0)),
    )


def cmd_analyze(opts: _Options, out_dir: Path) -> int:
    params = _params_from(opts)
    max_threshold = opts.get("max_threshold")
    if max_threshold is None:
        max_threshold = threshold_search_bound(params)
    max_threshold = int(max_threshold)

    curve = tradeoff_curve(params, max_threshold)
    best_t, best_point = optimize_thresholds(params)

    csv_path = out_dir / "analyze.csv"
    rows = [
        [t.l1, t.l2, pt.tau, pt.lam, pt.cost_per_slot, pt.cost_per_packet, mean_delay(pt, params)]
        for t, pt in curve
    ]
    _write_csv(
        csv_path,
        ["L1", "L2", "tau", "lambda", "cost_per_slot", "cost_per_packet", "mean_delay"],
        rows,
    )
    manifest = _manifest(
        "analyze",
        {
            "p1": params.p1,
            "p2": params.p2,
            "c_transmit": params.c_transmit,
            "c_hold": params.c_hold,
            "max_threshold": max_threshold,
        },
        seed=None,
        outputs=["analyze.csv", "analyze.json"],
    )
    _write_json(
        out_dir / "analyze.json",
        {
            "manifest": manifest,
            "optimal": {
                "l1": best_t.l1,
                "l2": best_t.l2,
                "tau": best_point.tau,
                "lambda": best_point.lam,
                "cost_per_slot": best_point.cost_per_slot,
                "cost_per_packet": best_point.cost_per_packet,
                "mean_delay": mean_delay(best_point, params),
                "search_bound": threshold_search_bound(params),
            },
        },
    )
    return EXIT_OK


def cmd_solve(opts: _Options, out_dir: Path) -> int:
    params = _params_from(opts)
    method = opts.get("method", required=True)
    cap = int(opts.get("cap", 40))
    tol = float(opts.get("tol", 1e-9))
    max_iterations = int(opts.get("max_iterations", 2_000_000))
    space = TruncatedSpace(cap)

    payload: dict[str, Any]
    parameters: dict[str, Any] = {
        "p1": params.p1,
        "p2": params.p2,
        "c_transmit": params.c_transmit,
        "c_hold": params.c_hold,
        "method": method,
        "cap": cap,
        "tol": tol,
    }
    if method == "rvi":
        result = relative_value_iteration(params, space, tol=tol, max_iterations=max_iterations)
        policy = result.policy
        payload = {
            "gain": result.gain,
            "iterations": result.iterations,
            "residual": result.residual,
            "bias": {f"{s.q1},{s.q2}": v for s, v in result.bias.items()},
        }
    elif method == "dvi":
        beta = float(opts.get("beta", required=True))
        parameters["beta"] = beta
        result = discounted_value_iteration(
            params, beta, space, tol=tol, max_iterations=max_iterations
        )
        policy = result.policy
        payload = {
            "beta": beta,
            "iterations": result.iterations,
            "residual": result.residual,
            "values": {f"{s.q1},{s.q2}": v for s, v in result.values.items()},
        }
    elif method == "lp":
        epsilon = float(opts.get("epsilon", 1e-6))
        parameters["epsilon"] = epsilon
        lp = build_occupancy_lp(params, space, epsilon)
        solution = solve_occupancy_lp(lp)
        policy = solution.policy
        payload = {
            "objective": solution.objective,
            "epsilon": epsilon,
            "pivots": solution.pivots,
            "unvisited_states": sorted(f"{s.q1},{s.q2}" for s in solution.unvisited),
        }
    else:
        raise ValueError(f"unknown method {method!r}; choose rvi, lp, or dvi")

    extraction = extract_thresholds(policy, space, reachable_only=True)
    payload["policy"] = {f"{s.q1},{s.q2}": ActionKind(a).name for s, a in sorted(policy.items())}
    if extraction.thresholds is not None:
        payload["thresholds"] = {"l1": extraction.thresholds.l1, "l2": extraction.thresholds.l2}
        payload["threshold_witness"] = None
    else:
        w = extraction.witness
        payload["thresholds"] = None
        payload["threshold_witness"] = [f"{w[0].q1},{w[0].q2}", f"{w[1].q1},{w[1].q2}"]

    manifest = _manifest("solve", parameters, seed=None, outputs=["solve.json"])
    _write_json(out_dir / "solve.json", {"manifest": manifest, "solution": payload})
    return EXIT_OK


def _run_relay_point(spec_dict: dict, params: RelayParams, slots: int, warmup: int | None,
                     seed: int) -> SimReport:
    spec = parse_policy(spec_dict)
    config = SimConfig(params=params, num_slots=slots, seed=seed, warmup_slots=warmup)
    return run_single_relay(spec, config)


def cmd_simulate(opts: _Options, out_dir: Path) -> int:
    scenario = opts.get("scenario", required=True)
    slots = int(opts.get("slots", 100_000))
    warmup = opts.get("warmup")
    warmup = int(warmup) if warmup is not None else None
    seed = int(opts.get("seed", 0))
    replications = int(opts.get("replications", 1))
    policies = opts.get("policies", required=True)
    if isinstance(policies, str):
        policies = [policies]
    specs = [parse_policy(p) for p in policies]
    spec_dicts = [policy_to_dict(s) for s in specs]

    parameters: dict[str, Any] = {
        "scenario": scenario,
        "slots": slots,
        "warmup": warmup,
        "replications": replications,
        "policies": spec_dicts,
    }

    runs: list[dict[str, Any]] = []
    if scenario == "relay":
        params = _params_from(opts)
        parameters.update(
            p1=params.p1, p2=params.p2, c_transmit=params.c_transmit, c_hold=params.c_hold
        )
        for spec, spec_dict in zip(specs, spec_dicts):
            for rep in range(replications):
                rep_seed = seed if replications == 1 else _derive_seed(seed, spec_dict, rep)
                report = run_single_relay(
                    spec,
                    SimConfig(params=params, num_slots=slots, seed=rep_seed, warmup_slots=warmup),
                )
                runs.append(
                    {"policy": spec_dict, "replication": rep, "seed": rep_seed,
                     "report": _report_to_dict(report)}
                )
    elif scenario == "line":
        if len(specs) != 2:
            raise ValueError(f"line scenario needs exactly 2 policies (relay n2, n3), got {len(specs)}")
        p1 = float(opts.get("p1", required=True))
        p2 = float(opts.get("p2", required=True))
        c_t = float(opts.get("c_transmit", 1.0))
        c_h = float(opts.get("c_hold", 1.0))
        parameters.update(p1=p1, p2=p2, c_transmit=c_t, c_hold=c_h)
        line = LineParams(relay_costs=(RelayCosts(c_t, c_h), RelayCosts(c_t, c_h)))
        for rep in range(replications):
            rep_seed = seed if replications == 1 else _derive_seed(seed, spec_dicts, rep)
            report = run_line_network(
                (p1, p2),
                (specs[0], specs[1]),
                SimConfig(params=line, num_slots=slots, seed=rep_seed, warmup_slots=warmup),
            )
            runs.append(
                {"policy": spec_dicts, "replication": rep, "seed": rep_seed,
                 "report": _report_to_dict(report)}
            )
    else:
        raise ValueError(f"unknown scenario {scenario!r}; choose relay or line")

    outputs = ["simulate.json"]
    multi = scenario == "relay" and len(specs) > 1
    if multi:
        outputs.append("comparison.csv")
    manifest = _manifest("simulate", parameters, seed=seed, outputs=outputs)
    _write_json(out_dir / "simulate.json", {"manifest": manifest, "runs": runs})
    if multi:
        header = [
            "policy", "replication", "seed", "avg_cost_per_slot", "avg_cost_per_packet",
            "avg_delay_per_packet", "transmissions_per_slot", "cost_ci95",
        ]
        rows = []
        for run in runs:
            rep = run["report"]
            rows.append([
                json.dumps(run["policy"], sort_keys=True),
                run["replication"],
                run["seed"],
                rep["avg_cost_per_slot"],
                rep["avg_cost_per_packet"],
                rep["avg_delay_per_packet"],
                rep["transmissions_total"] / rep["measured_slots"] if rep["measured_slots"] else 0.0,
                rep["cost_ci95"],
            ])
        _write_csv(out_dir / "comparison.csv", header, rows)
    return EXIT_OK


def _sweep_point(task: tuple[int, dict, str, int]) -> tuple[int, str, str]:
    """Run one sweep point in a worker; returns (index, status, detail)."""
    idx, point, out_dir_str, point_seed = task
    point_dir = Path(out_dir_str) / f"point_{idx:03d}"
    point_dir.mkdir(parents=True, exist_ok=True)
    mode = point.get("mode", "analyze")
    merged = dict(point)
    merged.setdefault("seed", point_seed)
    ns = argparse.Namespace(config=None)
    opts = _Options(ns)
    opts.config = merged
    try:
        if mode == "analyze":
            cmd_analyze(opts, point_dir)
        elif mode == "solve":
            cmd_solve(opts, point_dir)
        elif mode == "simulate":
            cmd_simulate(opts, point_dir)
        else:
            raise ValueError(f"unknown sweep mode {mode!r}")
    except Exception as exc:  # noqa: BLE001 -- a failed point must not kill the sweep
        return idx, "failed", f"{type(exc).__name__}: {exc}"
    return idx, "ok", str(point_dir.name)


def cmd_sweep(opts: _Options, out_dir: Path) -> int:
    points = opts.get("points", default=[])
    if not isinstance(points, list):
        raise ValueError("sweep config must contain a 'points' list")
    seed = int(opts.get("seed", 0))
    jobs = int(opts.get("jobs", 1))

    tasks = [
        (idx, point, str(out_dir), _derive_seed("sweep", seed, point))
        for idx, point in enumerate(points)
    ]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]
    results.sort()

    rows = [[idx, status, detail] for idx, status, detail in results]
    _write_csv(out_dir / "index.csv", ["point", "status", "detail"], rows)
    failures = [r for r in results if r[1] == "failed"]
    manifest = _manifest(
        "sweep",
        {"points": points, "jobs": jobs},
        seed=seed,
        outputs=["index.csv", "index.json"] + [f"point_{i:03d}" for i, _, _ in results],
    )
    _write_json(
        out_dir / "index.json",
        {
            "manifest": manifest,
            "total": len(results),
            "failed": [{"point": i, "error": d} for i, s, d in results if s == "failed"],
        },
    )
    if failures:
        print(f"{len(failures)} of {len(results)} sweep points failed", file=sys.stderr)
        return EXIT_PARTIAL_FAILURE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xorelay",
        description="Wait-or-transmit analysis for an XOR network-coding relay",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--output", required=True, help="output directory (created if missing)")
        p.add_argument("--config", help="JSON file with defaults for any flag")
        p.add_argument("--seed", type=int, help="RNG seed (recorded in the manifest)")

    p_analyze = sub.add_parser("analyze", help="closed-form threshold analysis")
    common(p_analyze)
    p_analyze.add_argument("--p1", type=float)
    p_analyze.add_argument("--p2", type=float)
    p_analyze.add_argument("--c-transmit", dest="c_transmit", type=float)
    p_analyze.add_argument("--c-hold", dest="c_hold", type=float)
    p_analyze.add_argument("--max-threshold", dest="max_threshold", type=int)

    p_solve = sub.add_parser("solve", help="exact MDP solution on a truncated space")
    common(p_solve)
    p_solve.add_argument("--method", choices=["rvi", "lp", "dvi"])
    p_solve.add_argument("--p1", type=float)
    p_solve.add_argument("--p2", type=float)
    p_solve.add_argument("--c-transmit", dest="c_transmit", type=float)
    p_solve.add_argument("--c-hold", dest="c_hold", type=float)
    p_solve.add_argument("--cap", type=int)
    p_solve.add_argument("--beta", type=float)
    p_solve.add_argument("--epsilon", type=float)
    p_solve.add_argument("--tol", type=float)

    p_sim = sub.add_parser("simulate", help="slotted simulation runs")
    common(p_sim)
    p_sim.add_argument("--scenario", choices=["relay", "line"])
    p_sim.add_argument("--p1", type=float)
    p_sim.add_argument("--p2", type=float)
    p_sim.add_argument("--c-transmit", dest="c_transmit", type=float)
    p_sim.add_argument("--c-hold", dest="c_hold", type=float)
    p_sim.add_argument("--slots", type=int)
    p_sim.add_argument("--warmup", type=int)
    p_sim.add_argument("--replications", type=int)
    p_sim.add_argument(
        "--policy",
        dest="policies",
        action="append",
        help='policy JSON, e.g. \'{"family":"q_threshold","l1":1,"l2":1}\' (repeatable)',
    )

    p_sweep = sub.add_parser("sweep", help="batch driver over config points")
    common(p_sweep)
    p_sweep.add_argument("--jobs", type=int, help="concurrent worker processes")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = _Options(args)
        out_dir = Path(args.output)
        out_dir.mkdir(parents=True, exist_ok=True)
        handler = {
            "analyze": cmd_analyze,
            "solve": cmd_solve,
            "simulate": cmd_simulate,
            "sweep": cmd_sweep,
        }[args.command]
        return handler(opts, out_dir)
    except ConvergenceError as exc:
        print(f"error: solver did not converge: {exc} (last residual {exc.last_residual:.3e})",
              file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except SimplexError as exc:
        print(f"error: LP solve failed: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (XorelayError, ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
