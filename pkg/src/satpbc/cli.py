"""Command-line front end: scenario execution, verification reports,
parameter sweeps, CSV/JSON export, and figure rendering.

Exit codes: 0 success, 1 unknown scenario or bad configuration, 2 divergence
during integration, 3 invariant violation (a saturation bound was breached,
which the tanh construction rules out and therefore indicates a wiring bug).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import scenarios as scn_mod
from .controllers import saturation_bounds
from .errors import ConfigurationError, DivergenceError, InvariantViolation, SatPbcError
from .simulation import compute_metrics

__all__ = ["main", "cmd_simulate", "cmd_verify", "cmd_sweep", "cmd_list", "write_trace_csv", "read_trace_csv"]


def _fmt(value: float) -> str:
    return repr(float(value))


def write_trace_csv(path, trace, columns=None):
    """Delimited trace: '.' decimal, ',' separator, LF endings, shortest
    round-trip float formatting (byte-identical across repeated runs)."""
    m = trace.inputs.shape[1]
    header = ["t"] + list(trace.labels) + [f"u{i+1}" for i in range(m)] + ["storage"]
    data = np.column_stack([trace.times, trace.states, trace.inputs, trace.storage])
    if columns:
        keep = [i for i, name in enumerate(header) if name == "t" or name in columns]
        header = [header[i] for i in keep]
        data = data[:, keep]
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in data:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_trace_csv(path):
    """Round-trip parser for the trace format; validates the header shape."""
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(",")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    if header[0] != "t" or header[-1] != "storage":
        raise ConfigurationError(f"{path}: not a trace file (header {header[:3]}...)")
    data = np.array([[float(v) for v in row] for row in rows])
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ConfigurationError(f"{path}: ragged trace file")
    return header, data


def _metrics_payload(scn, metrics, bounds):
    return {
        "scenario": scn.name,
        "window": metrics.window,
        "steady_state_error": metrics.steady_state_error.tolist(),
        "settling_time": metrics.settling_time,
        "oscillation_count": metrics.oscillation_count.tolist(),
        "oscillation_floor": metrics.oscillation_floor.tolist(),
        "saturation_intervals": metrics.saturation_intervals,
        "saturation_bounds": np.asarray(bounds).tolist(),
        "final_state": metrics.final_state.tolist(),
        "final_input": metrics.final_input.tolist(),
        "max_abs_input": metrics.max_abs_input.tolist(),
        "storage_initial": metrics.storage_initial,
        "storage_final": metrics.storage_final,
    }


def _write_json(path, payload):
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve_scenario(args):
    scn = scn_mod.load_scenario(args.scenario)
    for item in args.set or []:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got '{item}'")
        key, value = item.split("=", 1)
        scn = scn_mod.apply_override(scn, key.strip(), value.strip())
    if args.dt is not None:
        scn = scn_mod.apply_override(scn, "dt", args.dt)
    if args.seed is not None:
        scn = scn_mod.apply_override(scn, "seed", args.seed)
    return scn


def _out_dir(args):
    out = args.out or os.environ.get("PBC_OUT_DIR") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _simulate_one(scn, out_dir, plot=True, tag=None):
    loop = scn_mod.build_loop(scn)
    trace = scn_mod.run_scenario(scn, loop=loop)
    bounds = saturation_bounds(loop.controller)
    window = max(scn.dt, 0.05 * (scn.t_span[1] - scn.t_span[0]))
    metrics = compute_metrics(trace, np.asarray(scn.target, dtype=float), window, bounds)
    name = tag or scn.name
    csv_path = os.path.join(out_dir, f"{name}.trace.csv")
    write_trace_csv(csv_path, trace, scn.outputs)
    _write_json(os.path.join(out_dir, f"{name}.metrics.json"), _metrics_payload(scn, metrics, bounds))
    if plot:
        from .plotting import render_trace_figures

        render_trace_figures(trace, os.path.join(out_dir, name),
                             n_plant=loop.plant.n, bounds=bounds, target=scn.target)
    return trace, metrics, bounds


def cmd_simulate(args) -> int:
    try:
        scn = _resolve_scenario(args)
        out_dir = _out_dir(args)
    except (ConfigurationError, SatPbcError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    t_start = time.perf_counter()
    try:
        trace, metrics, _ = _simulate_one(scn, out_dir, plot=not args.no_plot)
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 2
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 3
    except SatPbcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    elapsed = time.perf_counter() - t_start
    print(f"{scn.name}: {trace.times.shape[0]} rows, final state "
          f"{np.array2string(metrics.final_state, precision=6)}, wall {elapsed:.2f}s")
    return 0


def cmd_verify(args) -> int:
    try:
        scn = _resolve_scenario(args)
        out_dir = _out_dir(args)
        results, skipped = scn_mod.scenario_checks(scn)
    except (ConfigurationError, SatPbcError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    payload = {
        "scenario": scn.name,
        "notes": scn.notes,
        "checks": [
            {
                "name": r.name,
                "pass": bool(r.passed),
                "residual": r.residual,
                "tolerance": r.tolerance,
                "witness": None if r.witness is None else np.asarray(r.witness).tolist(),
                "details": r.details,
            }
            for r in results
        ],
        "skipped": skipped,
    }
    _write_json(os.path.join(out_dir, f"{scn.name}.verify.json"), payload)
    all_pass = all(r.passed for r in results)
    for r in results:
        flag = "PASS" if r.passed else "FAIL"
        print(f"[{flag}] {scn.name}/{r.name}: residual={r.residual:.3e} tol={r.tolerance:.3e}")
    for entry in skipped:
        print(f"[SKIP] {scn.name}/{entry['name']}: {entry['reason']}")
    return 0 if all_pass else 1


def _parse_values(text):
    try:
        parsed = json.loads(text)
        if isinstance(parsed, list):
            return parsed
        return [parsed]
    except json.JSONDecodeError:
        return [float(v) for v in text.split(",") if v.strip()]


def cmd_sweep(args) -> int:
    presets = scn_mod.sweep_presets()
    if args.scenario in presets and not args.param:
        preset = presets[args.scenario]
        base_name, param = preset["scenario"], preset["param"]
        values = preset["values"] if args.values is None else _parse_values(args.values)
        args = argparse.Namespace(**{**vars(args), "scenario": base_name})
    else:
        if not args.param:
            print("error: --param is required for non-preset sweeps", file=sys.stderr)
            return 1
        param = args.param
        values = _parse_values(args.values) if args.values else []
    try:
        base = _resolve_scenario(args)
        out_dir = _out_dir(args)
    except (ConfigurationError, SatPbcError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    summary_rows = []
    for value in values:
        tag = f"{base.name}.{param}={value}"
        try:
            scn = scn_mod.apply_override(base, param, value)
            trace, metrics, bounds = _simulate_one(scn, out_dir, plot=not args.no_plot, tag=tag)
            touches = sum(len(iv) for iv in metrics.saturation_intervals)
            summary_rows.append([param, value, "ok",
                                 _fmt(metrics.max_abs_input.max()), str(touches),
                                 ",".join(_fmt(v) for v in metrics.final_state),
                                 ",".join(str(c) for c in metrics.oscillation_count)])
            print(f"{tag}: ok, max|u|={metrics.max_abs_input.max():.6f}, intervals={touches}")
        except DivergenceError as exc:
            summary_rows.append([param, value, f"divergence at t={exc.time!r}", "", "", "", ""])
            print(f"{tag}: divergence ({exc})", file=sys.stderr)
        except (SatPbcError, ConfigurationError) as exc:
            summary_rows.append([param, value, f"error: {exc}", "", "", "", ""])
            print(f"{tag}: error ({exc})", file=sys.stderr)
    summary_path = os.path.join(out_dir, f"{base.name}.{param}.sweep.csv")
    with open(summary_path, "w", newline="\n") as fh:
        fh.write("param,value,status,max_abs_input,saturation_interval_count,final_state,oscillation_count\n")
        for row in summary_rows:
            fh.write(",".join(f'"{c}"' if "," in str(c) else str(c) for c in row) + "\n")
    print(f"sweep summary: {summary_path} ({len(summary_rows)} rows)")
    return 0


def cmd_list(args) -> int:
    reg = scn_mod.builtin_scenarios()
    print("scenarios:")
    for name, scn in reg.items():
        family = scn.controller.get("family")
        print(f"  {name:22s} model={scn.model['kind']:16s} family={family:18s} "
              f"t=[{scn.t_span[0]:g},{scn.t_span[1]:g}] dt={scn.dt:g}")
    print("sweep presets:")
    for name, preset in scn_mod.sweep_presets().items():
        print(f"  {name:22s} base={preset['scenario']} param={preset['param']} values={preset['values']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="satpbc",
                                     description="Saturated passivity-based control workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", required=True, help="builtin name or JSON file path")
        p.add_argument("--out", default=None, help="output directory (default $PBC_OUT_DIR or '.')")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a scenario key (repeatable)")
        p.add_argument("--dt", type=float, default=None)
        p.add_argument("--seed", type=int, default=None)

    p_sim = sub.add_parser("simulate", help="run a scenario, write trace CSV + metrics + figures")
    common(p_sim)
    p_sim.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    p_sim.set_defaults(func=cmd_simulate)

    p_ver = sub.add_parser("verify", help="run every applicable check, write a JSON report")
    common(p_ver)
    p_ver.set_defaults(func=cmd_verify)

    p_swp = sub.add_parser("sweep", help="run a scenario over a list of parameter values")
    common(p_swp)
    p_swp.add_argument("--param", default=None, help="controller key to sweep")
    p_swp.add_argument("--values", default=None, help="comma-separated or JSON list")
    p_swp.add_argument("--no-plot", action="store_true")
    p_swp.set_defaults(func=cmd_sweep)

    p_lst = sub.add_parser("list", help="list builtin scenarios and sweep presets")
    p_lst.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        return cmd_list(args)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
