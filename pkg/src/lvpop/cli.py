"""Command line entry point: ``lvpop <command> [options]``.

Exit codes: 0 success, 1 invalid input (protocol, state or config), 2 I/O
failure.  Diagnostics go to standard error, data to standard output or the
``--out`` / ``--trace`` files.
"""

from __future__ import annotations

import argparse
import csv
import json
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .continuous import rk4_integrate
from .engine import PAIRING_MODES, Recorder, absorbing_label, run_star, run_to_absorption
from .errors import InvalidConfig, InvalidProtocol, LvpopError, NotLvKind, ZeroPopulation
from .experiments import (ExperimentConfig, convergence_scaling, run_trials, rps_symmetry_test,
                          star_stall_experiment, ws_amplification)
from .graphs import Graph
from .potential import compute_b, nett_matrix, potential_for
from .protocol import (BUILTINS, builtin, format_matrix, is_irreducible, protocol_to_dict,
                       resolve_protocol, validate)
from .rng import make_rng
from .states import AggregateState, GraphState, StarState

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2

NAMED_EXPERIMENTS = {
    "scaling": convergence_scaling,
    "star_stall": star_stall_experiment,
    "ws_amplification": ws_amplification,
    "rps_symmetry": rps_symmetry_test,
}


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_like(text: str) -> int:
    """Integers, also written as 1e9."""
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if v != int(v) or v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(v)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="random seed (base seed for experiments)")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS,
                        help="do not print the resolved configuration to stderr")
    common.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS,
                        help="output format for results on stdout (default json)")

    p = argparse.ArgumentParser(prog="lvpop", parents=[common],
                                description="Simulate and analyse Lotka-Volterra type "
                                            "population protocols.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    s = sub.add_parser("simulate", parents=[common], help="run one simulation to absorption",
                       description="Run one simulation until absorption or --max-steps.")
    s.add_argument("--protocol", required=True, help="builtin name or protocol JSON file")
    s.add_argument("--n", type=int, help="population size (number of leaves for a star)")
    s.add_argument("--init", type=_float_list,
                   help="initial counts, or fractions together with --n (default equal shares)")
    s.add_argument("--graph", default="complete",
                   help="complete, star, or file:<graph.json> (default complete)")
    s.add_argument("--center", type=int, default=0, help="hub species index for --graph star")
    s.add_argument("--max-steps", type=_int_like, default=10**10,
                   help="raw step limit, e.g. 1e9 (default 1e10)")
    s.add_argument("--trace", help="write a trace CSV to this path")
    s.add_argument("--trace-stride", type=_int_like, default=1000,
                   help="raw steps between trace rows (default 1000)")
    s.add_argument("--pairing-mode", choices=PAIRING_MODES,
                   help="agent pairing rule (default exact on K_n, paper on the star)")

    e = sub.add_parser("experiment", parents=[common], help="run a seeded batch of trials",
                       description="Run a batch of trials from a JSON config; flags override "
                                   "config values.")
    e.add_argument("--config", help="experiment config JSON")
    e.add_argument("--out", required=True, help="output directory for trials.csv, summary.json")
    e.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    e.add_argument("--protocol", help="override: protocol")
    e.add_argument("--n", type=int, help="override: population size")
    e.add_argument("--init", type=_float_list, help="override: initial counts or fractions")
    e.add_argument("--graph", help="override: graph kind")
    e.add_argument("--trials", type=int, help="override: number of trials")
    e.add_argument("--max-steps", type=_int_like, help="override: raw step limit")
    e.add_argument("--pairing-mode", choices=PAIRING_MODES, help="override: pairing rule")

    o = sub.add_parser("ode", parents=[common], help="integrate the mean-field dynamics",
                       description="Integrate dx_i/dt = x_i (A x)_i with fixed-step RK4.")
    o.add_argument("--protocol", required=True, help="builtin name or protocol JSON file")
    o.add_argument("--x0", type=_float_list, required=True, help="initial fractions")
    o.add_argument("--duration", type=float, required=True, help="integration time")
    o.add_argument("--h", type=float, default=1e-3, help="step size (default 1e-3)")
    o.add_argument("--sample-every", type=int, default=1, help="keep every m-th step")
    o.add_argument("--out", help="orbit CSV path (default stdout)")

    a = sub.add_parser("analyze", parents=[common], help="structural analysis of a protocol",
                       description="Print the nett matrix, irreducibility and potential.")
    a.add_argument("--protocol", required=True, help="builtin name or protocol JSON file")
    a.add_argument("--b", action="store_true", help="compute the potential vector b")

    b = sub.add_parser("builtins", help="list or show the built-in protocols",
                       description="List or show the built-in protocols.")
    b.add_argument("action", choices=("list", "show"))
    b.add_argument("name", nargs="?", help="protocol to show")
    b.add_argument("--format", choices=("text", "json"), default=argparse.SUPPRESS,
                   help="text (default) or json; json output is a valid protocol file")
    return p


def _log(args, obj):
    if not getattr(args, "quiet", False):
        print(json.dumps(obj, default=str), file=sys.stderr)


def _emit(args, record: dict):
    """Write a flat result record to stdout as JSON or a two-line CSV."""
    if getattr(args, "format", "json") == "csv":
        w = csv.writer(sys.stdout)
        w.writerow(record.keys())
        w.writerow([repr(v) if isinstance(v, float) else
                    (" ".join(map(str, v)) if isinstance(v, (list, tuple)) else v)
                    for v in record.values()])
    else:
        print(json.dumps(record, default=str))


def _initial_counts(vp, n, init) -> tuple[int, ...]:
    cfg = ExperimentConfig(vp.spec, n=n, init=init)
    return cfg.initial_counts(vp.k)


def cmd_simulate(args) -> int:
    vp = resolve_protocol(args.protocol)
    seed = getattr(args, "seed", None)
    if seed is None:
        seed = secrets.randbits(63)
    counts = _initial_counts(vp, args.n, args.init)
    rng = make_rng(seed)
    if args.graph == "complete":
        state = AggregateState(counts)
    elif args.graph == "star":
        state = StarState(args.center, counts)
    elif args.graph.startswith("file:"):
        state = GraphState.from_counts(Graph.load(args.graph[5:]), counts, rng)
    else:
        raise InvalidConfig(f"unknown graph {args.graph!r}")
    _log(args, {"command": "simulate", "protocol": protocol_to_dict(vp), "init": counts,
                "graph": args.graph, "seed": seed, "max_steps": args.max_steps,
                "pairing_mode": args.pairing_mode})
    rec = None
    if args.trace:
        b = potential_for(vp).b if vp.kind == "lv" else None
        rec = Recorder(args.trace_stride, b)
    if isinstance(state, StarState):
        out = run_star(state, vp, rng, args.max_steps, rec, args.pairing_mode or "paper")
    else:
        out = run_to_absorption(state, vp, rng, args.max_steps, rec, args.pairing_mode)
    if rec is not None:
        rec.write_csv(args.trace)
    result = {"terminal": out.terminal,
              "label": absorbing_label(out.state, vp) if out.absorbed else "",
              "steps": out.steps, "effective_events": out.effective_events, "seed": seed,
              "final_counts": list(out.state.counts)}
    if isinstance(state, StarState):
        result["center"] = vp.names[out.state.center]
    _emit(args, result)
    return EXIT_OK


def _load_json(path) -> dict:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{path}: invalid JSON ({exc})") from None


def cmd_experiment(args) -> int:
    raw = _load_json(args.config) if args.config else {}
    overrides = {"protocol": args.protocol, "n": args.n, "init": args.init, "graph": args.graph,
                 "trials": args.trials, "max_steps": args.max_steps,
                 "pairing_mode": args.pairing_mode, "base_seed": getattr(args, "seed", None)}
    name = raw.pop("experiment", "trials")
    out = Path(args.out)
    if name == "trials":
        raw.update({k: v for k, v in overrides.items() if v is not None})
        cfg = ExperimentConfig.from_dict(raw)
        _log(args, {"command": "experiment", "experiment": name, **cfg.to_dict(),
                    "config_hash": cfg.config_hash(), "jobs": args.jobs})
        res = run_trials(cfg, args.jobs)
        res.write(out)
        summary = {k: v for k, v in res.summary().items() if k != "config"}
    elif name in NAMED_EXPERIMENTS:
        if overrides["base_seed"] is not None:
            raw["base_seed"] = overrides["base_seed"]
        for key in ("n", "trials"):
            if overrides[key] is not None:
                raw[key] = overrides[key]
        _log(args, {"command": "experiment", "experiment": name, **raw, "jobs": args.jobs})
        try:
            report = NAMED_EXPERIMENTS[name](**raw, jobs=args.jobs)
        except TypeError as exc:
            raise InvalidConfig(f"bad parameters for {name}: {exc}") from None
        out.mkdir(parents=True, exist_ok=True)
        summary = {"experiment": name, "parameters": raw, "build": __version__,
                   **report.to_dict()}
        with open(out / "summary.json", "w") as fh:
            json.dump(summary, fh, indent=2, default=str)
    else:
        raise InvalidConfig(f"unknown experiment {name!r}; "
                            f"choose trials or one of {sorted(NAMED_EXPERIMENTS)}")
    print(json.dumps(summary, default=str))
    return EXIT_OK


def cmd_ode(args) -> int:
    vp = resolve_protocol(args.protocol)
    A = nett_matrix(vp)
    x0 = np.asarray(args.x0, dtype=float)
    if x0.size != vp.k:
        raise InvalidConfig(f"x0 has {x0.size} entries, protocol has {vp.k} species")
    pv = compute_b(A)
    _log(args, {"command": "ode", "protocol": protocol_to_dict(vp), "x0": args.x0,
                "duration": args.duration, "h": args.h, "b": pv.b.tolist(), "case": pv.case})
    orbit = rk4_integrate(x0, A, args.duration, args.h, b=pv.b, sample_every=args.sample_every)
    if orbit.U is None:
        err = ZeroPopulation("x0 has a zero coordinate where b is non-zero; "
                             "U is undefined and the U column is left empty")
        print(f"warning: {err.code}: {err}", file=sys.stderr)
    header = ["t"] + [f"x_{n}" for n in vp.names] + ["U"]

    def write(fh):
        w = csv.writer(fh)
        w.writerow(header)
        for i, t in enumerate(orbit.t):
            u = repr(float(orbit.U[i])) if orbit.U is not None else ""
            w.writerow([repr(float(t))] + [repr(float(v)) for v in orbit.x[i]] + [u])

    if args.out:
        with open(args.out, "w", newline="") as fh:
            write(fh)
    else:
        write(sys.stdout)
    return EXIT_OK


def cmd_analyze(args) -> int:
    vp = resolve_protocol(args.protocol)
    if vp.kind != "lv":
        raise NotLvKind("analysis needs an LV-type protocol (matrix form)")
    A = nett_matrix(vp)
    ok, reason = is_irreducible(vp)
    result = {"names": list(vp.names), "A": A.tolist(), "pmin": vp.pmin,
              "irreducible": ok, "reason": reason}
    if args.b:
        result.update(compute_b(A).to_dict())
    _log(args, {"command": "analyze", "protocol": protocol_to_dict(vp)})
    print(json.dumps(result))
    return EXIT_OK


def cmd_builtins(args) -> int:
    fmt = "json" if getattr(args, "format", "text") == "json" else "text"
    if args.action == "list":
        for name in BUILTINS:
            vp = validate(builtin(name))
            if fmt == "json":
                print(json.dumps({name: protocol_to_dict(vp)}))
            else:
                print(f"{name} ({vp.kind}, k={vp.k})")
                print(format_matrix(vp))
                print()
        return EXIT_OK
    if not args.name:
        raise InvalidConfig("builtins show needs a protocol name")
    vp = validate(builtin(args.name))
    if fmt == "json":
        print(json.dumps(protocol_to_dict(vp), indent=2))
    else:
        print(format_matrix(vp))
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "experiment": cmd_experiment, "ode": cmd_ode,
            "analyze": cmd_analyze, "builtins": cmd_builtins}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InvalidProtocol as e:
        for code, msg in e.violations or [(e.code, str(e))]:
            print(f"error: {code}: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except LvpopError as e:
        print(f"error: {e.code}: {e}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as e:
        print(f"error: InvalidInput: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
