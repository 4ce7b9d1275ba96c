"""Command-line experiment runner.

Every subcommand reads a JSON config (see ``schema/experiment.schema.json``),
lets ``--seed/--trials/--tol/--out`` override it, and writes a deterministic
JSON report (sorted keys, ``repr`` floats) or a CSV table.

Exit status: 0 when every check passes, 1 when a check fails, 2 on a
config or input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from .characterization import (
    CHECKS, EXCH_TOL, NotReducibleError, canonicalize, characterize, exchangeability_report,
    freedman_check,
)
from .config import SCHEMA_VERSION, ConfigError, load_config, model_from_config
from .density import bin_probability, density_split, log_density_x
from .dynamics import RateError, TimeScale, TimeScaleError
from .graph import GraphError, validate_strongly_connected
from .simulator import (
    SimConfig, SimulationError, SkeletonEvent, StringEvent, mc_event_probabilities, simulate_many,
)
from .trajectory import TrajectoryError, read_jsonl, write_jsonl

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
DEFAULT_STRINGS = [[0, 1, 0, 2, 1], [0, 2, 1, 0, 1]]


def _param(cfg: dict, args, name: str, default=None):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return cfg.get(name, default)


def _dump(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([float.__repr__(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _envelope(command: str, cfg: dict, seed, result: dict, verdict: str) -> dict:
    return {
        "command": command,
        "schema_version": SCHEMA_VERSION,
        "seed": seed,
        "model": model_from_config(cfg).to_json() if command != "canonicalize" else None,
        "result": result,
        "verdict": verdict,
    }


# --------------------------------------------------------------------------
# commands; each returns (exit code, report text, optional table text)


def cmd_simulate(cfg: dict, args) -> tuple[int, str, str | None]:
    m = model_from_config(cfg)
    seed = int(_param(cfg, args, "seed", 0))
    trials = int(_param(cfg, args, "trials", 1))
    sim = SimConfig(int(cfg.get("start", 0)), float(cfg.get("horizon", 1.0)), seed,
                    int(cfg.get("max_jumps", 10 ** 7)), cfg.get("clock", "X"))
    trajs = simulate_many(m.graph, m.rates, sim, trials,
                          m.timescale if sim.clock == "Y" else None)
    buf = io.StringIO()
    write_jsonl(trajs, buf)
    return EXIT_PASS, buf.getvalue(), None


def cmd_exchangeability(cfg: dict, args):
    m = model_from_config(cfg)
    seed = int(_param(cfg, args, "seed", 0))
    tol = float(_param(cfg, args, "tol", EXCH_TOL))
    pairs = int(_param(cfg, args, "pairs", 1000))
    rep = exchangeability_report(m.graph, m.rates, m.timescale, pairs, seed, tol,
                                 start=int(cfg.get("start", 0)), horizon=float(cfg.get("horizon", 2.0)))
    out = _envelope("exchangeability", cfg, seed, rep.to_dict(), rep.verdict)
    return (EXIT_PASS if rep.verdict == "pass" else EXIT_FAIL), _dump(out), None


def cmd_freedman(cfg: dict, args):
    m = model_from_config(cfg)
    seed = int(_param(cfg, args, "seed", 0))
    trials = int(_param(cfg, args, "trials", 100_000))
    hs = cfg.get("h", [0.2, 0.3, 0.5])
    hs = hs if isinstance(hs, list) else [hs]
    strings = cfg.get("strings", DEFAULT_STRINGS)
    z_max = float(_param(cfg, args, "tol", 3.0))
    runs = [freedman_check(m.graph, m.rates, m.timescale, float(h), strings, trials, seed, z_max).to_dict()
            for h in hs]
    verdict = "pass" if all(r["verdict"] == "pass" for r in runs) else "fail"
    witness = [r["h"] for r in runs if r["verdict"] == "fail"]
    out = _envelope("freedman", cfg, seed, {"runs": runs, "witness_h": witness}, verdict)
    rows = [[r["h"], r["first"]["estimate"], r["first"]["stderr"], r["second"]["estimate"],
             r["second"]["stderr"], r["z"], r["verdict"]] for r in runs]
    table = _csv(["h", "p_first", "se_first", "p_second", "se_second", "z", "verdict"], rows)
    return (EXIT_PASS if verdict == "pass" else EXIT_FAIL), _dump(out), table


def cmd_characterize(cfg: dict, args):
    m = model_from_config(cfg)
    seed = int(_param(cfg, args, "seed", 0))
    checks = args.checks.split(",") if getattr(args, "checks", None) else cfg.get("checks", list(CHECKS[:3]))
    kwargs = {}
    if "grid" in cfg:
        kwargs["grid"] = cfg["grid"]
    tol = _param(cfg, args, "tol")
    if tol is not None:
        kwargs["exch_tol"] = float(tol)
    result = characterize(m.graph, m.rates, m.timescale, checks, int(_param(cfg, args, "pairs", 1000)),
                          seed, freedman={"h": cfg.get("h", [0.3]), "strings": cfg.get("strings", DEFAULT_STRINGS),
                                          "trials": int(_param(cfg, args, "trials", 100_000))}, **kwargs)
    result["strongly_connected"] = validate_strongly_connected(m.graph).to_dict()
    out = _envelope("characterize", cfg, seed, result, result["verdict"])
    return (EXIT_PASS if result["verdict"] == "pass" else EXIT_FAIL), _dump(out), None


def cmd_canonicalize(cfg: dict, args):
    m = model_from_config(cfg)
    seed = int(_param(cfg, args, "seed", 0))
    tol = float(_param(cfg, args, "tol", 1e-9))
    pairs = int(_param(cfg, args, "pairs", 0))
    try:
        form = canonicalize(m.graph, m.rates, tol, verify_pairs=pairs, seed=seed)
    except (NotReducibleError, ValueError) as exc:
        out = {"command": "canonicalize", "schema_version": SCHEMA_VERSION, "verdict": "fail",
               "error": str(exc)}
        return EXIT_FAIL, _dump(out), None
    meta = form.to_dict()
    ok = form.symmetric and all(c["verdict"] == "pass" for c in form.checks.values())
    meta["verdict"] = "pass" if ok else "fail"
    if form.symmetric:
        g = m.graph
        weights = [[i, j, form.weights[(i, j)]] for i, j in g.edges]
        model = {
            "schema_version": SCHEMA_VERSION,
            "graph": {"vertices": g.vertex_count, "edges": weights},
            "rates": {"kind": "vrjp", "weights": weights},
            "timescale": {"kind": "vrjp"},
            "canonical": meta,
        }
    else:
        model = {"schema_version": SCHEMA_VERSION, "canonical": meta, "verdict": "fail"}
    return (EXIT_PASS if ok else EXIT_FAIL), _dump(model), None


def _event(spec: dict):
    if "states" in spec:
        return StringEvent(tuple(spec["states"]), float(spec["h"]))
    bins = spec.get("bins")
    return SkeletonEvent(tuple(spec["path"]), tuple(tuple(b) for b in bins) if bins else None)


def cmd_events(cfg: dict, args):
    """Monte Carlo event frequencies against integrals of the density."""
    m = model_from_config(cfg)
    seed = int(_param(cfg, args, "seed", 0))
    trials = int(_param(cfg, args, "trials", 100_000))
    z_max = float(_param(cfg, args, "tol", 3.0))
    clock = cfg.get("clock", "X")
    horizon = float(cfg.get("horizon", 1.0))
    sim = SimConfig(int(cfg.get("start", 0)), horizon, seed, int(cfg.get("max_jumps", 10 ** 7)), clock)
    try:
        events = [_event(e) for e in cfg.get("events", [])]
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad event: {exc}") from exc
    if not events:
        raise ConfigError("events command needs a nonempty 'events' list")
    T = m.timescale if clock == "Y" else None
    est = mc_event_probabilities(m.graph, m.rates, sim, events, trials, T)
    rows, results = [], []
    within = 0
    for k, (ev, e) in enumerate(zip(events, est)):
        exact = None
        if isinstance(ev, SkeletonEvent):
            exact = bin_probability(m.graph, m.rates, ev.path, ev.bins, horizon, clock, T)
        z = None
        if exact is not None:
            se = math.sqrt(exact * (1 - exact) / trials) if 0 < exact < 1 else e.stderr
            z = (e.estimate - exact) / se if se > 0 else (0.0 if e.estimate == exact else math.inf)
            within += abs(z) < z_max
        results.append({"event": ev.to_dict(), "mc": e.to_dict(), "density_probability": exact, "z": z})
        rows.append([k, json.dumps(ev.to_dict(), sort_keys=True), e.estimate, e.stderr,
                     "" if exact is None else exact, "" if z is None else z])
    checked = sum(r["density_probability"] is not None for r in results)
    need = math.ceil(0.95 * checked)
    verdict = "pass" if within >= need else "fail"
    out = _envelope("events", cfg, seed, {"events": results, "within": within, "checked": checked,
                                          "required": need, "z_max": z_max}, verdict)
    table = _csv(["event", "spec", "mc_estimate", "mc_stderr", "density_probability", "z"], rows)
    return (EXIT_PASS if verdict == "pass" else EXIT_FAIL), _dump(out), table


COMMANDS = {
    "simulate": cmd_simulate,
    "exchangeability": cmd_exchangeability,
    "freedman": cmd_freedman,
    "characterize": cmd_characterize,
    "canonicalize": cmd_canonicalize,
    "events": cmd_events,
}


def cmd_density(args) -> tuple[int, str, None]:
    cfg = load_config(args.model)
    m = model_from_config(cfg)
    with open(args.traj) as fh:
        trajs = list(read_jsonl(fh))
    n = m.graph.vertex_count
    rows = []
    for k, tr in enumerate(trajs):
        if tr.clock == "X":
            if args.breakdown:
                # the raw clock is the time change by the identity
                b = density_split(tr.with_clock("Y"), m.graph, m.rates, TimeScale.identity(n))
                rows.append([k, "X", b.log_product, b.integral_tilde, b.integral_hat, log_density_x(tr, m.graph, m.rates)])
            else:
                rows.append([k, "X", log_density_x(tr, m.graph, m.rates)])
        else:
            b = density_split(tr, m.graph, m.rates, m.timescale)
            if args.breakdown:
                rows.append([k, "Y", b.log_product, b.integral_tilde, b.integral_hat, b.log_density])
            else:
                rows.append([k, "Y", b.log_density])
    header = ["trajectory", "clock"]
    header += ["log_product", "integral_tilde", "integral_hat", "log_density"] if args.breakdown else ["log_density"]
    return EXIT_PASS, _csv(header, rows), None


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--trials", type=int, help="Monte Carlo trials / trajectories")
    common.add_argument("--tol", type=float, help="check tolerance (z threshold for freedman/events)")
    common.add_argument("--out", help="output path (default: stdout)")

    p = argparse.ArgumentParser(prog="vrjp-bench", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("--config", "--model", dest="config", required=True, help="experiment/model JSON")
        if name in ("exchangeability", "characterize", "canonicalize"):
            sp.add_argument("--pairs", type=int)
        if name == "characterize":
            sp.add_argument("--checks", help=f"comma-separated subset of {','.join(CHECKS)}")
        if name in ("freedman", "events"):
            sp.add_argument("--table", help="also write a CSV table here")
    d = sub.add_parser("density", parents=[common])
    d.add_argument("--traj", required=True, help="JSONL trajectories")
    d.add_argument("--model", required=True, help="model JSON")
    d.add_argument("--breakdown", action="store_true", help="emit product and integral parts")
    r = sub.add_parser("run", parents=[common])
    r.add_argument("--config", required=True, help="experiment JSON with a 'command' field")
    r.add_argument("--pairs", type=int)
    r.add_argument("--checks")
    r.add_argument("--table")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "density":
            code, text, table = cmd_density(args)
            _emit(text, args.out)
            return code
        cfg = load_config(args.config)
        command = args.command
        out, table_path = args.out, getattr(args, "table", None)
        if command == "run":
            command = cfg.get("command")
            if command not in COMMANDS:
                raise ConfigError("run needs a 'command' field naming a subcommand")
            outputs = cfg.get("outputs", {})
            out = out or outputs.get("report") or outputs.get("trajectories")
            table_path = table_path or outputs.get("table")
        code, text, table = COMMANDS[command](cfg, args)
    except (SimulationError, ArithmeticError) as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        _emit(_dump({"command": args.command, "verdict": "fail", "error": str(exc)}), args.out)
        return EXIT_FAIL
    except (ConfigError, GraphError, RateError, TimeScaleError, TrajectoryError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(text, out)
    if table is not None and table_path:
        Path(table_path).write_text(table)
    return code


if __name__ == "__main__":
    sys.exit(main())
