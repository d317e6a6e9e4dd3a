"""Command-line front end: ``plan``, ``sweep`` and ``validate``.

Exit codes: 0 plan found and validated, 1 usage or config error,
2 infeasible, 3 validation failed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .belief import trace_of
from .engine import PlanTrace, read_plan_text
from .pddlplus import GroundingError, PddlError
from .sampler import DisconnectedGraph, WaypointGraph
from .scenario import ConfigError, Scenario, ScenarioConfig, load_config

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_INVALID = 0, 1, 2, 3

SWEEP_COLUMNS = ("dFactor", "delta_s", "states_explored", "time_s", "final_trace",
                 "status", "generations", "cost", "valid")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _float_list(text: str) -> list[float]:
    vals = [float(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise argparse.ArgumentTypeError("expected a nonempty comma-separated list")
    return vals


def _int_list(text: str) -> list[int]:
    vals = _float_list(text)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError("dFactor values must be integers")
    return [int(v) for v in vals]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="beliefnav", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    pl = sub.add_parser("plan", help="sample, ground, plan and validate one scenario")
    pl.add_argument("--config", required=True,
                    help="config file, or a bundled scenario name (corridor, battery80, battery40)")
    pl.add_argument("--out", required=True, type=Path, help="output directory")
    pl.add_argument("--seed", type=int, help="override rng_seed")
    pl.add_argument("--delta", type=float, help="override delta_s")
    pl.add_argument("--dfactor", type=int, help="override d_factor")
    pl.add_argument("--timing", action="store_true",
                    help="record planning wall time in the artifacts (breaks byte-identity)")
    pl.add_argument("--figures", action="store_true", help="also render PNG figures")

    sw = sub.add_parser("sweep", help="plan over a grid of delta and dFactor values")
    sw.add_argument("--config", required=True, help="config file or bundled scenario name")
    sw.add_argument("--deltas", required=True, type=_float_list,
                    help="comma-separated tick lengths in seconds")
    sw.add_argument("--dfactors", required=True, type=_int_list,
                    help="comma-separated integer dFactor values")
    sw.add_argument("--out", required=True, type=Path, help="output directory")
    sw.add_argument("--seed", type=int, help="override rng_seed")
    sw.add_argument("--repeats", type=int, default=1,
                    help="plan each cell this many times and report the fastest")
    sw.add_argument("--figures", action="store_true", help="also render sweep.png")

    va = sub.add_parser("validate", help="re-simulate a plan file at a finer clock")
    va.add_argument("--plan", required=True, type=Path, help="plan.txt written by plan")
    va.add_argument("--config", required=True, help="config file or bundled scenario name")
    va.add_argument("--refine", type=int, help="refinement factor (default from config)")
    va.add_argument("--graph", type=Path,
                    help="waypoint graph (default: graph.txt beside the plan, else resampled)")
    va.add_argument("--seed", type=int, help="override rng_seed")
    return p


def _load(args) -> ScenarioConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(rng_seed=args.seed)
    if getattr(args, "delta", None) is not None:
        cfg = cfg.replace(delta_s=args.delta)
    if getattr(args, "dfactor", None) is not None:
        cfg = cfg.replace(d_factor=args.dfactor)
    try:
        cfg.search_params()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="\n")


def _stats_text(cfg_hash: str, tr: PlanTrace, timing: bool) -> str:
    lines = [
        "stats v1",
        f"config_hash {cfg_hash}",
        f"status {tr.status}",
        f"reason {tr.reason or 'none'}",
        f"states_explored {tr.states_explored}",
        f"generations {tr.generations}",
        f"peak_open {tr.peak_open}",
        f"final_trace {tr.final_trace!r}",
        f"cost {tr.cost!r}",
    ]
    if timing:
        lines.append(f"planning_time_s {tr.planning_time!r}")
    return "\n".join(lines) + "\n"


def cmd_plan(args) -> int:
    cfg = _load(args)
    cfg_hash = cfg.hash()
    sc = Scenario.load(cfg)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "graph.txt", f"# config_hash {cfg_hash}\n" + sc.graph.to_text())
    params = cfg.search_params()
    result = sc.plan(params)
    model = sc.model(params.d_factor)
    tr = PlanTrace.from_search(result, model, params, sc.initial_belief())
    _write(out / "plan.txt", tr.to_text(cfg_hash, args.timing))
    _write(out / "ticks.csv", tr.ticks_csv(cfg_hash))
    _write(out / "stats.txt", _stats_text(cfg_hash, tr, args.timing))
    print(f"config {cfg_hash}: {result.stats.expansions} states explored in "
          f"{result.stats.planning_time:.2f} s")
    if not result.found:
        _write(out / "validation.txt",
               f"validation v1\nconfig_hash {cfg_hash}\nstatus skipped\n"
               f"reason infeasible: {result.reason}\n")
        print(f"infeasible ({result.reason}): {result.detail}")
        return EXIT_INFEASIBLE
    rep = sc.validate(result.steps, params)
    _write(out / "validation.txt", f"# config_hash {cfg_hash}\n" + rep.to_text())
    if args.figures:
        from .report import plan_figures

        plan_figures(sc, tr, out)
    print(f"plan with {len(result.steps)} steps, cost {tr.cost:.4f}, "
          f"final trace {tr.final_trace:.4f}")
    if not rep.valid:
        for v in rep.violations:
            print(f"validation: {v}")
        return EXIT_INVALID
    print(f"validated at refinement {rep.refinement}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.repeats < 1:
        raise UsageError("--repeats must be at least 1")
    cfg = _load(args)
    cfg_hash = cfg.hash()
    sc = Scenario.load(cfg)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "graph.txt", f"# config_hash {cfg_hash}\n" + sc.graph.to_text())
    rows = []
    for df in args.dfactors:
        for delta in args.deltas:
            rows.append(run_cell(sc, cfg, delta, df, args.repeats))
            r = rows[-1]
            print(f"dFactor {df} delta {delta:g}: {r['status']}, {r['states_explored']} "
                  f"states, {r['time_s']} s")
    lines = [f"# config_hash {cfg_hash}", ",".join(SWEEP_COLUMNS)]
    lines += [",".join(str(r[c]) for c in SWEEP_COLUMNS) for r in rows]
    _write(out / "sweep.csv", "\n".join(lines) + "\n")
    if args.figures:
        from .report import sweep_figure

        sweep_figure(rows, out)
    return EXIT_OK


def run_cell(sc: Scenario, cfg: ScenarioConfig, delta: float, d_factor: int,
             repeats: int = 1) -> dict:
    """One sweep row; failures are recorded in the row rather than raised."""
    row = {"dFactor": d_factor, "delta_s": repr(float(delta)), "states_explored": "",
           "time_s": "", "final_trace": "", "status": "", "generations": "", "cost": "",
           "valid": ""}
    try:
        params = cfg.replace(delta_s=delta, d_factor=d_factor).search_params()
        best = None
        for _ in range(repeats):
            res = sc.plan(params)
            if best is None or res.stats.planning_time < best.stats.planning_time:
                best = res
        row.update(states_explored=best.stats.expansions, generations=best.stats.generations,
                   time_s=f"{best.stats.planning_time:.4f}",
                   status=best.status if best.found else f"infeasible:{best.reason}")
        if best.found:
            rep = sc.validate(best.steps, params)
            row.update(final_trace=repr(trace_of(best.final.belief)), cost=repr(best.cost),
                       valid="yes" if rep.valid else "no")
    except Exception as exc:  # noqa: BLE001 - a failing cell must not stop the sweep
        row["status"] = f"error:{type(exc).__name__}"
    return row


def cmd_validate(args) -> int:
    cfg = _load(args)
    try:
        pf = read_plan_text(args.plan.read_text())
    except FileNotFoundError:
        raise ConfigError(f"plan file not found: {args.plan}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if pf.status != "plan":
        print(f"plan file records status {pf.status}; nothing to validate")
        return EXIT_INFEASIBLE
    cfg = cfg.replace(delta_s=pf.delta, d_factor=pf.d_factor)
    graph_path = args.graph or args.plan.parent / "graph.txt"
    graph = WaypointGraph.load(graph_path) if graph_path.is_file() else None
    if pf.config_hash not in ("none", cfg.hash()):
        print(f"warning: plan was produced by config {pf.config_hash}, not {cfg.hash()}")
    sc = Scenario.load(cfg, graph)
    rep = sc.validate(pf.steps, cfg.search_params(), args.refine)
    sys.stdout.write(rep.to_text())
    return EXIT_OK if rep.valid else EXIT_INVALID


COMMANDS = {"plan": cmd_plan, "sweep": cmd_sweep, "validate": cmd_validate}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"beliefnav: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, PddlError, GroundingError, DisconnectedGraph, OSError,
            ValueError) as exc:
        print(f"beliefnav: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
