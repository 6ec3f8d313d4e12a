"""Command line: solve, bench, gen, validate.

Exit codes: 0 success, 1 error (bad input, unsolvable, internal failure),
2 timeout (``solve`` only), 3 plan rejected (``validate`` only).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import random
import statistics
import sys
from pathlib import Path

import yaml

from mapfsplit._backend import BACKEND
from mapfsplit.ecbs import Budget
from mapfsplit.instance import (
    GenerationError, Instance, InstanceError, ParseError, format_map, format_scenario,
    generate_random, load_instance, parse_map, parse_scenario,
)
from mapfsplit.pipeline import PipelineResult, SplitConfig, parse_split, run_pipeline
from mapfsplit.validation import Plan, PlanError, lower_bounds, validate

log = logging.getLogger("mapfsplit")

CSV_COLUMNS = [
    "instance", "seed", "n", "solver", "w", "split", "phases", "subproblems", "workers",
    "solved", "wall_ms", "makespan", "soc", "lb_mk", "lb_soc", "ratio_mk", "ratio_soc",
]
SUMMARY_COLUMNS = [
    "n", "solver", "w", "split", "runs", "solved", "solved_rate", "wall_ms_mean", "wall_ms_median",
    "solve_ms_mean", "overhead_ms_mean", "makespan_mean", "soc_mean", "ratio_mk_mean", "ratio_soc_mean",
]


class CliError(Exception):
    pass


def _dims(text: str) -> tuple[int, int]:
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None


def _ratios(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated fractions, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver", choices=["cbs", "ecbs"], default="ecbs")
    p.add_argument("--w", type=float, default=1.5, help="suboptimality factor for ecbs (cbs always uses 1)")
    p.add_argument("--objective", choices=["makespan", "soc"], default="makespan")
    p.add_argument("--time-split", type=int, default=None, metavar="K")
    p.add_argument("--ratios", type=_ratios, default=None, help="time-split ratios, e.g. 0.3,0.7")
    p.add_argument("--space-split", type=_dims, default=None, metavar="LxM")
    p.add_argument("--buffer", type=_dims, default=(4, 2), metavar="WxH")
    p.add_argument("--lambda1", type=float, default=1.0)
    p.add_argument("--lambda2", type=float, default=2.0)
    p.add_argument("--phases", type=int, default=None, help="force the number of space-split phases")
    p.add_argument("--check-solvable", choices=["off", "oracle", "subsolver"], default="off")
    p.add_argument("--timeout", type=float, default=60.0, help="seconds per run")
    p.add_argument("--node-limit", type=int, default=50_000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)


def _instance_args(p: argparse.ArgumentParser, agents_required: bool = False) -> None:
    p.add_argument("--instance", help="native instance JSON")
    p.add_argument("--map", help="MovingAI .map file")
    p.add_argument("--scen", help="MovingAI .scen file")
    p.add_argument("--agents", type=int, default=None, help="use the first N scenario entries")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mapfsplit", description="Split-based multi-robot path planning on grids.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    ap.add_argument("--config", help="YAML file with default option values")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one instance")
    _instance_args(p)
    _solver_args(p)
    p.add_argument("--split", default=None, help="split shorthand: none, 4t, 2x1s, 2s2t, ...")
    p.add_argument("--out", help="write the plan JSON here")

    p = sub.add_parser("bench", help="run a sweep and write CSV records")
    p.add_argument("--random", type=_dims, default=None, metavar="WxH", help="random grid size")
    p.add_argument("--obstacles", type=float, default=0.1)
    p.add_argument("--map", help="MovingAI .map file")
    p.add_argument("--scen", action="append", default=[], help="scenario file; repeat for several trials")
    p.add_argument("--agents", type=_int_list, required=False, default=None, help="robot counts, e.g. 10,20,40")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--splits", default="none", help="comma-separated split shorthands, e.g. none,2t,4t")
    _solver_args(p)
    p.add_argument("--out", default="-", help="CSV path ('-' for stdout)")

    p = sub.add_parser("gen", help="generate a random instance")
    p.add_argument("--size", type=_dims, required=True, metavar="WxH")
    p.add_argument("--obstacles", type=float, default=0.1)
    p.add_argument("--agents", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="instance JSON path ('-' for stdout)")
    p.add_argument("--map-out", help="also write a MovingAI map")
    p.add_argument("--scen-out", help="also write a MovingAI scenario")

    p = sub.add_parser("validate", help="check a plan against an instance")
    _instance_args(p)
    p.add_argument("--plan", required=True)
    return ap


def _apply_config(ap: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    """Parse ``argv`` with values from ``--config`` as defaults; explicit flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in COMMANDS), None)
    if not known.config or command is None:
        return ap.parse_args(argv)
    try:
        data = yaml.safe_load(Path(known.config).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise CliError(f"cannot read config {known.config}: {exc}") from exc
    if not isinstance(data, dict):
        raise CliError(f"config {known.config} must be a mapping")
    sub = ap._subparsers._group_actions[0].choices[command]  # noqa: SLF001
    known_actions = {a.dest: a for a in sub._actions}  # noqa: SLF001
    conv = {}
    for k, v in data.items():
        k = k.replace("-", "_")
        if k not in known_actions:
            raise CliError(f"unknown config key {k!r} for {command}")
        action = known_actions[k]
        if isinstance(v, (list, tuple)) and k in ("agents", "ratios", "splits"):
            v = ",".join(str(x) for x in v)
        if isinstance(v, str) and action.type is not None:
            v = action.type(v)
        if isinstance(v, (int, float)) and action.type is not None and not isinstance(v, bool):
            v = action.type(str(v))
        action.required = False  # supplied by the file
        conv[k] = v
    sub.set_defaults(**conv)
    return ap.parse_args(argv)


def _load(args) -> Instance:
    try:
        if args.instance:
            return load_instance(args.instance)
        if args.map and args.scen:
            return load_instance(map_path=args.map, scen_path=args.scen, agents=args.agents)
    except FileNotFoundError as exc:
        raise CliError(f"no such file: {exc.filename}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"instance JSON: {exc}") from exc
    raise CliError("give --instance or both --map and --scen")


def _split_from(args, text: str | None = None) -> SplitConfig:
    extra = dict(
        ratios=args.ratios, buffer=tuple(args.buffer), phases=args.phases,
        lambda1=args.lambda1, lambda2=args.lambda2, check_solvable=args.check_solvable,
    )
    if text is not None:
        return parse_split(text, **extra)
    k = args.time_split if args.time_split and args.time_split >= 2 else None
    regions = tuple(args.space_split) if args.space_split else None
    if regions and regions[0] * regions[1] < 2:
        regions = None
    return SplitConfig(time_k=k, regions=regions, **extra)


def _w(args) -> float:
    return 1.0 if args.solver == "cbs" else args.w


def _run(inst: Instance, args, split: SplitConfig, seed: int) -> PipelineResult:
    if split.ratios is not None and split.time_k is not None and len(split.ratios) != split.time_k:
        raise CliError(f"{len(split.ratios)} ratios given for a {split.time_k}-way time split")
    budget = Budget(time_limit=args.timeout, node_limit=args.node_limit)
    return run_pipeline(inst, split, args.objective, _w(args), budget, args.workers, seed)


def _record(inst: Instance, args, res: PipelineResult, seed: int) -> dict:
    lb_mk, lb_soc = lower_bounds(inst)
    m = res.metrics
    return {
        "instance": inst.name,
        "seed": seed,
        "n": inst.n,
        "solver": args.solver,
        "w": f"{_w(args):g}",
        "split": res.split,
        "phases": res.phases,
        "subproblems": res.subproblems,
        "workers": res.workers,
        "solved": int(res.solved),
        "wall_ms": f"{res.wall_time * 1000:.1f}",
        # not CSV columns: summed sub-solve time and the rest of the run
        "solve_ms": f"{res.solve_time * 1000:.1f}",
        "overhead_ms": f"{res.overhead_time * 1000:.1f}",
        "makespan": m.makespan if m else "",
        "soc": m.sum_of_costs if m else "",
        "lb_mk": lb_mk,
        "lb_soc": lb_soc,
        "ratio_mk": f"{m.ratio_makespan:.4f}" if m else "",
        "ratio_soc": f"{m.ratio_soc:.4f}" if m else "",
    }


def cmd_solve(args) -> int:
    inst = _load(args)
    split = _split_from(args, args.split)
    res = _run(inst, args, split, args.seed)
    out = _record(inst, args, res, args.seed)
    out["status"] = res.status
    out["objective"] = args.objective
    out["backend"] = BACKEND
    if res.fallback:
        out["fallback"] = res.fallback
    if res.message and res.status == "error":
        out["message"] = res.message
    print(json.dumps(out))
    if res.plan is not None and args.out:
        Path(args.out).write_text(json.dumps(res.plan.to_json()) + "\n")
    if res.solved:
        return 0
    return 2 if res.status == "timeout" else 1


def trial_seed(seed: int, n: int, trial: int) -> int:
    return random.Random(f"{seed}:{n}:{trial}").getrandbits(32)


def _bench_instances(args):
    """Yield ``(instance, seed)`` for every (n, trial) point in a fixed order."""
    if args.random is None and not args.map:
        raise CliError("bench needs --random WxH or --map with --scen")
    if args.random is not None:
        if not args.agents:
            raise CliError("--agents is required with --random")
        trials = args.trials or 1
        w, h = args.random
        for n in args.agents:
            for trial in range(trials):
                s = trial_seed(args.seed, n, trial)
                yield generate_random(w, h, args.obstacles, n, s), s
        return
    if not args.scen:
        raise CliError("--map needs at least one --scen")
    try:
        g = parse_map(Path(args.map).read_text())
        scens = [(Path(p).stem, Path(p).read_text()) for p in args.scen]
    except FileNotFoundError as exc:
        raise CliError(f"no such file: {exc.filename}") from exc
    trials = args.trials or len(scens)
    counts = args.agents or [None]
    for n in counts:
        for trial in range(trials):
            stem, text = scens[trial % len(scens)]
            inst = parse_scenario(text, g, n, name=f"{stem}-n{n}")
            yield inst, trial_seed(args.seed, inst.n, trial)


def _summary(rows: list[dict]) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["n"], r["solver"], r["w"], r["split"]), []).append(r)
    out = []
    for (n, solver, w, split), rs in groups.items():
        ok = [r for r in rs if r["solved"]]
        walls = [float(r["wall_ms"]) for r in rs]

        def mean(key):
            return f"{statistics.fmean(float(r[key]) for r in ok):.4f}" if ok else ""

        out.append({
            "n": n, "solver": solver, "w": w, "split": split, "runs": len(rs), "solved": len(ok),
            "solved_rate": f"{len(ok) / len(rs):.4f}",
            "wall_ms_mean": f"{statistics.fmean(walls):.1f}",
            "wall_ms_median": f"{statistics.median(walls):.1f}",
            "solve_ms_mean": f"{statistics.fmean(float(r['solve_ms']) for r in rs):.1f}",
            "overhead_ms_mean": f"{statistics.fmean(float(r['overhead_ms']) for r in rs):.1f}",
            "makespan_mean": mean("makespan"), "soc_mean": mean("soc"),
            "ratio_mk_mean": mean("ratio_mk"), "ratio_soc_mean": mean("ratio_soc"),
        })
    return out


def _write_csv(path: str, columns: list[str], rows: list[dict]) -> None:
    if path == "-":
        w = csv.DictWriter(sys.stdout, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)


def cmd_bench(args) -> int:
    splits = [s.strip() for s in args.splits.split(",") if s.strip()]
    configs = [_split_from(args, s) for s in splits]
    rows = []
    for inst, seed in _bench_instances(args):
        for split in configs:
            try:
                res = _run(inst, args, split, seed)
            except (ValueError, RuntimeError) as exc:
                # recorded as an unsolved run; the sweep goes on
                log.warning("%s / %s failed: %s", inst.name, split.label, exc)
                res = PipelineResult("error", None, None, split.label, 0, 0, args.workers, 0.0, message=str(exc))
            if res.solved and validate(inst, res.plan):
                raise AssertionError(f"{inst.name}: solved plan failed validation")
            rows.append(_record(inst, args, res, seed))
            log.info("%s %s solved=%s %.1f ms", inst.name, split.label, res.solved, res.wall_time * 1000)
    _write_csv(args.out, CSV_COLUMNS, rows)
    if args.out != "-":
        _write_csv(f"{args.out}.summary.csv" if not args.out.endswith(".csv")
                   else args.out[:-4] + ".summary.csv", SUMMARY_COLUMNS, _summary(rows))
    return 0


def cmd_gen(args) -> int:
    w, h = args.size
    inst = generate_random(w, h, args.obstacles, args.agents, args.seed)
    text = json.dumps(inst.to_json()) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    if args.map_out:
        Path(args.map_out).write_text(format_map(inst.graph))
    if args.scen_out:
        Path(args.scen_out).write_text(format_scenario(inst, Path(args.map_out or "map.map").name))
    return 0


def cmd_validate(args) -> int:
    inst = _load(args)
    try:
        plan = Plan.from_json(json.loads(Path(args.plan).read_text()))
    except FileNotFoundError as exc:
        raise CliError(f"no such file: {exc.filename}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"plan JSON: {exc}") from exc
    if plan.n != inst.n:
        raise CliError(f"plan has {plan.n} robots but the instance has {inst.n}")
    violations = validate(inst, plan)
    print(json.dumps({"ok": not violations, "violations": [v.to_json() for v in violations]}))
    return 0 if not violations else 3


COMMANDS = {"solve": cmd_solve, "bench": cmd_bench, "gen": cmd_gen, "validate": cmd_validate}


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(ap, argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except (CliError, ParseError, InstanceError, GenerationError, PlanError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
