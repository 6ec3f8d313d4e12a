"""Split orchestration: none, time, space and time-space pipelines around the base solver.

Every pipeline ends with the independent validator.  A split that cannot be
built, or whose sub-problems are not all solved, falls back to solving the
original instance within whatever budget remains.
"""
from __future__ import annotations

import atexit
import logging
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from mapfsplit.ecbs import Budget, SolveResult, effective_workers, normalize_objective, solve
from mapfsplit.instance import Instance
from mapfsplit.space_split import (
    DEFAULT_BLOCK, AllocationParams, PartitionError, SpaceSplitFailure, SubProblem,
    build_partition, plan_phases,
)
from mapfsplit.time_split import (
    SplitFailure, TimeSplitSpec, compute_intermediate_configs, concatenate, split_instance,
)
from mapfsplit.validation import Metrics, Plan, compute_metrics, validate

log = logging.getLogger(__name__)

_SPACE_SHORTHAND = {1: (1, 1), 2: (2, 1), 4: (2, 2), 8: (4, 2)}
_SPLIT_RE = re.compile(r"^(?:(?P<l>\d+)(?:x(?P<m>\d+))?s)?(?:(?P<k>\d+)t)?$")


@dataclass(frozen=True)
class SplitConfig:
    """What to split and how; ``kind`` is one of none, time, space, time-space."""

    time_k: int | None = None
    ratios: tuple[float, ...] | None = None
    regions: tuple[int, int] | None = None
    buffer: tuple[int, int] = DEFAULT_BLOCK
    phases: int | None = None
    lambda1: float = 1.0
    lambda2: float = 2.0
    check_solvable: str = "off"
    variant: str | None = None  # time-split offsets; defaults to the objective

    @property
    def kind(self) -> str:
        if self.time_k and self.regions:
            return "time-space"
        if self.time_k:
            return "time"
        if self.regions:
            return "space"
        return "none"

    @property
    def label(self) -> str:
        out = ""
        if self.regions:
            out += f"{self.regions[0]}x{self.regions[1]}s"
        if self.time_k:
            out += f"{self.time_k}t"
        return out or "none"


def parse_split(text: str, **extra) -> SplitConfig:
    """Parse ``none``, ``<k>t``, ``<L>x<M>s``, ``<n>s`` or a space part followed by a time part.

    ``2s``, ``4s`` and ``8s`` are shorthands for 2x1, 2x2 and 4x2 regions.
    """
    t = text.strip().lower()
    if t in ("", "none", "0"):
        return SplitConfig(**extra)
    m = _SPLIT_RE.match(t)
    if not m or not (m.group("l") or m.group("k")):
        raise ValueError(f"cannot parse split {text!r}; expected e.g. none, 4t, 2x1s, 2s2t")
    regions = None
    if m.group("l"):
        l = int(m.group("l"))
        if m.group("m"):
            regions = (l, int(m.group("m")))
        elif l in _SPACE_SHORTHAND:
            regions = _SPACE_SHORTHAND[l]
        else:
            raise ValueError(f"no region-grid shorthand for {l}s; write it as LxMs")
        if regions[0] * regions[1] < 2:
            regions = None
    k = int(m.group("k")) if m.group("k") else None
    if k is not None and k < 2:
        k = None
    return SplitConfig(time_k=k, regions=regions, **extra)


@dataclass
class PipelineResult:
    status: str  # solved | timeout | error
    plan: Plan | None
    metrics: Metrics | None
    split: str
    phases: int
    subproblems: int
    workers: int
    wall_time: float
    solve_time: float = 0.0  # summed sub-solve wall time
    fallback: str | None = None
    message: str = ""
    sub_results: list[SolveResult] = field(default_factory=list)

    @property
    def solved(self) -> bool:
        return self.status == "solved"

    @property
    def overhead_time(self) -> float:
        return max(0.0, self.wall_time - self.solve_time)


# -- worker pool -----------------------------------------------------------------------

_pools: dict[int, ProcessPoolExecutor] = {}


def _pool(workers: int) -> ProcessPoolExecutor:
    pool = _pools.get(workers)
    if pool is None:
        pool = _pools[workers] = ProcessPoolExecutor(max_workers=workers)
    return pool


@atexit.register
def shutdown_pools() -> None:
    for pool in _pools.values():
        pool.shutdown(wait=False, cancel_futures=True)
    _pools.clear()


def _job(args):
    inst, objective, w, budget = args
    return solve(inst, objective, w, budget)


def _solve_all(subs: list[Instance], objective: str, w: float, budget: Budget, workers: int) -> list[SolveResult]:
    jobs = [(s, objective, w, budget) for s in subs]
    if workers <= 1 or len(jobs) <= 1:
        return [_job(j) for j in jobs]
    return list(_pool(workers).map(_job, jobs))


# -- pipelines ---------------------------------------------------------------------


class _SubFailure(Exception):
    pass


class Pipeline:
    def __init__(self, inst: Instance, split: SplitConfig | None = None, objective: str = "makespan",
                 w: float = 1.5, budget: Budget | None = None, workers: int = 1, seed: int = 0):
        self.inst = inst
        self.split = split or SplitConfig()
        self.objective = normalize_objective(objective)
        self.w = float(w)
        self.budget = budget or Budget()
        self.workers = effective_workers(workers)
        self.seed = seed
        self.sub_results: list[SolveResult] = []
        self.count = 0
        self.phases = 1

    def _solve(self, subs: list[Instance]) -> list[SolveResult]:
        res = _solve_all(subs, self.objective, self.w, self.budget.capped(self.deadline), self.workers)
        self.sub_results.extend(res)
        self.count += len(subs)
        return res

    def _time_spec(self) -> TimeSplitSpec:
        s = self.split
        return TimeSplitSpec(s.time_k, s.ratios, s.variant or self.objective, s.check_solvable, self.seed)

    def _time_split(self, inst: Instance, spec: TimeSplitSpec) -> Plan:
        """Split ``inst`` in time and solve; one re-draw before giving up."""
        for redraw in range(2):
            configs = compute_intermediate_configs(inst, spec, redraw)
            res = self._solve(split_instance(inst, configs))
            if all(r.solved for r in res):
                return concatenate([r.plan for r in res])
            if time.monotonic() > self.deadline:
                break
            log.debug("time split of %s: sub-solve failed, redraw %d", inst.name, redraw + 1)
        raise _SubFailure("time-split sub-problem not solved")

    def _space_split(self, time_spec: TimeSplitSpec | None) -> Plan:
        s = self.split
        part = build_partition(self.inst.graph, *s.regions, s.buffer)
        params = AllocationParams(s.lambda1, s.lambda2)
        pp = plan_phases(self.inst, part, params, s.phases)
        self.phases = pp.phases
        n = self.inst.n
        phase_plans = []
        for subs in pp.subproblems:
            paths: list[list | None] = [None] * n
            if time_spec is None:
                res = self._solve([sp.instance for sp in subs])
                if not all(r.solved for r in res):
                    raise _SubFailure(f"phase {subs[0].phase} sub-problem not solved")
                plans = [r.plan for r in res]
            else:
                plans = [self._time_space_part(sp, time_spec) for sp in subs]
            for sp, plan in zip(subs, plans):
                for i, path in zip(sp.robots, plan.paths):
                    paths[i] = path
            phase_plans.append(Plan(paths))
        return concatenate(phase_plans)

    def _time_space_part(self, sp: SubProblem, spec: TimeSplitSpec) -> Plan:
        try:
            return self._time_split(sp.instance, spec)
        except SplitFailure:
            res = self._solve([sp.instance])[0]
            if not res.solved:
                raise _SubFailure(f"phase {sp.phase} region {sp.region} not solved")
            return res.plan

    def run(self) -> PipelineResult:
        t0 = time.perf_counter()
        self.deadline = self.budget.start()
        kind = self.split.kind
        fallback = None
        plan = None
        try:
            if kind == "time":
                self.phases = self.split.time_k
                plan = self._time_split(self.inst, self._time_spec())
            elif kind in ("space", "time-space"):
                plan = self._space_split(self._time_spec() if kind == "time-space" else None)
        except (SplitFailure, PartitionError, SpaceSplitFailure, _SubFailure) as exc:
            fallback = str(exc)
            log.info("%s split of %s abandoned: %s", kind, self.inst.name, exc)
        status = "solved"
        if plan is None:
            if kind != "none" and time.monotonic() > self.deadline:
                status = "timeout"
            else:
                res = self._solve([self.inst])[0]
                plan = res.plan if res.solved else None
                if plan is None:
                    status = "timeout" if res.status in ("timeout", "node-limit") else "error"
        metrics = None
        message = fallback or ""
        if plan is not None:
            violations = validate(self.inst, plan)
            if violations:
                status = "error"
                message = f"plan rejected by validator: {violations[0].message}"
                plan = None
            else:
                metrics = compute_metrics(self.inst, plan, check=False)
        wall = time.perf_counter() - t0
        return PipelineResult(
            status, plan, metrics, self.split.label, self.phases, self.count, self.workers, wall,
            sum(r.stats.wall_time for r in self.sub_results), fallback, message, self.sub_results,
        )


def run_pipeline(inst: Instance, split: SplitConfig | str | None = None, objective: str = "makespan",
                 w: float = 1.5, budget: Budget | None = None, workers: int = 1, seed: int = 0) -> PipelineResult:
    if isinstance(split, str):
        split = parse_split(split)
    return Pipeline(inst, split, objective, w, budget, workers, seed).run()
