"""CBS (w = 1) and ECBS (w > 1) over the focal space-time kernel.

Both objectives are supported: node cost is the sum of per-robot arrival times
(``soc``) or their maximum (``makespan``); node lower bounds aggregate the
per-robot lower bounds the low level reports the same way.
"""
from __future__ import annotations

import heapq
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from mapfsplit._backend import core
from mapfsplit.grid import GridGraph, Vertex
from mapfsplit.instance import Instance
from mapfsplit.search import default_horizon
from mapfsplit.validation import Plan

log = logging.getLogger(__name__)

OBJECTIVES = ("makespan", "soc")


def normalize_objective(objective: str) -> str:
    o = objective.lower().replace("_", "-")
    if o in ("makespan", "mk"):
        return "makespan"
    if o in ("soc", "sum-of-costs", "tt"):
        return "soc"
    raise ValueError(f"unknown objective {objective!r}")


@dataclass
class Budget:
    """Per-solve limits; ``deadline`` is an absolute ``time.monotonic()`` value."""

    time_limit: float = 60.0
    node_limit: int = 50_000
    deadline: float | None = None

    def start(self) -> float:
        end = time.monotonic() + self.time_limit
        return end if self.deadline is None else min(end, self.deadline)

    def capped(self, deadline: float | None) -> "Budget":
        if deadline is None:
            return self
        d = deadline if self.deadline is None else min(deadline, self.deadline)
        return Budget(self.time_limit, self.node_limit, d)


@dataclass
class SolveStats:
    expanded: int = 0
    generated: int = 0
    low_level_calls: int = 0
    wall_time: float = 0.0


@dataclass
class SolveResult:
    status: str  # solved | timeout | node-limit | infeasible
    plan: Plan | None
    objective: int | None
    lower_bound: int
    stats: SolveStats = field(default_factory=SolveStats)
    paths: list[list[int]] | None = None  # cell-id paths, unpadded

    @property
    def solved(self) -> bool:
        return self.status == "solved"


class Conflict(NamedTuple):
    time: int
    i: int
    j: int
    kind: str  # vertex | edge
    location: tuple


def detect_first_conflict(paths: Sequence[Sequence[Vertex]]) -> Conflict | None:
    """Earliest conflict among vertex paths padded with goal waits, or ``None``.

    Ties are broken by lower ``i``, then lower ``j``, vertex before edge.
    """
    if not paths:
        return None
    index: dict[Vertex, int] = {}
    cell_paths = [[index.setdefault(tuple(v), len(index)) for v in p] for p in paths]
    found = core.all_conflicts(cell_paths)
    if not found:
        return None
    t, i, j, kind, x, y = min(found)
    verts = {c: v for v, c in index.items()}
    if kind == 0:
        return Conflict(t, i, j, "vertex", verts[x])
    return Conflict(t, i, j, "edge", (verts[x], verts[y]))


class _Node:
    __slots__ = (
        "id", "parent", "agent", "vkey", "ekey", "paths", "costs", "lbs",
        "cost", "lb", "conflicts", "depth", "closed", "in_focal",
    )

    def __lt__(self, other):
        return self.id < other.id


class ECBS:
    """High-level conflict-tree search with a focal list on node conflict counts."""

    def __init__(self, inst: Instance, objective: str = "makespan", w: float = 1.0,
                 budget: Budget | None = None, horizon: int | None = None):
        if w < 1:
            raise ValueError("suboptimality factor must be >= 1")
        self.inst = inst
        self.g: GridGraph = inst.graph
        self.objective = normalize_objective(objective)
        self.w = float(w)
        self.budget = budget or Budget()
        self.horizon = default_horizon(self.g) if horizon is None else horizon
        self.N = self.g.num_cells
        self.starts = inst.start_ids()
        self.goals = inst.goal_ids()
        self.h = [core.prepare_h(self.g.distances_from_index(t).array) for t in self.goals]
        self.stats = SolveStats()
        self._next_id = 0

    def _aggregate(self, values) -> int:
        if not values:
            return 0
        return max(values) if self.objective == "makespan" else sum(values)

    def _constraints(self, node: _Node, agent: int) -> tuple[set, set, int]:
        vcons, econs = set(), set()
        min_arrival = 0
        goal = self.goals[agent]
        N = self.N
        while node is not None:
            if node.agent == agent:
                if node.vkey >= 0:
                    vcons.add(node.vkey)
                    t, cell = divmod(node.vkey, N)
                    if cell == goal and t + 1 > min_arrival:
                        min_arrival = t + 1
                else:
                    econs.add(node.ekey)
            node = node.parent
        return vcons, econs, min_arrival

    def _low_level(self, agent: int, paths: list, vcons, econs, min_arrival):
        self.stats.low_level_calls += 1
        others = [p for j, p in enumerate(paths) if j != agent and p is not None]
        return core.focal_search(
            self.g.adjacency, self.h[agent], self.starts[agent], self.goals[agent],
            vcons, econs, min_arrival, self.horizon, self.w, others,
        )

    def _new_node(self) -> _Node:
        node = _Node()
        node.id = self._next_id
        self._next_id += 1
        node.closed = False
        node.in_focal = False
        self.stats.generated += 1
        return node

    def _constraint_for(self, conflict, agent: int) -> tuple[int, int]:
        t, i, j, kind, x, y = conflict
        if kind == 0:
            return t * self.N + x, -1
        # agent i moved x -> y, agent j moved y -> x
        a, b = (x, y) if agent == i else (y, x)
        adj = self.g.neighbor_table[a]
        d = int(list(adj).index(b))
        return -1, (t * self.N + a) * 4 + d

    def _result(self, status: str, node: _Node | None, lb: int, t0: float) -> SolveResult:
        self.stats.wall_time = time.perf_counter() - t0
        if node is None:
            return SolveResult(status, None, None, lb, self.stats)
        plan = Plan.from_cells(self.g, node.paths)
        return SolveResult(status, plan, node.cost, lb, self.stats, [list(p) for p in node.paths])

    def solve(self) -> SolveResult:
        t0 = time.perf_counter()
        deadline = self.budget.start()
        n = self.inst.n
        root = self._new_node()
        root.parent = None
        root.agent = -1
        root.vkey = root.ekey = -1
        root.depth = 0
        paths: list = [None] * n
        costs, lbs = [0] * n, [0] * n
        for a in range(n):
            res = self._low_level(a, paths, set(), set(), 0)
            if res is None:
                log.debug("robot %d has no path at the root", a)
                return self._result("infeasible", None, 0, t0)
            paths[a], lbs[a] = res
            costs[a] = len(paths[a]) - 1
            if time.monotonic() > deadline:
                return self._result("timeout", None, self._aggregate(lbs), t0)
        root.paths, root.costs, root.lbs = paths, costs, lbs
        root.cost = self._aggregate(costs)
        root.lb = self._aggregate(lbs)
        root.conflicts = core.all_conflicts(paths)

        open_heap = [(root.lb, root.id, root)]
        focal: list = []
        pending = [root]  # open nodes not yet in focal
        threshold = -1.0
        best_lb = root.lb
        while True:
            while open_heap and open_heap[0][2].closed:
                heapq.heappop(open_heap)
            if not open_heap:
                return self._result("infeasible", None, best_lb, t0)
            lb_min = open_heap[0][0]
            best_lb = max(best_lb, lb_min)
            if time.monotonic() > deadline:
                return self._result("timeout", None, best_lb, t0)
            if self.stats.generated > self.budget.node_limit:
                return self._result("node-limit", None, best_lb, t0)
            bound = self.w * lb_min + 1e-9
            if bound > threshold:
                threshold = bound
                keep = []
                for nd in pending:
                    if nd.closed:
                        continue
                    if nd.cost <= bound:
                        nd.in_focal = True
                        heapq.heappush(focal, (len(nd.conflicts), nd.cost, nd.id, nd))
                    else:
                        keep.append(nd)
                pending = keep
            while True:
                node = heapq.heappop(focal)[3]
                if not node.closed:
                    break
            node.closed = True
            self.stats.expanded += 1
            if not node.conflicts:
                return self._result("solved", node, lb_min, t0)
            conflict = min(node.conflicts)
            for agent in (conflict[1], conflict[2]):
                vkey, ekey = self._constraint_for(conflict, agent)
                child = self._new_node()
                child.parent = node
                child.agent = agent
                child.vkey, child.ekey = vkey, ekey
                child.depth = node.depth + 1
                vcons, econs, min_arrival = self._constraints(child, agent)
                res = self._low_level(agent, node.paths, vcons, econs, min_arrival)
                if res is None:
                    continue
                path, lb = res
                child.paths = list(node.paths)
                child.paths[agent] = path
                child.costs = list(node.costs)
                child.costs[agent] = len(path) - 1
                child.lbs = list(node.lbs)
                child.lbs[agent] = max(lb, node.lbs[agent])
                child.cost = self._aggregate(child.costs)
                child.lb = self._aggregate(child.lbs)
                child.conflicts = [c for c in node.conflicts if c[1] != agent and c[2] != agent]
                child.conflicts.extend(core.agent_conflicts(child.paths, agent))
                heapq.heappush(open_heap, (child.lb, child.id, child))
                if child.cost <= threshold:
                    child.in_focal = True
                    heapq.heappush(focal, (len(child.conflicts), child.cost, child.id, child))
                else:
                    pending.append(child)


def solve(inst: Instance, objective: str = "makespan", w: float = 1.0, budget: Budget | None = None) -> SolveResult:
    return ECBS(inst, objective, w, budget).solve()


@dataclass
class BatchResult:
    results: list[SolveResult]
    wall_time: float
    workers: int

    def __iter__(self):
        return iter(self.results)

    def __len__(self):
        return len(self.results)

    def __getitem__(self, i):
        return self.results[i]

    @property
    def all_solved(self) -> bool:
        return all(r.solved for r in self.results)


def _solve_job(args):
    inst, objective, w, budget = args
    return solve(inst, objective, w, budget)


def solve_parallel_batch(
    subproblems: Sequence[Instance],
    objective: str = "makespan",
    w: float = 1.0,
    budget: Budget | None = None,
    workers: int = 1,
) -> BatchResult:
    """Solve independent instances; results keep input order regardless of scheduling."""
    t0 = time.perf_counter()
    budget = budget or Budget()
    jobs = [(inst, objective, w, budget) for inst in subproblems]
    workers = min(effective_workers(workers), len(jobs)) if jobs else 1
    if workers == 1:
        results = [_solve_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_job, jobs))
    return BatchResult(results, time.perf_counter() - t0, workers)


def available_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def effective_workers(requested: int) -> int:
    """Requested worker count capped at the usable CPUs; extra processes would only time-slice."""
    return max(1, min(int(requested), available_workers()))
