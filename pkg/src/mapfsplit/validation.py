"""Plan representation, an independent plan validator and evaluation metrics.

The validator deliberately does not reuse any solver code; it only relies on the
grid model for vertex membership and distances.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from mapfsplit.grid import GridGraph, Vertex
from mapfsplit.instance import Instance


class PlanError(ValueError):
    pass


class Plan:
    """Per-robot vertex sequences padded with goal waits to a common horizon."""

    __slots__ = ("paths",)

    def __init__(self, paths):
        paths = [[tuple(v) for v in p] for p in paths]
        if any(not p for p in paths):
            raise PlanError("every path needs at least one vertex")
        horizon = max((len(p) for p in paths), default=1)
        self.paths = [p + [p[-1]] * (horizon - len(p)) for p in paths]

    @classmethod
    def from_cells(cls, graph: GridGraph, cell_paths) -> "Plan":
        return cls([[graph.vertex(c) for c in p] for p in cell_paths])

    @property
    def horizon(self) -> int:
        return len(self.paths[0]) - 1 if self.paths else 0

    @property
    def n(self) -> int:
        return len(self.paths)

    def configuration(self, t: int) -> list[Vertex]:
        return [p[t] for p in self.paths]

    def __eq__(self, other) -> bool:
        return isinstance(other, Plan) and self.paths == other.paths

    def __repr__(self) -> str:
        return f"Plan(n={self.n}, T={self.horizon})"

    def to_json(self) -> dict:
        return {"horizon": self.horizon, "paths": [[list(v) for v in p] for p in self.paths]}

    @classmethod
    def from_json(cls, data: dict) -> "Plan":
        try:
            return cls([[tuple(v) for v in p] for p in data["paths"]])
        except (KeyError, TypeError) as exc:
            raise PlanError(f"malformed plan JSON: {exc}") from exc


@dataclass(frozen=True)
class Violation:
    kind: str  # count | endpoint | vertex | move | collision | swap
    robots: tuple[int, ...]
    time: int | None
    location: tuple | None
    message: str

    def to_json(self) -> dict:
        d = asdict(self)
        d["robots"] = list(self.robots)
        return d


def _clean(inst: Instance, plan: Plan) -> bool:
    """Vectorised check that the plan has no violation at all."""
    g = inst.graph
    P = np.asarray(plan.paths, dtype=np.int64)  # (n, T + 1, 2)
    if P.ndim != 3 or P.shape[2] != 2:
        return False
    if not (np.array_equal(P[:, 0], np.asarray(inst.starts)) and np.array_equal(P[:, -1], np.asarray(inst.goals))):
        return False
    c, r = P[..., 0], P[..., 1]
    if c.min() < 1 or r.min() < 1 or c.max() > g.width or r.max() > g.height:
        return False
    ids = (r - 1) * g.width + (c - 1)
    if g.blocked.ravel()[ids].any():
        return False
    if P.shape[1] == 1:
        return len(np.unique(ids[:, 0])) == len(ids)
    if (np.abs(np.diff(P, axis=1)).sum(axis=2) > 1).any():
        return False
    if (np.diff(np.sort(ids, axis=0), axis=0) == 0).any():
        return False
    a, b = ids[:, :-1], ids[:, 1:]
    moving = a != b
    N = g.num_cells
    t = np.arange(a.shape[1], dtype=np.int64)[None, :] * N * N
    fwd = (t + a * N + b)[moving]
    rev = (t + b * N + a)[moving]
    return not np.isin(fwd, rev).any()


def validate(inst: Instance, plan: Plan) -> list[Violation]:
    """Every violation of the plan; an empty list means the plan is valid."""
    if plan.n == inst.n and plan.n and _clean(inst, plan):
        return []
    out: list[Violation] = []
    g = inst.graph
    if plan.n != inst.n:
        return [
            Violation("count", (), None, None, f"plan has {plan.n} paths for {inst.n} robots")
        ]
    T = plan.horizon
    for i, p in enumerate(plan.paths):
        if p[0] != inst.starts[i]:
            out.append(Violation("endpoint", (i,), 0, p[0], f"robot {i} starts at {p[0]}, expected {inst.starts[i]}"))
        if p[T] != inst.goals[i]:
            out.append(Violation("endpoint", (i,), T, p[T], f"robot {i} ends at {p[T]}, expected {inst.goals[i]}"))
        for t, v in enumerate(p):
            if not g.has_vertex(v):
                out.append(Violation("vertex", (i,), t, v, f"robot {i} at non-vertex {v} at t={t}"))
        for t in range(1, T + 1):
            a, b = p[t - 1], p[t]
            if abs(a[0] - b[0]) + abs(a[1] - b[1]) > 1:
                out.append(Violation("move", (i,), t, (a, b), f"robot {i} jumps {a}->{b} at t={t}"))
    for t in range(T + 1):
        seen: dict[Vertex, int] = {}
        for i, p in enumerate(plan.paths):
            v = p[t]
            if v in seen:
                j = seen[v]
                out.append(Violation("collision", (j, i), t, v, f"robots {j} and {i} both at {v} at t={t}"))
            else:
                seen[v] = i
        if t == 0:
            continue
        moves: dict[tuple[Vertex, Vertex], int] = {}
        for i, p in enumerate(plan.paths):
            if p[t - 1] != p[t]:
                moves[(p[t - 1], p[t])] = i
        for (a, b), i in moves.items():
            j = moves.get((b, a))
            if j is not None and i < j:
                out.append(Violation("swap", (i, j), t, (a, b), f"robots {i} and {j} swap on {a}-{b} at t={t}"))
    return out


def is_valid(inst: Instance, plan: Plan) -> bool:
    return not validate(inst, plan)


@dataclass(frozen=True)
class Metrics:
    makespan: int
    sum_of_costs: int
    lower_bound_makespan: int
    lower_bound_soc: int
    arrival_times: tuple[int, ...]

    @property
    def ratio_makespan(self) -> float:
        return _ratio(self.makespan, self.lower_bound_makespan)

    @property
    def ratio_soc(self) -> float:
        return _ratio(self.sum_of_costs, self.lower_bound_soc)

    def optimality_ratio(self, objective: str = "makespan") -> float:
        return self.ratio_soc if objective in ("soc", "sum-of-costs") else self.ratio_makespan


def _ratio(cost: int, lb: int) -> float:
    if lb == 0:
        return 1.0 if cost == 0 else float("inf")
    return cost / lb


def arrival_time(path: list[Vertex], goal: Vertex) -> int:
    """Smallest t with the robot at ``goal`` from t through the end of the path."""
    t = len(path) - 1
    while t > 0 and path[t - 1] == goal:
        t -= 1
    return t


def lower_bounds(inst: Instance) -> tuple[int, int]:
    ds = []
    for s, g in zip(inst.starts, inst.goals):
        d = inst.graph.dist(g, s)
        if d is None:
            raise PlanError(f"goal {g} unreachable from {s}")
        ds.append(d)
    return max(ds, default=0), sum(ds)


def compute_metrics(inst: Instance, plan: Plan, check: bool = True) -> Metrics:
    if check:
        bad = validate(inst, plan)
        if bad:
            raise PlanError(f"invalid plan: {bad[0].message} ({len(bad)} violations)")
    arrivals = tuple(arrival_time(p, g) for p, g in zip(plan.paths, inst.goals))
    lb_mk, lb_soc = lower_bounds(inst)
    return Metrics(
        makespan=plan.horizon,
        sum_of_costs=sum(arrivals),
        lower_bound_makespan=lb_mk,
        lower_bound_soc=lb_soc,
        arrival_times=arrivals,
    )
