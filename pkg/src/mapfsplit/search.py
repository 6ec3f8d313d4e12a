"""Single-agent searches: A* on the static grid and constrained focal space-time search."""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable, Sequence

from mapfsplit._backend import core
from mapfsplit.grid import DIRECTIONS, GridGraph, Vertex


class NoPathError(RuntimeError):
    pass


class UnreachableError(NoPathError):
    """The goal is not connected to the start at all."""


class HorizonError(NoPathError):
    """No path satisfies the constraints within the horizon cap."""


@dataclass(frozen=True)
class Constraint:
    """Forbids ``robot`` from being at ``vertex`` at ``time``, or, when ``to`` is set,
    from traversing ``vertex -> to`` arriving at ``time``."""

    robot: int
    time: int
    vertex: Vertex
    to: Vertex | None = None

    @property
    def kind(self) -> str:
        return "vertex" if self.to is None else "edge"

    def __post_init__(self):
        if self.to is not None and self.time < 1:
            raise ValueError("edge constraints need time >= 1")


def default_horizon(g: GridGraph) -> int:
    return 2 * g.width * g.height


def direction(g: GridGraph, a: Vertex, b: Vertex) -> int:
    d = (b[0] - a[0], b[1] - a[1])
    try:
        return DIRECTIONS.index(d)
    except ValueError:
        raise ValueError(f"{a} and {b} are not adjacent") from None


def vertex_key(g: GridGraph, cell: int, t: int) -> int:
    return t * g.num_cells + cell


def edge_key(g: GridGraph, cell: int, d: int, t: int) -> int:
    return (t * g.num_cells + cell) * 4 + d


def encode_constraints(
    g: GridGraph, constraints: Iterable[Constraint], goal: int
) -> tuple[set[int], set[int], int]:
    """Kernel keys for ``constraints`` plus the earliest time the goal may be held."""
    vcons: set[int] = set()
    econs: set[int] = set()
    min_arrival = 0
    for c in constraints:
        cell = g.check_vertex(c.vertex)
        if c.to is None:
            vcons.add(vertex_key(g, cell, c.time))
            if cell == goal and c.time + 1 > min_arrival:
                min_arrival = c.time + 1
        else:
            g.check_vertex(c.to)
            econs.add(edge_key(g, cell, direction(g, c.vertex, c.to), c.time))
    return vcons, econs, min_arrival


def astar_shortest(g: GridGraph, s: Vertex, t: Vertex) -> list[Vertex]:
    """A shortest path ignoring other robots.

    Manhattan heuristic; ties broken by smaller h, then neighbor order.
    """
    g.check_vertex(s)
    g.check_vertex(t)

    def h(v: Vertex) -> int:
        return abs(v[0] - t[0]) + abs(v[1] - t[1])

    seq = 0
    heap = [(h(s), h(s), seq, s)]
    parent: dict[Vertex, Vertex | None] = {s: None}
    cost = {s: 0}
    done = set()
    while heap:
        _, _, _, u = heapq.heappop(heap)
        if u in done:
            continue
        if u == t:
            path = [u]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return path[::-1]
        done.add(u)
        gu = cost[u] + 1
        for v in g.neighbors(u):
            if v not in done and gu < cost.get(v, gu + 1):
                cost[v] = gu
                parent[v] = u
                seq += 1
                hv = h(v)
                heapq.heappush(heap, (gu + hv, hv, seq, v))
    raise UnreachableError(f"{t} is unreachable from {s}")


def constrained_spacetime_search(
    g: GridGraph,
    s: Vertex,
    t: Vertex,
    constraints: Iterable[Constraint] = (),
    horizon_cap: int | None = None,
    focal_weight: float = 1.0,
    avoid: Sequence[Sequence[Vertex]] = (),
) -> tuple[list[Vertex], int]:
    """Focal space-time search with waits.

    Returns a path of cost at most ``focal_weight`` times the constrained optimum,
    preferring fewest conflicts with the robot paths in ``avoid`` (each treated as
    parked at its last vertex afterwards), and the lower bound on that optimum.
    """
    if focal_weight < 1:
        raise ValueError("focal weight must be >= 1")
    si = g.check_vertex(s)
    ti = g.check_vertex(t)
    field = g.distances_from_index(ti)
    if field.array[si] < 0:
        raise UnreachableError(f"{t} is unreachable from {s}")
    vcons, econs, min_arrival = encode_constraints(g, constraints, ti)
    others = [[g.index(v) for v in p] for p in avoid]
    horizon = default_horizon(g) if horizon_cap is None else horizon_cap
    res = core.focal_search(
        g.adjacency, core.prepare_h(field.array), si, ti, vcons, econs, min_arrival, horizon, focal_weight, others
    )
    if res is None:
        raise HorizonError(f"no path {s}->{t} within horizon {horizon}")
    cells, lb = res
    return [g.vertex(c) for c in cells], lb
