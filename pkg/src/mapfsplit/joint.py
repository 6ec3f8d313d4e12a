"""Exhaustive joint-configuration search for tiny instances.

Used as the exact solvability decision behind ``check_solvable(mode="oracle")``.
Greedy best-first on the sum of remaining distances finds a witness quickly when
one exists; proving infeasibility explores the whole reachable component.
"""
from __future__ import annotations

import heapq

from mapfsplit.instance import Instance

MAX_ROBOTS = 4
MAX_VERTICES = 36


class OracleDomainError(ValueError):
    pass


def check_domain(inst: Instance) -> None:
    if inst.n > MAX_ROBOTS or inst.graph.num_vertices > MAX_VERTICES:
        raise OracleDomainError(
            f"joint oracle limited to n <= {MAX_ROBOTS} and |V| <= {MAX_VERTICES}, "
            f"got n={inst.n}, |V|={inst.graph.num_vertices}"
        )


def _successors(config, moves):
    n = len(config)
    at = {v: r for r, v in enumerate(config)}
    new = [None] * n
    used = set()

    def rec(r):
        if r == n:
            yield tuple(new)
            return
        a = config[r]
        for b in moves[a]:
            if b in used:
                continue
            # swap with an already assigned robot; later robots check against us
            q = at.get(b)
            if q is not None and q < r and new[q] == a:
                continue
            new[r] = b
            used.add(b)
            yield from rec(r + 1)
            used.discard(b)
            new[r] = None

    yield from rec(0)


def joint_search(inst: Instance, max_states: int = 3_000_000) -> list[tuple] | None:
    """A collision-free sequence of configurations from starts to goals, or ``None``.

    Raises ``RuntimeError`` if ``max_states`` is exceeded before a decision.
    """
    check_domain(inst)
    g = inst.graph
    start = tuple(g.index(v) for v in inst.starts)
    goal = tuple(g.index(v) for v in inst.goals)
    moves = {}
    for v in g.vertices():
        i = g.index(v)
        moves[i] = [i] + [int(j) for j in g.neighbor_table[i] if j >= 0]
    fields = [g.distances_from_index(t).array for t in goal]
    if any(f[s] < 0 for f, s in zip(fields, start)):
        return None

    def h(cfg):
        return sum(int(f[c]) for f, c in zip(fields, cfg))

    parent = {start: None}
    heap = [(h(start), 0, start)]
    seq = 0
    while heap:
        _, _, cfg = heapq.heappop(heap)
        if cfg == goal:
            out = [cfg]
            while parent[out[-1]] is not None:
                out.append(parent[out[-1]])
            out.reverse()
            return [tuple(g.vertex(c) for c in cfg) for cfg in out]
        for nxt in _successors(cfg, moves):
            if nxt in parent:
                continue
            parent[nxt] = cfg
            if len(parent) > max_states:
                raise RuntimeError(f"joint search exceeded {max_states} states")
            seq += 1
            heapq.heappush(heap, (h(nxt), seq, nxt))
    return None


def is_solvable(inst: Instance, max_states: int = 3_000_000) -> bool:
    return joint_search(inst, max_states) is not None
