"""Space split: regions separated by buffer zones whose ownership alternates between phases.

The grid is cut into ``l`` x ``m`` rectangular regions.  Along every cut line a
row of small rectangular buffer blocks straddles the cut; consecutive blocks
alternate between two classes.  In odd phases class-1 blocks belong to the
region on the low side of the cut (left or below) and class-2 blocks to the high
side, in even phases the other way round.  A robot that ends a phase inside a
block therefore starts the next phase in the neighbouring region.

Every cell has exactly one owner per phase, so the per-region sub-instances of
a phase never share a vertex.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import ndimage

from mapfsplit.grid import GridGraph, Vertex, VertexSet
from mapfsplit.instance import Instance

log = logging.getLogger(__name__)

DEFAULT_BLOCK = (4, 2)


class PartitionError(ValueError):
    pass


class SpaceSplitFailure(RuntimeError):
    """The phase schedule cannot route every robot; callers fall back to an unsplit solve."""


@dataclass(frozen=True)
class BufferBlock:
    a: int  # region on the low side of the cut
    b: int  # region on the high side
    cls: int  # 1 or 2
    cells: VertexSet

    def owner(self, phase: int) -> int:
        odd = phase % 2 == 1
        return self.a if (self.cls == 1) == odd else self.b


@dataclass
class SpacePartition:
    graph: GridGraph
    l: int
    m: int
    buffer_block: tuple[int, int]
    owner_map: np.ndarray  # (2, height, width): owner in odd / even phases, -1 on obstacles
    blocks: list[BufferBlock]
    xcuts: tuple[int, ...]
    ycuts: tuple[int, ...]
    repaired: int = 0

    @property
    def num_regions(self) -> int:
        return self.l * self.m

    @property
    def region_grid(self) -> tuple[int, int]:
        return self.l, self.m

    @property
    def regions(self) -> list[VertexSet]:
        """Cells owned by the same region in every phase."""
        core = self.owner_map[0] == self.owner_map[1]
        return [VertexSet(self.graph, core & (self.owner_map[0] == r)) for r in range(self.num_regions)]

    @property
    def buffers(self) -> list[VertexSet]:
        """One buffer zone per (adjacent region pair, class), in first-appearance order."""
        zones: dict[tuple[int, int, int], VertexSet] = {}
        for blk in self.blocks:
            key = (blk.a, blk.b, blk.cls)
            zones[key] = zones[key] + blk.cells if key in zones else blk.cells
        return list(zones.values())

    def phase_membership(self, phase: int) -> np.ndarray:
        return self.owner_map[(phase - 1) % 2]

    def owner(self, v: Vertex, phase: int) -> int:
        return int(self.phase_membership(phase)[v[1] - 1, v[0] - 1])

    def owner_of_index(self, idx: int, phase: int) -> int:
        return int(self.phase_membership(phase).ravel()[idx])

    def subgraph_mask(self, region: int, phase: int) -> np.ndarray:
        return self.phase_membership(phase) == region

    def subgraph(self, region: int, phase: int) -> VertexSet:
        return VertexSet(self.graph, self.subgraph_mask(region, phase))

    def region_position(self, r: int) -> tuple[int, int]:
        return r % self.l, r // self.l

    def region_distance(self, r1: int, r2: int) -> int:
        c1, w1 = self.region_position(r1)
        c2, w2 = self.region_position(r2)
        return abs(c1 - c2) + abs(w1 - w2)

    def toward(self, r: int, target: int) -> list[int]:
        """Neighbouring regions one hop closer to ``target``."""
        c, w = self.region_position(r)
        tc, tw = self.region_position(target)
        out = []
        if tc != c:
            out.append(r + (1 if tc > c else -1))
        if tw != w:
            out.append(r + (self.l if tw > w else -self.l))
        return out


def _cuts(size: int, parts: int) -> list[int]:
    return [int(np.floor(k * size / parts + 0.5)) for k in range(1, parts)]


def _band(cut: int, across: int, size: int) -> tuple[int, int]:
    lo = cut - across // 2 + 1
    hi = cut + across - across // 2
    return max(lo, 1), min(hi, size)


def _spans(size: int, cuts: list[int]) -> list[tuple[int, int]]:
    edges = [0] + cuts + [size]
    return [(edges[i] + 1, edges[i + 1]) for i in range(len(edges) - 1)]


def _layout_blocks(g: GridGraph, l: int, m: int, bw: int, bh: int, xcuts, ycuts):
    """Raw block rectangles as ``(a, b, c0, r0, c1, r1)`` with 1-based inclusive bounds."""
    xspans, yspans = _spans(g.width, xcuts), _spans(g.height, ycuts)
    vbands = [_band(x, bw, g.width) for x in xcuts]
    hbands = [_band(y, bw, g.height) for y in ycuts]
    segments = []
    # vertical cuts: blocks are bw wide, bh tall
    for k, (c0, c1) in enumerate(vbands):
        for j, (r0, r1) in enumerate(yspans):
            rects = []
            for y in range(r0, r1 + 1, bh):
                y1 = min(y + bh - 1, r1)
                if any(not (y1 < h0 or y > h1) for h0, h1 in hbands):
                    continue
                rects.append((c0, y, c1, y1))
            segments.append((j * l + k, j * l + k + 1, rects))
    # horizontal cuts: the same block rotated, bw tall and bh wide
    for k, (r0, r1) in enumerate(hbands):
        for i, (c0, c1) in enumerate(xspans):
            rects = []
            for x in range(c0, c1 + 1, bh):
                x1 = min(x + bh - 1, c1)
                if any(not (x1 < v0 or x > v1) for v0, v1 in vbands):
                    continue
                rects.append((x, r0, x1, r1))
            segments.append((k * l + i, (k + 1) * l + i, rects))
    return segments


def _giant_component(free: np.ndarray) -> np.ndarray:
    lab, k = ndimage.label(free)
    if k == 0:
        return free.copy()
    sizes = np.bincount(lab.ravel())
    sizes[0] = 0
    return lab == int(np.argmax(sizes))


def _stranded(owner: np.ndarray, region: int, giant: np.ndarray) -> np.ndarray:
    mask = (owner == region) & giant
    lab, k = ndimage.label(mask)
    if k <= 1:
        return np.zeros_like(mask)
    sizes = np.bincount(lab.ravel())
    sizes[0] = 0
    return mask & (lab != int(np.argmax(sizes)))


def _repair(own: np.ndarray, giant: np.ndarray, regions: int, max_rounds: int) -> int:
    """Hand stranded cells to an adjacent region until every phase subgraph is connected."""
    h, w = giant.shape
    moved = 0
    for _ in range(max_rounds):
        changed = False
        for q in (0, 1):
            for r in range(regions):
                bad = _stranded(own[q], r, giant)
                for row, col in zip(*np.nonzero(bad)):
                    best = None
                    for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0)):
                        rr, cc = row + dr, col + dc
                        if not (0 <= rr < h and 0 <= cc < w) or not giant[rr, cc]:
                            continue
                        o = own[q, rr, cc]
                        if o == r:
                            continue
                        fixed = own[0, rr, cc] == own[1, rr, cc]
                        if best is None or (fixed and not best[1]):
                            best = (int(o), fixed)
                    if best is not None:
                        own[:, row, col] = best[0]
                        moved += 1
                        changed = True
        if not changed:
            return moved
    raise PartitionError("could not make every region subgraph connected")


def build_partition(
    g: GridGraph, l: int, m: int, buffer_block: tuple[int, int] = DEFAULT_BLOCK
) -> SpacePartition:
    """Cut ``g`` into ``l`` columns by ``m`` rows of regions with alternating buffer blocks.

    ``buffer_block`` is ``(across, along)`` for vertical cuts; horizontal cuts use
    the same block turned by 90 degrees.
    """
    l, m = int(l), int(m)
    bw, bh = (int(x) for x in buffer_block)
    if l < 1 or m < 1 or l * m < 2:
        raise PartitionError(f"need at least two regions, got {l}x{m}")
    if bw < 1 or bh < 1:
        raise PartitionError(f"degenerate buffer block {bw}x{bh}")
    if g.width < l * (bw + 1) or g.height < m * (bw + 1):
        raise PartitionError(f"{g.width}x{g.height} grid too small for {l}x{m} regions with {bw}-wide buffers")
    xcuts, ycuts = _cuts(g.width, l), _cuts(g.height, m)
    free = ~g.blocked
    col_region = np.searchsorted(np.array(xcuts, dtype=int), np.arange(1, g.width + 1), side="left")
    row_region = np.searchsorted(np.array(ycuts, dtype=int), np.arange(1, g.height + 1), side="left")
    base = (row_region[:, None] * l + col_region[None, :]).astype(np.int32)
    own = np.stack([base, base.copy()])

    blocks: list[BufferBlock] = []
    for a, b, rects in _layout_blocks(g, l, m, bw, bh, xcuts, ycuts):
        usable = 0
        for c0, r0, c1, r1 in rects:
            mask = np.zeros_like(free)
            mask[r0 - 1 : r1, c0 - 1 : c1] = True
            mask &= free
            if not mask.any():
                continue  # fully blocked blocks are dropped
            cls = 1 if usable % 2 == 0 else 2
            usable += 1
            blk = BufferBlock(a, b, cls, VertexSet(g, mask))
            own[0][mask] = blk.owner(1)
            own[1][mask] = blk.owner(2)
            blocks.append(blk)
        if usable == 0:
            raise PartitionError(f"cut between regions {a} and {b} has no usable buffer block")
    own[:, ~free] = -1
    giant = _giant_component(free)
    moved = _repair(own, giant, l * m, max_rounds=4 * (g.width + g.height))
    if moved:
        log.debug("partition repair reassigned %d cells", moved)
        # a reassigned block cell now has a fixed owner
        blocks = [
            BufferBlock(blk.a, blk.b, blk.cls,
                        VertexSet(g, blk.cells.mask & (own[0] != own[1])))
            for blk in blocks
        ]
        blocks = [blk for blk in blocks if blk.cells]
    for q in (0, 1):
        for r in range(l * m):
            if _stranded(own[q], r, giant).any():
                raise PartitionError(f"region {r} is disconnected in {'odd' if q == 0 else 'even'} phases")
    return SpacePartition(g, l, m, (bw, bh), own, blocks, tuple(xcuts), tuple(ycuts), moved)


# -- robot classification ---------------------------------------------------------


class RobotClass(NamedTuple):
    group: int  # 1: a -> a, 2: b -> b, 3: a -> b, 4: b -> a

    @property
    def crossing(self) -> bool:
        return self.group in (3, 4)


def classify_robot(
    start: Vertex, goal: Vertex, part: SpacePartition, phase: int = 1, sides: tuple[int, int] = (0, 1)
) -> RobotClass:
    """Group of a robot relative to the two region subgraphs ``sides`` of ``phase``."""
    a, b = sides
    so, go = part.owner(start, phase), part.owner(goal, phase)
    if so not in sides or go not in sides:
        raise ValueError(f"robot {start}->{goal} is not inside regions {sides}")
    if so == a:
        return RobotClass(1 if go == a else 3)
    return RobotClass(2 if go == b else 4)


# -- intermediate state allocation ------------------------------------------------


@dataclass
class AllocationParams:
    lambda1: float = 1.0
    lambda2: float = 2.0
    T1: float = 0.0
    T2: float = 0.0

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("allocation weights must be non-negative")

    def with_thresholds(self, T1: float, T2: float) -> "AllocationParams":
        return AllocationParams(self.lambda1, self.lambda2, T1, T2)


class UsedVertices:
    """The set of vertices already claimed within one phase."""

    def __init__(self, graph: GridGraph, vertices=()):
        self.graph = graph
        self.mask = np.zeros(graph.num_cells, dtype=bool)
        for v in vertices:
            self.add(v)

    def add(self, v: Vertex) -> None:
        self.mask[self.graph.index(v)] = True

    def __contains__(self, v: Vertex) -> bool:
        return bool(self.mask[self.graph.index(v)])

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __iter__(self):
        return (self.graph.vertex(int(i)) for i in np.flatnonzero(self.mask))


def local_density(g: GridGraph, used_mask: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Occupied in-bounds neighbours (obstacles or claimed vertices) of each cell in ``idx``."""
    occ = np.pad(g.blocked | used_mask.reshape(g.blocked.shape), 1, constant_values=False)
    rows = idx // g.width + 1
    cols = idx % g.width + 1
    return (occ[rows, cols + 1].astype(np.int32) + occ[rows, cols - 1]
            + occ[rows + 1, cols] + occ[rows - 1, cols])


def f_values(params: AllocationParams, ds: np.ndarray, dg: np.ndarray, rho: np.ndarray) -> np.ndarray:
    ds = ds.astype(np.float64)
    dg = dg.astype(np.float64)
    return (params.lambda1 * (np.maximum(ds, params.T1) + np.maximum(dg, params.T2))
            + params.lambda2 * rho + ds + dg)


AuditHook = Callable[[dict], None]


def _allocate(g: GridGraph, sub_mask: np.ndarray, xs: int, xg: int, params: AllocationParams,
              used: np.ndarray, audit: AuditHook | None = None) -> int | None:
    ds = g.distances_from_index(xs).array
    dg = g.distances_from_index(xg).array
    cand = np.flatnonzero(sub_mask.ravel() & ~used & (ds >= 0) & (dg >= 0))
    if cand.size == 0:
        choice = None
    else:
        f = f_values(params, ds[cand], dg[cand], local_density(g, used, cand))
        choice = int(cand[int(np.argmin(f))])
    if audit is not None:
        audit({"graph": g, "subset": sub_mask.copy(), "start": xs, "goal": xg, "params": params,
               "used": used.copy(), "choice": choice})
    if choice is not None:
        used[choice] = True
    return choice


def allocate_intermediate(
    sub: VertexSet, xs: Vertex, xg: Vertex, params: AllocationParams, used: UsedVertices,
    audit: AuditHook | None = None,
) -> Vertex | None:
    """Unclaimed vertex of ``sub`` minimising the allocation f-value; it is added to ``used``.

    Ties go to the first vertex in row-major order.
    """
    g = sub.graph
    if used.graph != g:
        raise ValueError("used-vertex set belongs to a different graph")
    idx = _allocate(g, sub.mask, g.check_vertex(xs), g.check_vertex(xg), params, used.mask, audit)
    return None if idx is None else g.vertex(idx)


class Allocation(NamedTuple):
    vertex: Vertex | None
    mode: str  # goal | stay | hop | fallback


def _determine(part: SpacePartition, x: int, goal: int, phase: int, phases: int,
               used: np.ndarray, params: AllocationParams, audit) -> tuple[int | None, str]:
    g = part.graph
    if phase == phases:
        ok = part.owner_of_index(x, phase) == part.owner_of_index(goal, phase) and not used[goal]
        if ok:
            used[goal] = True
        return (goal if ok else None), "goal"
    r = part.owner_of_index(x, phase)
    target = part.owner_of_index(goal, phases)
    here = part.subgraph_mask(r, phase)
    stay = here & part.subgraph_mask(r, phase + 1)
    if r == target:
        return _allocate(g, stay, x, goal, params, used, audit), "stay"
    flip = np.zeros_like(stay)
    for nr in part.toward(r, target):
        flip |= here & part.subgraph_mask(nr, phase + 1)
    got = _allocate(g, flip, x, goal, params, used, audit)
    if got is not None:
        return got, "hop"
    # no room left in the buffer: wait inside the region
    return _allocate(g, stay, x, goal, params, used, audit), "fallback"


def determine_intermediate(
    x: Vertex, goal: Vertex, part: SpacePartition, used: UsedVertices,
    params: AllocationParams | None = None, phase: int = 1, phases: int = 2,
    audit: AuditHook | None = None,
) -> Allocation:
    """Intermediate state for a robot at ``x`` at the end of ``phase`` out of ``phases``.

    Robots already in their goal's final region stay in cells their region owns in
    both this and the next phase.  Others head for buffer blocks that change hands
    toward the goal region; when those are all claimed they stay, like the former.
    """
    g = part.graph
    params = params or AllocationParams()
    idx, mode = _determine(part, g.check_vertex(x), g.check_vertex(goal), phase, phases,
                           used.mask, params, audit)
    return Allocation(None if idx is None else g.vertex(idx), mode)


# -- phase schedule -----------------------------------------------------------------


@dataclass
class SubProblem:
    phase: int
    region: int
    robots: tuple[int, ...]
    instance: Instance


@dataclass
class PhasePlan:
    phases: int
    configs: list[list[Vertex]]  # configs[p] = configuration at the end of phase p; configs[0] = starts
    subproblems: list[list[SubProblem]]
    modes: list[list[str]] = field(default_factory=list)

    @property
    def count(self) -> int:
        return sum(len(ph) for ph in self.subproblems)


class _Infeasible(Exception):
    pass


def min_phases(inst: Instance, part: SpacePartition, limit: int = 64) -> int:
    """Fewest phases (at least 2) that leave every robot enough region hops."""
    s = inst.start_ids()
    t = inst.goal_ids()
    for K in range(2, limit + 1):
        if all(part.region_distance(part.owner_of_index(a, 1), part.owner_of_index(b, K)) <= K - 1
               for a, b in zip(s, t)):
            return K
    raise SpaceSplitFailure("no phase count routes every robot")


def _schedule(inst: Instance, part: SpacePartition, K: int, params: AllocationParams, audit):
    g = inst.graph
    goals = inst.goal_ids()
    pos = inst.start_ids()
    T = max((d or 0) for d in inst.shortest_distances()) if inst.n else 0
    configs = [list(pos)]
    modes = []
    for p in range(1, K + 1):
        pp = params.with_thresholds(T / K, T * (K - p) / K)
        used = np.zeros(g.num_cells, dtype=bool)
        hops = []
        for i in range(inst.n):
            r = part.owner_of_index(pos[i], p)
            hops.append(part.region_distance(r, part.owner_of_index(goals[i], K)))
        dist = [int(g.distances_from_index(goals[i]).array[pos[i]]) for i in range(inst.n)]
        order = sorted(range(inst.n), key=lambda i: (hops[i] == 0, -dist[i], i))
        if p == K:
            order = list(range(inst.n))
        nxt = [-1] * inst.n
        mode = [""] * inst.n
        for i in order:
            cell, mode[i] = _determine(part, pos[i], goals[i], p, K, used, pp, audit)
            if cell is None:
                raise _Infeasible(f"phase {p}: no state for robot {i}")
            if p < K:
                left = K - p - 1
                h = part.region_distance(part.owner_of_index(cell, p + 1), part.owner_of_index(goals[i], K))
                if h > left:
                    raise _Infeasible(f"phase {p}: robot {i} would need {h} hops in {left} phases")
            nxt[i] = cell
        configs.append(nxt)
        modes.append(mode)
        pos = nxt
    return configs, modes


def plan_phases(
    inst: Instance, part: SpacePartition, params: AllocationParams | None = None,
    phases: int | None = None, audit: AuditHook | None = None,
) -> PhasePlan:
    """Intermediate configurations and per-phase, per-region sub-instances.

    With ``phases`` unset the smallest feasible phase count is tried first and
    raised one at a time up to ``max(l + m, minimum)``.
    """
    if inst.graph != part.graph:
        raise ValueError("partition was built for a different graph")
    params = params or AllocationParams()
    g = inst.graph
    kmin = min_phases(inst, part)
    if phases is not None:
        if phases < kmin:
            raise SpaceSplitFailure(f"{phases} phases cannot route every robot (need {kmin})")
        candidates = [phases]
    else:
        candidates = list(range(kmin, max(part.l + part.m, kmin) + 1))
    last = None
    for K in candidates:
        try:
            configs, modes = _schedule(inst, part, K, params, audit)
        except _Infeasible as exc:
            log.debug("%d phases infeasible: %s", K, exc)
            last = exc
            continue
        subs = []
        for p in range(1, K + 1):
            phase_subs = []
            for r in range(part.num_regions):
                robots = tuple(i for i in range(inst.n) if part.owner_of_index(configs[p - 1][i], p) == r)
                if not robots:
                    continue
                sg = g.restricted(part.subgraph_mask(r, p))
                sub = Instance(sg, [g.vertex(configs[p - 1][i]) for i in robots],
                               [g.vertex(configs[p][i]) for i in robots], f"{inst.name}/p{p}r{r}")
                phase_subs.append(SubProblem(p, r, robots, sub))
            subs.append(phase_subs)
        verts = [[g.vertex(c) for c in cfg] for cfg in configs]
        return PhasePlan(K, verts, subs, modes)
    raise SpaceSplitFailure(f"no feasible phase schedule up to {candidates[-1]} phases: {last}")
