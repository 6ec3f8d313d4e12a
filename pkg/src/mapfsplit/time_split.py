"""k-time-split: route robots through k-1 conflict-free intermediate configurations.

Each boundary ``j`` places robot ``i`` on a vertex roughly ``d_ij`` steps along a
shortest path from its start (and ``|P_i| - d_ij`` from its goal).  Robots are
served longest path first; when the target annulus is exhausted by earlier
robots it is widened one step at a time on both sides.  From the second
boundary on, the random draw prefers annulus vertices closest to the robot's
previous boundary state.
"""
from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field

import numpy as np

from mapfsplit._backend import core
from mapfsplit.ecbs import Budget, solve
from mapfsplit.grid import Vertex
from mapfsplit.instance import Instance
from mapfsplit.joint import check_domain, joint_search
from mapfsplit.validation import Plan

log = logging.getLogger(__name__)

CHECK_MODES = ("off", "oracle", "subsolver")


class SplitFailure(RuntimeError):
    """No usable intermediate configuration; callers fall back to an unsplit solve."""


class ConcatenationError(ValueError):
    pass


@dataclass(frozen=True)
class TimeSplitSpec:
    k: int = 2
    ratios: tuple[float, ...] | None = None
    objective_variant: str = "makespan"  # makespan | soc
    check_solvable: str = "off"
    seed: int = 0
    max_redraws: int = 10
    subsolver_budget: float = 2.0

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")
        if self.ratios is not None:
            r = tuple(float(x) for x in self.ratios)
            if len(r) != self.k:
                raise ValueError(f"{len(r)} ratios given for k={self.k}")
            if any(x <= 0 for x in r) or not math.isclose(sum(r), 1.0, abs_tol=1e-6):
                raise ValueError(f"ratios must be positive and sum to 1, got {r}")
            object.__setattr__(self, "ratios", r)
        variant = self.objective_variant.lower()
        variant = {"sum-of-costs": "soc", "mk": "makespan", "tt": "soc"}.get(variant, variant)
        if variant not in ("makespan", "soc"):
            raise ValueError(f"unknown objective variant {self.objective_variant!r}")
        object.__setattr__(self, "objective_variant", variant)
        if self.check_solvable not in CHECK_MODES:
            raise ValueError(f"check_solvable must be one of {CHECK_MODES}")

    def prefix(self, j: int) -> float:
        """Fraction of the horizon covered by the first ``j`` sub-problems."""
        if self.ratios is None:
            return j / self.k
        return sum(self.ratios[:j])


@dataclass
class IntermediateConfigs:
    starts: tuple[Vertex, ...]
    goals: tuple[Vertex, ...]
    states: list[list[Vertex]]  # states[j - 1][i] for boundaries j = 1 .. k-1
    offsets: list[list[int]] = field(default_factory=list)  # target d_ij
    widening: list[list[int]] = field(default_factory=list)  # widening rounds used
    redraws: list[int] = field(default_factory=list)  # extra attempts per boundary
    witness_fallbacks: int = 0

    @property
    def k(self) -> int:
        return len(self.states) + 1

    def boundary(self, j: int) -> list[Vertex]:
        """Configuration at boundary ``j``; 0 is the start and ``k`` the goal configuration."""
        if j == 0:
            return list(self.starts)
        if j == self.k:
            return list(self.goals)
        return list(self.states[j - 1])


def _round(x: float) -> int:
    return int(math.floor(x + 0.5))


def _offsets(spec: TimeSplitSpec, plen: list[int], j: int) -> list[int]:
    if spec.objective_variant == "soc":
        T = max(plen, default=0)
        cap = _round(spec.prefix(j) * T)
        return [min(cap, p) for p in plen]
    return [min(max(_round(spec.prefix(j) * p), 0), p) for p in plen]


def _pick(ds, dg, d, rest, used, rng, dprev=None):
    """Widen the annulus around offset ``d`` until an unused vertex qualifies.

    A cell enters the annulus after ``max(|ds - d|, |dg - rest|)`` widening rounds
    (``rest`` is the remaining distance to the goal), so the smallest such value
    over the free cells is the number of rounds the step-by-step widening takes.

    ``dprev`` lazily gives distances from the robot's previous boundary state; the
    draw is then restricted to the tied cells nearest that state, so consecutive
    boundaries stay on one shortest path instead of jumping across the layer.
    """
    rounds, cand = core.annulus_candidates(ds, dg, d, rest, used)
    if rounds < 0:
        return None, 0
    if dprev is not None and cand.size > 1:
        near = dprev()[cand]
        cand = cand[near == near.min()]
    return int(cand[rng.randrange(cand.size)]), rounds


def check_solvable(sub: Instance, mode: str = "off", budget: float = 2.0) -> bool:
    if mode == "off":
        return True
    if mode == "oracle":
        return joint_search(sub) is not None
    if mode == "subsolver":
        return solve(sub, "makespan", 1.5, Budget(time_limit=budget)).solved
    raise ValueError(f"unknown check mode {mode!r}")


def compute_intermediate_configs(inst: Instance, spec: TimeSplitSpec, redraw: int = 0) -> IntermediateConfigs:
    """Intermediate configurations for every boundary of a ``spec.k``-way split.

    ``redraw`` shifts the random streams so callers can ask for fresh choices.
    """
    g = inst.graph
    n = inst.n
    if spec.check_solvable == "oracle":
        check_domain(inst)
    s_ids, g_ids = inst.start_ids(), inst.goal_ids()
    DS = g.distance_rows(s_ids)
    DG = g.distance_rows(g_ids)
    # individual shortest path lengths |P_i|; only the length of each A* path is used
    plen = [int(DG[i, s_ids[i]]) for i in range(n)]
    if min(plen, default=0) < 0:
        raise SplitFailure("some robot cannot reach its goal")
    order = sorted(range(n), key=lambda i: (-plen[i], i))
    configs = IntermediateConfigs(inst.starts, inst.goals, [])
    prev = list(inst.starts)
    for j in range(1, spec.k):
        d = _offsets(spec, plen, j)
        if j == 1:
            pfields = [None] * n
        else:
            pfields = [(lambda v=v: g.distances(v).array) for v in prev]
        chosen = None
        for attempt in range(spec.max_redraws):
            used = np.zeros(g.num_cells, dtype=np.uint8)
            states: list[Vertex | None] = [None] * n
            rounds = [0] * n
            ok = True
            rng = random.Random(f"{spec.seed}:{redraw}:{j}:{attempt}")
            for i in order:
                cell, rounds[i] = _pick(DS[i], DG[i], d[i], plen[i] - d[i], used, rng, pfields[i])
                if cell is None:
                    ok = False
                    break
                used[cell] = True
                states[i] = g.vertex(cell)
            if not ok:
                continue
            if spec.check_solvable == "off" or check_solvable(
                Instance(g, prev, states), spec.check_solvable, spec.subsolver_budget
            ):
                chosen = (states, rounds, attempt)
                break
            log.debug("boundary %d attempt %d not solvable, redrawing", j, attempt)
        if chosen is None and spec.check_solvable == "oracle":
            # a configuration visited by an actual solution is always a feasible split point
            witness = joint_search(Instance(g, prev, inst.goals))
            if witness is None:
                raise SplitFailure(f"boundary {j}: remaining problem is unsolvable")
            frac = (spec.prefix(j) - spec.prefix(j - 1)) / (1.0 - spec.prefix(j - 1))
            states = list(witness[_round(frac * (len(witness) - 1))])
            chosen = (states, [-1] * n, spec.max_redraws)
            configs.witness_fallbacks += 1
        if chosen is None:
            raise SplitFailure(f"boundary {j}: no feasible intermediate configuration after {spec.max_redraws} draws")
        states, rounds, attempt = chosen
        configs.states.append(list(states))
        configs.offsets.append(d)
        configs.widening.append(rounds)
        configs.redraws.append(attempt)
        prev = list(states)
    return configs


def compute_intermediate_configs_soc(inst: Instance, spec: TimeSplitSpec, redraw: int = 0) -> IntermediateConfigs:
    """Sum-of-costs variant: offsets are ``min(j T / k, |P_i|)`` with ``T`` the makespan lower bound."""
    if spec.objective_variant != "soc":
        spec = TimeSplitSpec(spec.k, spec.ratios, "soc", spec.check_solvable, spec.seed, spec.max_redraws,
                             spec.subsolver_budget)
    return compute_intermediate_configs(inst, spec, redraw)


def split_instance(inst: Instance, configs: IntermediateConfigs) -> list[Instance]:
    return [
        Instance(inst.graph, configs.boundary(j - 1), configs.boundary(j), f"{inst.name}/t{j}")
        for j in range(1, configs.k + 1)
    ]


def concatenate(plans: list[Plan]) -> Plan:
    """Join consecutive plans, dropping each duplicated boundary configuration."""
    if not plans:
        raise ConcatenationError("nothing to concatenate")
    n = plans[0].n
    paths = [list(p) for p in plans[0].paths]
    for j, plan in enumerate(plans[1:], start=1):
        if plan.n != n:
            raise ConcatenationError(f"boundary {j}: plan has {plan.n} robots, expected {n}")
        for i in range(n):
            if paths[i][-1] != plan.paths[i][0]:
                raise ConcatenationError(
                    f"boundary {j}: robot {i} ends at {paths[i][-1]} but next part starts at {plan.paths[i][0]}"
                )
            paths[i].extend(plan.paths[i][1:])
    return Plan(paths)
