import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import grid_from_rows
from oracles import RawGrid, check_plan, optimal_makespan, optimal_soc, solvable
from mapfsplit.ecbs import ECBS, Budget, detect_first_conflict, solve, solve_parallel_batch
from mapfsplit.grid import GridGraph
from mapfsplit.instance import Instance, generate_random
from mapfsplit.time_split import TimeSplitSpec, compute_intermediate_configs, concatenate, split_instance
from mapfsplit.validation import validate


def test_vertex_conflict_detected():
    paths = [[(1, 1), (2, 1), (3, 1)], [(3, 3), (3, 2), (3, 1)]]
    c = detect_first_conflict(paths)
    assert c.kind == "vertex" and c.time == 2 and (c.i, c.j) == (0, 1) and c.location == (3, 1)


def test_edge_conflict_detected():
    paths = [[(1, 1), (1, 1), (2, 1)], [(3, 1), (2, 1), (1, 1)]]
    c = detect_first_conflict(paths)
    assert c.kind == "edge" and c.time == 2


def test_conflict_padding_with_goal_waits():
    # robot 0 parks at (2,1) at t=1, robot 1 arrives there at t=3
    paths = [[(1, 1), (2, 1)], [(4, 1), (4, 2), (3, 2), (3, 1), (2, 1)]]
    c = detect_first_conflict(paths)
    assert c.kind == "vertex" and c.location == (2, 1)


def test_conflict_tie_break_order():
    paths = [[(1, 1), (2, 1)], [(3, 1), (2, 1)], [(2, 2), (2, 1)]]
    c = detect_first_conflict(paths)
    assert (c.time, c.i, c.j) == (1, 0, 1)


def test_three_robot_paths_are_conflict_free(three_robot):
    paths = [
        [(1, 4), (2, 4), (3, 4), (4, 4), (5, 4)],
        [(3, 3), (4, 3), (4, 2)],
        [(6, 4), (6, 3), (6, 2), (6, 1), (5, 1)],
    ]
    assert detect_first_conflict(paths) is None
    from mapfsplit.validation import Plan
    assert validate(three_robot, Plan(paths)) == []


def test_no_conflict_none():
    assert detect_first_conflict([]) is None
    assert detect_first_conflict([[(1, 1), (2, 1)]]) is None


def test_single_robot_is_bfs():
    g = grid_from_rows(["....", ".@@.", "...."])
    inst = Instance(g, [(1, 1)], [(4, 3)])
    res = solve(inst, "makespan", 1.0)
    assert res.solved and res.objective == g.dist((1, 1), (4, 3)) == 5


def test_corridor_with_pocket():
    g = grid_from_rows(["@.@", "..."])
    inst = Instance(g, [(1, 1), (3, 1)], [(3, 1), (1, 1)])
    raw = RawGrid.of(g)
    expect = optimal_makespan(raw, inst.starts, inst.goals)
    res = solve(inst, "makespan", 1.0)
    assert res.solved and res.objective == expect == 4
    assert check_plan(raw, inst.starts, inst.goals, res.plan.paths) == []
    res_soc = solve(inst, "soc", 1.0)
    assert res_soc.objective == optimal_soc(raw, inst.starts, inst.goals)


def test_three_robot_optimum(three_robot):
    raw = RawGrid.of(three_robot.graph)
    res = solve(three_robot, "makespan", 1.0)
    assert res.solved and res.objective == optimal_makespan(raw, three_robot.starts, three_robot.goals)
    assert res.lower_bound <= res.objective


def test_determinism(three_robot):
    a = solve(three_robot, "makespan", 1.5)
    b = solve(three_robot, "makespan", 1.5)
    assert a.plan == b.plan and a.objective == b.objective


def test_bad_weight():
    with pytest.raises(ValueError):
        ECBS(Instance(GridGraph(2, 2), [(1, 1)], [(2, 2)]), w=0.5)


def test_timeout_carries_lower_bound():
    inst = generate_random(32, 32, 0.1, 60, seed=3)
    res = solve(inst, "makespan", 1.0, Budget(time_limit=0.0))
    assert res.status == "timeout" and res.plan is None
    assert res.lower_bound >= 0


def test_node_limit():
    g = grid_from_rows(["@.@", "..."])
    inst = Instance(g, [(1, 1), (3, 1)], [(3, 1), (1, 1)])
    res = solve(inst, "makespan", 1.0, Budget(node_limit=1))
    assert res.status == "node-limit"


def test_batch_of_one_matches_solve(three_robot):
    single = solve(three_robot, "makespan", 1.5)
    batch = solve_parallel_batch([three_robot], "makespan", 1.5)
    assert len(batch) == 1 and batch[0].plan == single.plan and batch[0].objective == single.objective


def test_batch_of_two_independent():
    g = GridGraph(5, 5)
    subs = [Instance(g, [(1, 1)], [(5, 5)]), Instance(g, [(2, 3)], [(4, 1)])]
    batch = solve_parallel_batch(subs, "makespan", 1.0, workers=2)
    assert batch.all_solved
    assert [r.objective for r in batch] == [8, 4]
    assert batch.wall_time > 0


def test_batch_four_time_parts():
    inst = generate_random(32, 32, 0.1, 40, seed=11)
    configs = compute_intermediate_configs(inst, TimeSplitSpec(k=4, seed=1))
    batch = solve_parallel_batch(split_instance(inst, configs), "makespan", 1.5, Budget(time_limit=60))
    assert batch.all_solved
    plan = concatenate([r.plan for r in batch])
    assert validate(inst, plan) == []


def test_batch_order_stable_across_workers():
    subs = [generate_random(8, 8, 0.1, 4, seed=s) for s in range(4)]
    a = solve_parallel_batch(subs, "soc", 1.5, workers=1)
    b = solve_parallel_batch(subs, "soc", 1.5, workers=2)
    assert [r.plan for r in a] == [r.plan for r in b]


class _Recorder(ECBS):
    def _result(self, status, node, lb, t0):
        self.final = node
        return super()._result(status, node, lb, t0)


@st.composite
def _small(draw):
    w, h = draw(st.integers(2, 5)), draw(st.integers(2, 5))
    seed = draw(st.integers(0, 2**31))
    rng = np.random.default_rng(seed)
    blocked = rng.random((h, w)) < 0.2
    g = GridGraph(w, h, blocked)
    free = list(g.vertices())
    n = draw(st.integers(1, 3))
    if len(free) < n + 1:
        return None
    s = [free[i] for i in rng.choice(len(free), n, replace=False)]
    t = [free[i] for i in rng.choice(len(free), n, replace=False)]
    return Instance(g, s, t)


@settings(max_examples=120, deadline=None)
@given(_small(), st.sampled_from(["makespan", "soc"]))
def test_optimal_on_small_instances(inst, objective):
    if inst is None:
        return
    raw = RawGrid.of(inst.graph)
    if not solvable(raw, inst.starts, inst.goals):
        return
    res = solve(inst, objective, 1.0, Budget(time_limit=20))
    assert res.solved
    expect = (optimal_makespan if objective == "makespan" else optimal_soc)(raw, inst.starts, inst.goals)
    assert res.objective == expect
    assert check_plan(raw, inst.starts, inst.goals, res.plan.paths) == []


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1.2, 1.5, 2.0]), st.sampled_from(["makespan", "soc"]))
def test_bounded_suboptimality_and_monotone_lb(seed, w, objective):
    inst = generate_random(12, 12, 0.15, 10, seed=seed)
    solver = _Recorder(inst, objective, w, Budget(time_limit=20))
    res = solver.solve()
    assert res.solved
    assert res.lower_bound <= res.objective <= w * res.lower_bound + 1e-9
    assert validate(inst, res.plan) == []
    node = solver.final
    while node.parent is not None:
        assert node.lb >= node.parent.lb
        assert node.lb <= node.cost
        for a in range(inst.n):
            assert node.lbs[a] >= node.parent.lbs[a]
        node = node.parent
