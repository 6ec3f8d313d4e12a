import json

import pytest
from hypothesis import given, settings, strategies as st

from oracles import RawGrid, arrival, check_plan
from mapfsplit.ecbs import solve
from mapfsplit.grid import GridGraph
from mapfsplit.instance import Instance, generate_random
from mapfsplit.validation import Plan, PlanError, arrival_time, compute_metrics, is_valid, validate


def test_single_robot_shortest_path_ok():
    inst = Instance(GridGraph(3, 3), [(1, 1)], [(3, 1)])
    assert validate(inst, Plan([[(1, 1), (2, 1), (3, 1)]])) == []


def test_identical_paths_collide_every_step():
    g = GridGraph(3, 3)
    inst = Instance(g, [(1, 1), (1, 2)], [(3, 1), (3, 2)])
    p = [(1, 1), (2, 1), (3, 1)]
    bad = validate(inst, Plan([p, p]))
    collisions = [v for v in bad if v.kind == "collision"]
    assert [v.time for v in collisions] == [0, 1, 2]
    assert all(v.robots == (0, 1) for v in collisions)


def test_diagonal_move_reported():
    inst = Instance(GridGraph(3, 3), [(1, 1)], [(2, 2)])
    bad = validate(inst, Plan([[(1, 1), (2, 2)]]))
    assert [v.kind for v in bad] == ["move"]
    assert bad[0].time == 1 and bad[0].location == ((1, 1), (2, 2))


def test_swap_reported():
    inst = Instance(GridGraph(2, 1), [(1, 1), (2, 1)], [(2, 1), (1, 1)])
    bad = validate(inst, Plan([[(1, 1), (2, 1)], [(2, 1), (1, 1)]]))
    assert [v.kind for v in bad] == ["swap"]


def test_endpoint_and_count_and_offgraph():
    g = GridGraph.from_obstacles(3, 1, [(2, 1)])
    inst = Instance(g, [(1, 1)], [(1, 1)])
    bad = validate(inst, Plan([[(1, 1), (2, 1)]]))
    assert {v.kind for v in bad} == {"endpoint", "vertex"}
    assert validate(inst, Plan([[(1, 1)], [(3, 1)]]))[0].kind == "count"


def test_violation_json():
    inst = Instance(GridGraph(3, 3), [(1, 1)], [(2, 2)])
    v = validate(inst, Plan([[(1, 1), (2, 2)]]))[0]
    d = json.loads(json.dumps(v.to_json()))
    assert d["kind"] == "move" and d["robots"] == [0]


def test_metrics_all_at_goal():
    inst = Instance(GridGraph(3, 3), [(1, 1), (2, 2)], [(1, 1), (2, 2)])
    m = compute_metrics(inst, Plan([[(1, 1)], [(2, 2)]]))
    assert (m.makespan, m.sum_of_costs) == (0, 0)
    assert m.ratio_makespan == m.ratio_soc == 1.0


def test_metrics_shortest_path_ratio_one():
    inst = Instance(GridGraph(4, 4), [(1, 1)], [(4, 4)])
    path = [(1, 1), (2, 1), (3, 1), (4, 1), (4, 2), (4, 3), (4, 4)]
    m = compute_metrics(inst, Plan([path]))
    assert m.makespan == m.lower_bound_makespan == 6
    assert m.optimality_ratio("makespan") == 1.0 and m.optimality_ratio("soc") == 1.0


def test_leave_and_return_counts_last_arrival():
    g = GridGraph(4, 1)
    path = [(1, 1), (2, 1), (3, 1), (4, 1), (3, 1), (4, 1)]
    assert arrival_time(path, (4, 1)) == 5
    inst = Instance(g, [(1, 1)], [(4, 1)])
    assert compute_metrics(inst, Plan([path])).sum_of_costs == 5


def test_waits_before_arrival_count():
    inst = Instance(GridGraph(3, 1), [(1, 1), (3, 1)], [(2, 1), (3, 1)])
    m = compute_metrics(inst, Plan([[(1, 1), (1, 1), (2, 1)], [(3, 1)]]))
    assert m.arrival_times == (2, 0) and m.sum_of_costs == 2 and m.lower_bound_soc == 1


def test_invalid_plan_raises():
    inst = Instance(GridGraph(3, 3), [(1, 1)], [(2, 2)])
    with pytest.raises(PlanError):
        compute_metrics(inst, Plan([[(1, 1), (2, 2)]]))


def test_plan_padding_and_json():
    p = Plan([[(1, 1)], [(1, 2), (2, 2)]])
    assert p.horizon == 1 and p.paths[0] == [(1, 1), (1, 1)]
    assert Plan.from_json(json.loads(json.dumps(p.to_json()))) == p
    with pytest.raises(PlanError):
        Plan([[]])


def _random_plan(draw, g, n, T):
    verts = list(g.vertices())
    paths = []
    for _ in range(n):
        v = verts[draw(st.integers(0, len(verts) - 1))]
        p = [v]
        for _ in range(T):
            opts = [p[-1]] + g.neighbors(p[-1])
            if draw(st.booleans()) and draw(st.booleans()):
                opts = verts  # occasional illegal jump
            p.append(opts[draw(st.integers(0, len(opts) - 1))])
        paths.append(p)
    return paths


@st.composite
def _plans(draw):
    g = GridGraph(draw(st.integers(2, 5)), draw(st.integers(2, 5)))
    n = draw(st.integers(1, 3))
    paths = _random_plan(draw, g, n, draw(st.integers(0, 5)))
    return g, paths


@settings(max_examples=200, deadline=None)
@given(_plans())
def test_validator_agrees_with_oracle(case):
    g, paths = case
    inst_starts = [p[0] for p in paths]
    inst_goals = [p[-1] for p in paths]
    if len(set(inst_starts)) < len(paths) or len(set(inst_goals)) < len(paths):
        return
    inst = Instance(g, inst_starts, inst_goals)
    mine = is_valid(inst, Plan(paths))
    theirs = check_plan(RawGrid.of(g), inst_starts, inst_goals, paths) == []
    assert mine == theirs
    if mine:
        m = compute_metrics(inst, Plan(paths))
        assert m.makespan >= m.lower_bound_makespan and m.sum_of_costs >= m.lower_bound_soc
        assert list(m.arrival_times) == [arrival(p, t) for p, t in zip(paths, inst_goals)]
        assert m.ratio_makespan >= 1 and m.ratio_soc >= 1


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_solver_plans_validate(seed):
    inst = generate_random(10, 10, 0.1, 6, seed=seed)
    res = solve(inst, "soc", 1.5)
    assert validate(inst, res.plan) == []
    assert check_plan(RawGrid.of(inst.graph), inst.starts, inst.goals, res.plan.paths) == []
