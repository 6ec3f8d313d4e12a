import os
import random
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import RawGrid
from mapfsplit.grid import GridGraph
from mapfsplit.instance import (
    GenerationError, Instance, InstanceError, ParseError, format_map, format_scenario,
    generate_random, load_instance, parse_map, parse_scenario, parse_scenario_entries,
)

DATA = Path(__file__).parent / "data"


def _scen(*entries, w=4, h=4):
    lines = ["version 1"]
    for sx, sy, gx, gy in entries:
        lines.append("\t".join(map(str, [0, "m.map", w, h, sx, sy, gx, gy, 0])))
    return "\n".join(lines) + "\n"


def test_minimal_map():
    g = parse_map((DATA / "tiny.map").read_text())
    assert (g.width, g.height) == (2, 2)
    assert int(g.blocked.sum()) == 1


@pytest.mark.parametrize("name,line", [("bad_height", 6), ("bad_row", 6), ("bad_glyph", 5), ("bad_header", 3)])
def test_malformed_maps(name, line):
    with pytest.raises(ParseError) as exc:
        parse_map((DATA / f"{name}.map").read_text())
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_glyphs():
    text = "type octile\nheight 1\nwidth 6\nmap\n.G@OTW\n"
    g = parse_map(text)
    assert g.blocked.tolist() == [[False, False, True, True, True, True]]


def _glyph_count(text):
    body = text.split("\nmap\n", 1)[1]
    return sum(ch in ".G" for ch in body)


def test_synthetic_dao_sized_map():
    rng = random.Random(5)
    rows = ["".join(rng.choice("....G@TWO") for _ in range(194)) for _ in range(194)]
    text = "type octile\nheight 194\nwidth 194\nmap\n" + "\n".join(rows) + "\n"
    g = parse_map(text)
    assert (g.width, g.height) == (194, 194)
    assert g.num_vertices == _glyph_count(text)


def _ost003d_path():
    for p in (os.environ.get("MAPFSPLIT_OST003D"), DATA / "ost003d.map"):
        if p and Path(p).is_file():
            return Path(p)
    return None


@pytest.mark.skipif(_ost003d_path() is None, reason="ost003d.map not available offline; set MAPFSPLIT_OST003D")
def test_ost003d_golden():
    text = _ost003d_path().read_text()
    g = parse_map(text)
    assert (g.width, g.height) == (194, 194)
    assert g.num_vertices == _glyph_count(text)


def test_scenario_coordinate_shift():
    inst = parse_scenario(_scen((0, 0, 3, 0)), GridGraph(4, 4))
    assert inst.robots == [((1, 1), (4, 1))]


def test_scenario_blocked_goal_names_robot():
    g = GridGraph.from_obstacles(4, 4, [(4, 1)])
    with pytest.raises(InstanceError, match="robot 1"):
        parse_scenario(_scen((0, 1, 0, 2), (0, 0, 3, 0)), g)


def test_scenario_duplicate_start():
    with pytest.raises(InstanceError, match="robot 1"):
        parse_scenario(_scen((0, 0, 3, 0), (0, 0, 3, 3)), GridGraph(4, 4))


def test_scenario_dims_mismatch_and_count():
    with pytest.raises(InstanceError):
        parse_scenario(_scen((0, 0, 1, 1), w=5), GridGraph(4, 4))
    with pytest.raises(InstanceError):
        parse_scenario(_scen((0, 0, 1, 1)), GridGraph(4, 4), n=2)


def test_scenario_first_n_and_hints():
    text = _scen((0, 0, 3, 0), (1, 1, 2, 2), (3, 3, 0, 3))
    assert parse_scenario(text, GridGraph(4, 4), n=2).n == 2
    entries = parse_scenario_entries(text)
    assert entries[1].start == (1, 1) and entries[0].optimal_length == 0.0


def test_scenario_parse_errors():
    with pytest.raises(ParseError):
        parse_scenario_entries("0\tm\t4\t4\t0\t0\t1\t1\t1\n")
    with pytest.raises(ParseError) as exc:
        parse_scenario_entries("version 1\n0\tm\t4\t4\t0\t0\t1\n")
    assert exc.value.line == 2


def test_generate_deterministic():
    assert generate_random(4, 4, 0.0, 2, seed=7) == generate_random(4, 4, 0.0, 2, seed=7)


def test_generate_capacity():
    with pytest.raises(GenerationError):
        generate_random(2, 2, 0.0, 5, seed=1)


def test_generate_32x32_reference():
    inst = generate_random(32, 32, 0.10, 60, seed=1)
    assert int(inst.graph.blocked.sum()) == 102
    raw = RawGrid.of(inst.graph)
    for s, t in inst.robots:
        assert t in raw.bfs(s)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 12), st.integers(3, 12), st.floats(0, 0.3), st.integers(1, 8))
def test_generated_instances_are_valid(seed, w, h, ratio, n):
    try:
        inst = generate_random(w, h, ratio, n, seed)
    except GenerationError:
        return
    assert len(set(inst.starts)) == n and len(set(inst.goals)) == n
    assert all(inst.graph.has_vertex(v) for v in inst.starts + inst.goals)
    assert all(d is not None for d in inst.shortest_distances())


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_map_scen_round_trip(seed):
    inst = generate_random(9, 7, 0.2, 5, seed)
    g = parse_map(format_map(inst.graph))
    assert g == inst.graph
    assert parse_scenario(format_scenario(inst), g) == inst


def test_json_round_trip(tmp_path):
    inst = generate_random(10, 8, 0.1, 6, seed=2)
    again = Instance.from_json(inst.to_json())
    assert again == inst
    p = tmp_path / "x.json"
    import json

    p.write_text(json.dumps(inst.to_json()))
    assert load_instance(p) == inst


def test_instance_rejects_blocked_start():
    g = GridGraph(3, 1, np.array([[False, True, False]]))
    with pytest.raises(InstanceError, match="robot 0"):
        Instance(g, [(2, 1)], [(1, 1)])
