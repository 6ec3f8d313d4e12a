"""Problem instances: MovingAI ``.map``/``.scen`` parsing, JSON I/O and random generation."""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mapfsplit.grid import GridGraph, Vertex

PASSABLE = frozenset(".G")
BLOCKED = frozenset("@OTW")


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class InstanceError(ValueError):
    """An instance violates start/goal validity or uniqueness."""


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Instance:
    graph: GridGraph
    starts: tuple[Vertex, ...]
    goals: tuple[Vertex, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "starts", tuple(tuple(s) for s in self.starts))
        object.__setattr__(self, "goals", tuple(tuple(g) for g in self.goals))
        if len(self.starts) != len(self.goals):
            raise InstanceError(f"{len(self.starts)} starts but {len(self.goals)} goals")
        for kind, cfg in (("start", self.starts), ("goal", self.goals)):
            seen: dict[Vertex, int] = {}
            for i, v in enumerate(cfg):
                if not self.graph.has_vertex(v):
                    raise InstanceError(f"robot {i}: {kind} {v} is not a free vertex")
                if v in seen:
                    raise InstanceError(f"robot {i}: {kind} {v} duplicates robot {seen[v]}")
                seen[v] = i

    @property
    def n(self) -> int:
        return len(self.starts)

    @property
    def robots(self) -> list[tuple[Vertex, Vertex]]:
        return list(zip(self.starts, self.goals))

    def start_ids(self) -> list[int]:
        return [self.graph.index(v) for v in self.starts]

    def goal_ids(self) -> list[int]:
        return [self.graph.index(v) for v in self.goals]

    def shortest_distances(self) -> list[int | None]:
        return [self.graph.distances(g).dist(s) for s, g in zip(self.starts, self.goals)]

    def with_graph(self, graph: GridGraph) -> "Instance":
        return Instance(graph, self.starts, self.goals, self.name)

    def subset(self, robots: list[int], graph: GridGraph | None = None) -> "Instance":
        return Instance(
            graph if graph is not None else self.graph,
            [self.starts[i] for i in robots],
            [self.goals[i] for i in robots],
            self.name,
        )

    # -- native JSON ---------------------------------------------------------
    def to_json(self) -> dict:
        g = self.graph
        blocked = [[int(c) + 1, int(r) + 1] for r, c in zip(*np.nonzero(g.blocked))]
        blocked.sort(key=lambda v: (v[1], v[0]))
        return {
            "width": g.width,
            "height": g.height,
            "blocked": blocked,
            "robots": [{"start": list(s), "goal": list(t)} for s, t in zip(self.starts, self.goals)],
        }

    @classmethod
    def from_json(cls, data: dict, name: str = "") -> "Instance":
        try:
            g = GridGraph.from_obstacles(
                int(data["width"]), int(data["height"]), [tuple(v) for v in data.get("blocked", [])]
            )
            robots = data["robots"]
            starts = [tuple(r["start"]) for r in robots]
            goals = [tuple(r["goal"]) for r in robots]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed instance JSON: {exc}") from exc
        return cls(g, starts, goals, name)


# -- MovingAI formats ----------------------------------------------------------


def parse_map(text: str) -> GridGraph:
    lines = text.splitlines()
    header: dict[str, str] = {}
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line:
            continue
        if line == "map":
            break
        parts = line.split()
        if len(parts) != 2 or parts[0] not in ("type", "height", "width"):
            raise ParseError(f"unexpected header line {line!r}", i)
        header[parts[0]] = parts[1]
    else:
        raise ParseError("missing 'map' line", i)
    for key in ("type", "height", "width"):
        if key not in header:
            raise ParseError(f"missing '{key}' header", i)
    try:
        height = int(header["height"])
        width = int(header["width"])
    except ValueError as exc:
        raise ParseError(f"non-integer dimension: {exc}", i) from exc
    if height <= 0 or width <= 0:
        raise ParseError(f"non-positive dimensions {width}x{height}", i)
    rows = [ln.rstrip("\r\n") for ln in lines[i:]]
    while rows and not rows[-1].strip():
        rows.pop()
    if len(rows) != height:
        raise ParseError(f"header declares height {height} but {len(rows)} map rows follow", i + len(rows))
    blocked = np.zeros((height, width), dtype=bool)
    for r, row in enumerate(rows):
        lineno = i + r + 1
        if len(row) != width:
            raise ParseError(f"row has {len(row)} cells, expected {width}", lineno)
        for c, ch in enumerate(row):
            if ch in BLOCKED:
                blocked[r, c] = True
            elif ch not in PASSABLE:
                raise ParseError(f"unknown glyph {ch!r} at column {c}", lineno)
    return GridGraph(width, height, blocked)


@dataclass(frozen=True)
class ScenarioEntry:
    bucket: int
    map_name: str
    width: int
    height: int
    start: tuple[int, int]  # 0-based (x, y) as in the file
    goal: tuple[int, int]
    optimal_length: float


def parse_scenario_entries(text: str) -> list[ScenarioEntry]:
    lines = text.splitlines()
    if not lines or not lines[0].strip().lower().startswith("version"):
        raise ParseError("missing 'version' line", 1)
    version = lines[0].split()[-1]
    if version not in ("1", "1.0"):
        raise ParseError(f"unsupported scenario version {version!r}", 1)
    entries = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t") if "\t" in line else line.split()
        if len(parts) != 9:
            raise ParseError(f"expected 9 fields, got {len(parts)}", lineno)
        try:
            entries.append(
                ScenarioEntry(
                    int(parts[0]),
                    parts[1],
                    int(parts[2]),
                    int(parts[3]),
                    (int(parts[4]), int(parts[5])),
                    (int(parts[6]), int(parts[7])),
                    float(parts[8]),
                )
            )
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
    return entries


def parse_scenario(text: str, g: GridGraph, n: int | None = None, name: str = "") -> Instance:
    """First ``n`` scenario entries (all when ``None``) as robots, converted to 1-based."""
    entries = parse_scenario_entries(text)
    if n is None:
        n = len(entries)
    if n > len(entries):
        raise InstanceError(f"requested {n} robots but scenario has {len(entries)} entries")
    starts, goals = [], []
    for i, e in enumerate(entries[:n]):
        if (e.width, e.height) != (g.width, g.height):
            raise InstanceError(
                f"robot {i}: entry dims {e.width}x{e.height} do not match map {g.width}x{g.height}"
            )
        starts.append((e.start[0] + 1, e.start[1] + 1))
        goals.append((e.goal[0] + 1, e.goal[1] + 1))
    return Instance(g, starts, goals, name)


def format_map(g: GridGraph) -> str:
    out = ["type octile", f"height {g.height}", f"width {g.width}", "map"]
    for r in range(g.height):
        out.append("".join("@" if b else "." for b in g.blocked[r]))
    return "\n".join(out) + "\n"


def format_scenario(inst: Instance, map_name: str = "map.map") -> str:
    g = inst.graph
    out = ["version 1"]
    for (s, t), d in zip(inst.robots, inst.shortest_distances()):
        out.append(
            "\t".join(
                str(x)
                for x in (0, map_name, g.width, g.height, s[0] - 1, s[1] - 1, t[0] - 1, t[1] - 1, d or 0)
            )
        )
    return "\n".join(out) + "\n"


def load_instance(
    path: str | Path | None = None,
    map_path: str | Path | None = None,
    scen_path: str | Path | None = None,
    agents: int | None = None,
) -> Instance:
    if path is not None:
        p = Path(path)
        return Instance.from_json(json.loads(p.read_text()), name=p.stem)
    if map_path is None or scen_path is None:
        raise ValueError("need either an instance JSON or both a map and a scenario")
    g = parse_map(Path(map_path).read_text())
    return parse_scenario(Path(scen_path).read_text(), g, agents, name=f"{Path(map_path).stem}-n{agents}")


# -- random instances ----------------------------------------------------------


def generate_random(
    width: int,
    height: int,
    obstacle_ratio: float,
    n: int,
    seed: int,
    max_retries: int = 100,
) -> Instance:
    """Uniform random obstacles, starts and goals; re-sampled until every goal is reachable."""
    if not 0.0 <= obstacle_ratio < 1.0:
        raise GenerationError(f"obstacle ratio {obstacle_ratio} not in [0, 1)")
    cells = width * height
    n_obs = int(obstacle_ratio * cells)
    if n <= 0:
        raise GenerationError("need at least one robot")
    if cells - n_obs < n:
        raise GenerationError(f"{cells - n_obs} free cells cannot hold {n} robots")
    rng = random.Random(seed)
    name = f"rand{width}x{height}-o{obstacle_ratio:g}-n{n}-s{seed}"
    for _ in range(max_retries):
        obstacles = rng.sample(range(cells), n_obs)
        blocked = np.zeros(cells, dtype=bool)
        blocked[obstacles] = True
        g = GridGraph(width, height, blocked.reshape(height, width))
        free = np.flatnonzero(~blocked).tolist()
        starts = rng.sample(free, n)
        goals = rng.sample(free, n)
        if all(g.distances_from_index(t).array[s] >= 0 for s, t in zip(starts, goals)):
            return Instance(g, [g.vertex(s) for s in starts], [g.vertex(t) for t in goals], name)
    raise GenerationError(f"no instance with all goals reachable after {max_retries} attempts")
