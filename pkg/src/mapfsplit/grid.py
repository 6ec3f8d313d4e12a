"""4-connected grid graphs with obstacles, vertex subsets and cached distance fields.

Vertices are ``(col, row)`` tuples, 1-based.  Internally every cell also has a
row-major integer id ``(row - 1) * width + (col - 1)`` which is what the search
kernels work with.
"""
from __future__ import annotations

import threading
from typing import Iterable, Iterator

import numpy as np

from mapfsplit._backend import core

Vertex = tuple[int, int]

# neighbor order is E, W, N, S; the kernels rely on opposite directions being d ^ 1
DIRECTIONS: tuple[Vertex, ...] = ((1, 0), (-1, 0), (0, 1), (0, -1))


class GraphError(ValueError):
    """A vertex or subset does not belong to the graph it is used with."""


class DistanceField:
    """Exact unweighted shortest distances from one source.

    Unreachable vertices map to ``None`` through :meth:`dist`; the raw array
    uses ``-1``.
    """

    __slots__ = ("graph", "source", "array")

    def __init__(self, graph: "GridGraph", source: Vertex, array: np.ndarray):
        self.graph = graph
        self.source = source
        self.array = array
        self.array.setflags(write=False)

    def dist(self, v: Vertex) -> int | None:
        d = int(self.array[self.graph.index(v)])
        return None if d < 0 else d

    def reachable(self, v: Vertex) -> bool:
        return self.array[self.graph.index(v)] >= 0

    def __getitem__(self, v: Vertex) -> int | None:
        return self.dist(v)


class GridGraph:
    """Grid of ``width`` x ``height`` cells; ``blocked[row-1, col-1]`` marks obstacles."""

    def __init__(self, width: int, height: int, blocked: np.ndarray | None = None):
        if width <= 0 or height <= 0:
            raise GraphError(f"grid dimensions must be positive, got {width}x{height}")
        self.width = int(width)
        self.height = int(height)
        if blocked is None:
            blocked = np.zeros((height, width), dtype=bool)
        blocked = np.asarray(blocked, dtype=bool)
        if blocked.shape != (height, width):
            raise GraphError(f"blocked mask has shape {blocked.shape}, expected {(height, width)}")
        self.blocked = blocked.copy()
        self.blocked.setflags(write=False)
        self._flat_blocked = self.blocked.ravel()
        self._nbrs: np.ndarray | None = None
        self._adjacency = None
        self._cache: dict[int, DistanceField] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_obstacles(cls, width: int, height: int, obstacles: Iterable[Vertex]) -> "GridGraph":
        blocked = np.zeros((height, width), dtype=bool)
        for c, r in obstacles:
            if not (1 <= c <= width and 1 <= r <= height):
                raise GraphError(f"obstacle {(c, r)} outside {width}x{height} grid")
            blocked[r - 1, c - 1] = True
        return cls(width, height, blocked)

    # -- identity -----------------------------------------------------------
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridGraph):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and bool(np.array_equal(self.blocked, other.blocked))
        )

    def __hash__(self) -> int:
        return hash((self.width, self.height, self.blocked.tobytes()))

    def __repr__(self) -> str:
        return f"GridGraph({self.width}x{self.height}, {self.num_vertices} vertices)"

    def __getstate__(self):
        return {"width": self.width, "height": self.height, "blocked": np.array(self.blocked)}

    def __setstate__(self, state):
        self.__init__(state["width"], state["height"], state["blocked"])

    # -- vertices -----------------------------------------------------------
    @property
    def num_cells(self) -> int:
        return self.width * self.height

    @property
    def num_vertices(self) -> int:
        return int(self.num_cells - np.count_nonzero(self.blocked))

    def in_bounds(self, v: Vertex) -> bool:
        c, r = v
        return 1 <= c <= self.width and 1 <= r <= self.height

    def has_vertex(self, v: Vertex) -> bool:
        return self.in_bounds(v) and not self.blocked[v[1] - 1, v[0] - 1]

    def index(self, v: Vertex) -> int:
        c, r = v
        if not (1 <= c <= self.width and 1 <= r <= self.height):
            raise GraphError(f"vertex {v} outside {self.width}x{self.height} grid")
        return (r - 1) * self.width + (c - 1)

    def vertex(self, idx: int) -> Vertex:
        r, c = divmod(int(idx), self.width)
        return (c + 1, r + 1)

    def check_vertex(self, v: Vertex) -> int:
        idx = self.index(v)
        if self._flat_blocked[idx]:
            raise GraphError(f"vertex {v} is blocked")
        return idx

    def vertices(self) -> Iterator[Vertex]:
        """Unblocked vertices in row-major order."""
        for idx in np.flatnonzero(~self._flat_blocked):
            yield self.vertex(idx)

    def neighbors(self, v: Vertex) -> list[Vertex]:
        self.check_vertex(v)
        c, r = v
        out = []
        for dc, dr in DIRECTIONS:
            u = (c + dc, r + dr)
            if self.has_vertex(u):
                out.append(u)
        return out

    # -- kernel-facing tables -----------------------------------------------
    @property
    def neighbor_table(self) -> np.ndarray:
        """``(num_cells, 4)`` int32 table of neighbor ids in E, W, N, S order, -1 if absent."""
        if self._nbrs is None:
            w, h = self.width, self.height
            free = ~self.blocked
            table = np.full((h, w, 4), -1, dtype=np.int32)
            ids = np.arange(w * h, dtype=np.int32).reshape(h, w)
            # E: col + 1
            table[:, :-1, 0] = np.where(free[:, 1:], ids[:, 1:], -1)
            # W: col - 1
            table[:, 1:, 1] = np.where(free[:, :-1], ids[:, :-1], -1)
            # N: row + 1
            table[:-1, :, 2] = np.where(free[1:, :], ids[1:, :], -1)
            # S: row - 1
            table[1:, :, 3] = np.where(free[:-1, :], ids[:-1, :], -1)
            table[self.blocked] = -1
            table = table.reshape(w * h, 4)
            table.setflags(write=False)
            self._nbrs = table
        return self._nbrs

    @property
    def adjacency(self):
        """Backend-specific adjacency handle passed to the search kernels."""
        if self._adjacency is None:
            self._adjacency = core.prepare(self.neighbor_table)
        return self._adjacency

    # -- distances ------------------------------------------------------------
    def distances(self, source: Vertex) -> DistanceField:
        idx = self.check_vertex(source)
        return self.distances_from_index(idx)

    def distances_from_index(self, idx: int) -> DistanceField:
        field = self._cache.get(idx)
        if field is not None:
            return field
        arr = np.asarray(core.bfs(self.adjacency, int(idx)), dtype=np.int32)
        field = DistanceField(self, self.vertex(idx), arr)
        with self._lock:
            return self._cache.setdefault(idx, field)

    def distance_rows(self, indices) -> np.ndarray:
        """Distance arrays for many source cells as one ``(k, num_cells)`` array; fills the cache."""
        indices = [int(i) for i in indices]
        missing = sorted({i for i in indices if i not in self._cache})
        if missing:
            rows = np.asarray(core.bfs_many(self.adjacency, missing), dtype=np.int32)
            with self._lock:
                for i, row in zip(missing, rows):
                    self._cache.setdefault(i, DistanceField(self, self.vertex(i), row))
        if not indices:
            return np.zeros((0, self.num_cells), dtype=np.int32)
        return np.stack([self._cache[i].array for i in indices])

    def dist(self, u: Vertex, v: Vertex) -> int | None:
        return self.distances(u).dist(v)

    def clear_cache(self) -> None:
        with self._lock:
            self._cache.clear()

    # -- derived graphs --------------------------------------------------------
    def full_set(self) -> "VertexSet":
        return VertexSet(self, ~self.blocked)

    def restricted(self, mask: np.ndarray) -> "GridGraph":
        """Induced subgraph on ``mask`` as a new grid (everything else blocked)."""
        return GridGraph(self.width, self.height, self.blocked | ~np.asarray(mask, dtype=bool))


def bfs_distances(g: GridGraph, source: Vertex) -> DistanceField:
    return g.distances(source)


def neighbors(g: GridGraph, v: Vertex) -> list[Vertex]:
    return g.neighbors(v)


class VertexSet:
    """A subset of a parent grid's vertices; edges are the induced parent edges."""

    __slots__ = ("graph", "mask")

    def __init__(self, graph: GridGraph, mask: np.ndarray):
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != graph.blocked.shape:
            raise GraphError("vertex-set mask does not match the parent grid")
        self.graph = graph
        self.mask = mask & ~graph.blocked
        self.mask.setflags(write=False)

    @classmethod
    def from_vertices(cls, graph: GridGraph, vs: Iterable[Vertex]) -> "VertexSet":
        mask = np.zeros_like(graph.blocked)
        for v in vs:
            graph.check_vertex(v)
            mask[v[1] - 1, v[0] - 1] = True
        return cls(graph, mask)

    @classmethod
    def rect(cls, graph: GridGraph, c0: int, r0: int, c1: int, r1: int) -> "VertexSet":
        """Unblocked cells with ``c0 <= col <= c1`` and ``r0 <= row <= r1``."""
        mask = np.zeros_like(graph.blocked)
        mask[max(r0, 1) - 1 : max(r1, 0), max(c0, 1) - 1 : max(c1, 0)] = True
        return cls(graph, mask)

    def _check(self, other: "VertexSet") -> None:
        if not isinstance(other, VertexSet):
            raise TypeError(f"expected VertexSet, got {type(other).__name__}")
        if other.graph is not self.graph and other.graph != self.graph:
            raise GraphError("vertex sets belong to different parent grids")

    def __add__(self, other: "VertexSet") -> "VertexSet":
        self._check(other)
        return VertexSet(self.graph, self.mask | other.mask)

    def __sub__(self, other: "VertexSet") -> "VertexSet":
        self._check(other)
        return VertexSet(self.graph, self.mask & ~other.mask)

    def __and__(self, other: "VertexSet") -> "VertexSet":
        self._check(other)
        return VertexSet(self.graph, self.mask & other.mask)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VertexSet):
            return NotImplemented
        return self.graph == other.graph and bool(np.array_equal(self.mask, other.mask))

    def __hash__(self) -> int:
        return hash(self.mask.tobytes())

    def __contains__(self, v: Vertex) -> bool:
        return self.graph.in_bounds(v) and bool(self.mask[v[1] - 1, v[0] - 1])

    def __len__(self) -> int:
        return int(np.count_nonzero(self.mask))

    def __bool__(self) -> bool:
        return bool(self.mask.any())

    def __repr__(self) -> str:
        return f"VertexSet({len(self)} of {self.graph!r})"

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask.ravel())

    def vertices(self) -> list[Vertex]:
        return [self.graph.vertex(i) for i in self.indices()]

    def edges(self) -> set[tuple[Vertex, Vertex]]:
        """Undirected induced edges, each reported once as ``(lower_id, higher_id)`` vertex pair."""
        out = set()
        table = self.graph.neighbor_table
        flat = self.mask.ravel()
        for i in self.indices():
            for j in table[i]:
                if j > i and flat[j]:
                    out.add((self.graph.vertex(i), self.graph.vertex(j)))
        return out

    def as_graph(self) -> GridGraph:
        return self.graph.restricted(self.mask)

    def components(self) -> list[np.ndarray]:
        """Connected components of the induced subgraph, as sorted index arrays."""
        table = self.graph.neighbor_table
        flat = self.mask.ravel()
        label = np.full(flat.shape, -1, dtype=np.int64)
        comps = []
        for s in self.indices():
            if label[s] >= 0:
                continue
            k = len(comps)
            label[s] = k
            stack = [int(s)]
            members = []
            while stack:
                u = stack.pop()
                members.append(u)
                for v in table[u]:
                    if v >= 0 and flat[v] and label[v] < 0:
                        label[v] = k
                        stack.append(int(v))
            comps.append(np.array(sorted(members), dtype=np.int64))
        return comps


def graph_sum(a: VertexSet, b: VertexSet) -> VertexSet:
    return a + b


def graph_difference(a: VertexSet, b: VertexSet) -> VertexSet:
    return a - b
