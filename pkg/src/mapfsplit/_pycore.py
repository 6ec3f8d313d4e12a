"""Pure-Python search kernels.

Same contract and tie-breaking as the compiled ``_core`` extension; used when the
extension is not built and as the reference the extension is tested against.

Cells are integer ids.  Vertex constraints are keys ``t * ncells + cell``; edge
constraints are keys ``(t * ncells + u) * 4 + d`` for a move from ``u`` in
direction ``d`` arriving at time ``t``.
"""
from __future__ import annotations

import heapq
from collections import deque

import numpy as np


def prepare(nbrs):
    return [tuple(int(x) for x in row) for row in np.asarray(nbrs)]


def prepare_h(h):
    return h.tolist() if isinstance(h, np.ndarray) else list(h)


def bfs(adj, source):
    n = len(adj)
    dist = [-1] * n
    dist[source] = 0
    q = deque([source])
    while q:
        u = q.popleft()
        du = dist[u] + 1
        for v in adj[u]:
            if v >= 0 and dist[v] < 0:
                dist[v] = du
                q.append(v)
    return np.array(dist, dtype=np.int32)


def bfs_many(adj, sources):
    out = np.full((len(sources), len(adj)), -1, dtype=np.int32)
    for row, src in enumerate(sources):
        out[row] = bfs(adj, src)
    return out


def annulus_candidates(ds, dg, d, rest, used):
    need = np.maximum(np.abs(ds - d), np.abs(dg - rest))
    ok = (ds >= 0) & (dg >= 0) & ~used.view(bool)
    if not ok.any():
        return -1, np.zeros(0, dtype=np.int64)
    best = int(need[ok].min())
    return best, np.flatnonzero(ok & (need == best))


def _direction(adj, a, b):
    row = adj[a]
    for d in range(4):
        if row[d] == b:
            return d
    return -1


class _ConflictTable:
    """Occupancy of other agents' paths, agents parked at their last cell forever."""

    def __init__(self, adj, others):
        n = len(adj)
        self.n = n
        self.vcnt = {}
        self.ecnt = {}
        self.park = {}
        for p in others:
            if not p:
                continue
            last = len(p) - 1
            for t in range(last):
                k = t * n + p[t]
                self.vcnt[k] = self.vcnt.get(k, 0) + 1
            self.park.setdefault(p[last], []).append(last)
            for t in range(1, last + 1):
                a, b = p[t - 1], p[t]
                if a != b:
                    k = (t * n + a) * 4 + _direction(adj, a, b)
                    self.ecnt[k] = self.ecnt.get(k, 0) + 1

    def vertex(self, cell, t):
        c = self.vcnt.get(t * self.n + cell, 0)
        parked = self.park.get(cell)
        if parked:
            for pt in parked:
                if pt <= t:
                    c += 1
        return c

    def move(self, u, v, d, t):
        """Conflicts for moving ``u -> v`` (direction ``d``) arriving at ``t``."""
        c = self.vertex(v, t)
        if d >= 0 and self.ecnt:
            c += self.ecnt.get((t * self.n + v) * 4 + (d ^ 1), 0)
        return c


def focal_search(adj, h, start, goal, vertex_cons, edge_cons, min_arrival, horizon, w, others):
    """Focal space-time search.

    Returns ``(path, lower_bound)`` with ``path`` a list of cell ids (index = time)
    or ``None`` when no path exists within ``horizon``.
    """
    if not isinstance(h, list):
        h = h.tolist()
    n = len(adj)
    if h[start] < 0:
        return None
    vcons = vertex_cons if isinstance(vertex_cons, (set, frozenset)) else set(vertex_cons)
    econs = edge_cons if isinstance(edge_cons, (set, frozenset)) else set(edge_cons)
    if start in vcons:  # t = 0 key is the cell itself
        return None
    cat = _ConflictTable(adj, others)

    n_cell = []
    n_t = []
    n_f = []
    n_conf = []
    n_parent = []
    closed = []
    index = {}
    buckets = {}
    open_count = {}
    focal = []

    def f_of(cell, t):
        f = t + h[cell]
        return f if f >= min_arrival else min_arrival

    f0 = f_of(start, 0)
    n_cell.append(start)
    n_t.append(0)
    n_f.append(f0)
    n_conf.append(cat.vertex(start, 0))
    n_parent.append(-1)
    closed.append(False)
    index[start] = 0
    buckets[f0] = [0]
    open_count[f0] = 1
    n_open = 1
    f_min = f0
    bound = int(w * f_min + 1e-9)
    heapq.heappush(focal, (n_conf[0], f0, 0))

    while n_open > 0:
        while open_count.get(f_min, 0) == 0:
            f_min += 1
        new_bound = int(w * f_min + 1e-9)
        if new_bound > bound:
            for f in range(bound + 1, new_bound + 1):
                for nid in buckets.get(f, ()):
                    if not closed[nid]:
                        heapq.heappush(focal, (n_conf[nid], n_f[nid], nid))
            bound = new_bound
        while True:
            conf, f, nid = heapq.heappop(focal)
            if not closed[nid] and conf == n_conf[nid]:
                break
        closed[nid] = True
        open_count[f] -= 1
        n_open -= 1
        u = n_cell[nid]
        t = n_t[nid]
        if u == goal and t >= min_arrival:
            path = []
            while nid >= 0:
                path.append(n_cell[nid])
                nid = n_parent[nid]
            path.reverse()
            return path, f_min
        nt = t + 1
        if nt > horizon:
            continue
        base = n_conf[nid]
        row = adj[u]
        for d in range(5):
            if d < 4:
                v = row[d]
                if v < 0:
                    continue
            else:
                v = u
            if h[v] < 0:
                continue
            key = nt * n + v
            if key in vcons:
                continue
            if d < 4 and ((nt * n + u) * 4 + d) in econs:
                continue
            c = base + cat.move(u, v, d if d < 4 else -1, nt)
            old = index.get(key)
            if old is not None:
                if closed[old] or c >= n_conf[old]:
                    continue
                n_conf[old] = c
                n_parent[old] = nid
                if n_f[old] <= bound:
                    heapq.heappush(focal, (c, n_f[old], old))
                continue
            fv = f_of(v, nt)
            new = len(n_cell)
            n_cell.append(v)
            n_t.append(nt)
            n_f.append(fv)
            n_conf.append(c)
            n_parent.append(nid)
            closed.append(False)
            index[key] = new
            buckets.setdefault(fv, []).append(new)
            open_count[fv] = open_count.get(fv, 0) + 1
            n_open += 1
            if fv <= bound:
                heapq.heappush(focal, (c, fv, new))
    return None


def agent_conflicts(paths, i):
    """All conflicts between agent ``i`` and every other agent.

    Each conflict is ``(t, lo, hi, kind, x, y)`` with ``lo < hi`` the agent pair,
    ``kind`` 0 for vertex (``x`` the cell, ``y`` = -1) and 1 for edge (``x -> y``
    is the move of agent ``lo``).  Paths are padded by waiting at their last cell.
    """
    out = []
    pi = paths[i]
    li = len(pi)
    for j in range(len(paths)):
        if j == i:
            continue
        pj = paths[j]
        lj = len(pj)
        horizon = li if li > lj else lj
        a_prev = pi[0]
        b_prev = pj[0]
        for t in range(horizon):
            a = pi[t] if t < li else pi[li - 1]
            b = pj[t] if t < lj else pj[lj - 1]
            if a == b:
                if i < j:
                    out.append((t, i, j, 0, a, -1))
                else:
                    out.append((t, j, i, 0, a, -1))
            elif t > 0 and a_prev == b and b_prev == a:
                if i < j:
                    out.append((t, i, j, 1, a_prev, a))
                else:
                    out.append((t, j, i, 1, b_prev, b))
            a_prev = a
            b_prev = b
    return out


def all_conflicts(paths):
    out = []
    for i in range(len(paths)):
        for c in agent_conflicts(paths, i):
            if c[1] == i:
                out.append(c)
    return out
