# distutils: language = c++
# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled search kernels; contract identical to ``mapfsplit._pycore``."""

import numpy as np

from libcpp.vector cimport vector
from libcpp.unordered_map cimport unordered_map
from libcpp.unordered_set cimport unordered_set
from libcpp.queue cimport priority_queue
from libcpp.pair cimport pair
from cython.operator cimport dereference as deref

ctypedef long long i64
ctypedef pair[pair[int, int], int] FocalEntry


def prepare(nbrs):
    return np.ascontiguousarray(nbrs, dtype=np.int32)


def prepare_h(h):
    return np.ascontiguousarray(h, dtype=np.int32)


def bfs(const int[:, ::1] adj, int source):
    cdef Py_ssize_t n = adj.shape[0]
    out = np.full(n, -1, dtype=np.int32)
    cdef int[::1] dist = out
    cdef vector[int] queue
    cdef size_t head = 0
    cdef int u, v, d, du
    queue.reserve(n)
    dist[source] = 0
    queue.push_back(source)
    while head < queue.size():
        u = queue[head]
        head += 1
        du = dist[u] + 1
        for d in range(4):
            v = adj[u, d]
            if v >= 0 and dist[v] < 0:
                dist[v] = du
                queue.push_back(v)
    return out


def bfs_many(const int[:, ::1] adj, sources):
    """One BFS distance row per source, in a single ``(len(sources), n)`` array."""
    cdef Py_ssize_t n = adj.shape[0]
    cdef Py_ssize_t k = len(sources)
    out = np.full((k, n), -1, dtype=np.int32)
    cdef int[:, ::1] dist = out
    cdef vector[int] queue
    cdef size_t head
    cdef Py_ssize_t row
    cdef int u, v, d, du, src
    queue.reserve(n)
    for row in range(k):
        src = sources[row]
        queue.clear()
        head = 0
        dist[row, src] = 0
        queue.push_back(src)
        while head < queue.size():
            u = queue[head]
            head += 1
            du = dist[row, u] + 1
            for d in range(4):
                v = adj[u, d]
                if v >= 0 and dist[row, v] < 0:
                    dist[row, v] = du
                    queue.push_back(v)
    return out


def annulus_candidates(const int[::1] ds, const int[::1] dg, int d, int rest, const unsigned char[::1] used):
    """Cells needing the fewest widening rounds ``max(|ds - d|, |dg - rest|)``; ``(rounds, cells)``.

    Unreachable and used cells are skipped; ``rounds`` is -1 when nothing qualifies.
    """
    cdef Py_ssize_t n = ds.shape[0], v
    cdef int best = -1, need, a, b
    cdef vector[int] cells
    for v in range(n):
        if used[v] or ds[v] < 0 or dg[v] < 0:
            continue
        a = ds[v] - d
        if a < 0:
            a = -a
        b = dg[v] - rest
        if b < 0:
            b = -b
        need = a if a > b else b
        if best < 0 or need < best:
            best = need
            cells.clear()
            cells.push_back(<int>v)
        elif need == best:
            cells.push_back(<int>v)
    out = np.empty(cells.size(), dtype=np.int64)
    cdef long long[::1] o = out
    for v in range(<Py_ssize_t>cells.size()):
        o[v] = cells[v]
    return best, out


cdef inline int _direction(const int[:, ::1] adj, int a, int b) noexcept nogil:
    cdef int d
    for d in range(4):
        if adj[a, d] == b:
            return d
    return -1


cdef class _ConflictTable:
    cdef i64 n
    cdef unordered_map[i64, int] vcnt
    cdef unordered_map[i64, int] ecnt
    cdef unordered_map[int, vector[int]] park

    def __init__(self, const int[:, ::1] adj, list others):
        cdef i64 n = adj.shape[0]
        cdef Py_ssize_t last, t
        cdef int a, b
        cdef i64 k
        self.n = n
        for p in others:
            if not p:
                continue
            seq = <list>p
            last = len(seq) - 1
            for t in range(last):
                k = t * n + <int>seq[t]
                self.vcnt[k] += 1
            self.park[<int>seq[last]].push_back(<int>last)
            for t in range(1, last + 1):
                a = seq[t - 1]
                b = seq[t]
                if a != b:
                    k = (t * n + a) * 4 + _direction(adj, a, b)
                    self.ecnt[k] += 1

    cdef inline int vertex(self, int cell, int t) noexcept:
        cdef int c = 0
        cdef unordered_map[i64, int].iterator it = self.vcnt.find(<i64>t * self.n + cell)
        if it != self.vcnt.end():
            c = deref(it).second
        cdef unordered_map[int, vector[int]].iterator pit = self.park.find(cell)
        cdef size_t q
        if pit != self.park.end():
            for q in range(deref(pit).second.size()):
                if deref(pit).second[q] <= t:
                    c += 1
        return c

    cdef inline int move(self, int u, int v, int d, int t) noexcept:
        cdef int c = self.vertex(v, t)
        cdef unordered_map[i64, int].iterator it
        if d >= 0 and not self.ecnt.empty():
            it = self.ecnt.find((<i64>t * self.n + v) * 4 + (d ^ 1))
            if it != self.ecnt.end():
                c += deref(it).second
        return c


def focal_search(const int[:, ::1] adj, h_arr, int start, int goal, vertex_cons, edge_cons,
                 int min_arrival, int horizon, double w, list others):
    cdef const int[::1] h = np.ascontiguousarray(h_arr, dtype=np.int32)
    cdef i64 n = adj.shape[0]
    if h[start] < 0:
        return None
    cdef unordered_set[i64] vcons
    cdef unordered_set[i64] econs
    for k in vertex_cons:
        vcons.insert(<i64>k)
    for k in edge_cons:
        econs.insert(<i64>k)
    if vcons.count(<i64>start):
        return None
    cdef _ConflictTable cat = _ConflictTable(adj, others)

    cdef vector[int] n_cell, n_t, n_f, n_conf, n_parent
    cdef vector[char] closed
    cdef unordered_map[i64, int] index
    cdef vector[vector[int]] buckets
    cdef vector[int] open_count
    cdef priority_queue[FocalEntry] focal
    cdef FocalEntry top
    cdef int f0, f_min, bound, new_bound, f, nid, u, t, nt, base, d, v, c, fv, old, new
    cdef i64 key
    cdef Py_ssize_t n_open, q
    cdef unordered_map[i64, int].iterator it

    f0 = h[start]
    if f0 < min_arrival:
        f0 = min_arrival
    n_cell.push_back(start)
    n_t.push_back(0)
    n_f.push_back(f0)
    n_conf.push_back(cat.vertex(start, 0))
    n_parent.push_back(-1)
    closed.push_back(0)
    index[<i64>start] = 0
    buckets.resize(f0 + 1)
    open_count.resize(f0 + 1, 0)
    buckets[f0].push_back(0)
    open_count[f0] = 1
    n_open = 1
    f_min = f0
    bound = <int>(w * f_min + 1e-9)
    focal.push(FocalEntry(pair[int, int](-n_conf[0], -f0), 0))

    while n_open > 0:
        while f_min >= <int>open_count.size() or open_count[f_min] == 0:
            f_min += 1
        new_bound = <int>(w * f_min + 1e-9)
        if new_bound > bound:
            f = bound + 1
            while f <= new_bound and f < <int>buckets.size():
                for q in range(buckets[f].size()):
                    nid = buckets[f][q]
                    if not closed[nid]:
                        focal.push(FocalEntry(pair[int, int](-n_conf[nid], -n_f[nid]), -nid))
                f += 1
            bound = new_bound
        while True:
            top = focal.top()
            focal.pop()
            nid = -top.second
            if not closed[nid] and -top.first.first == n_conf[nid]:
                break
        closed[nid] = 1
        open_count[n_f[nid]] -= 1
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
        for d in range(5):
            if d < 4:
                v = adj[u, d]
                if v < 0:
                    continue
            else:
                v = u
            if h[v] < 0:
                continue
            key = nt * n + v
            if vcons.count(key):
                continue
            if d < 4 and econs.count((nt * n + u) * 4 + d):
                continue
            c = base + cat.move(u, v, d if d < 4 else -1, nt)
            it = index.find(key)
            if it != index.end():
                old = deref(it).second
                if closed[old] or c >= n_conf[old]:
                    continue
                n_conf[old] = c
                n_parent[old] = nid
                if n_f[old] <= bound:
                    focal.push(FocalEntry(pair[int, int](-c, -n_f[old]), -old))
                continue
            fv = nt + h[v]
            if fv < min_arrival:
                fv = min_arrival
            new = <int>n_cell.size()
            n_cell.push_back(v)
            n_t.push_back(nt)
            n_f.push_back(fv)
            n_conf.push_back(c)
            n_parent.push_back(nid)
            closed.push_back(0)
            index[key] = new
            if fv >= <int>buckets.size():
                buckets.resize(fv + 1)
                open_count.resize(fv + 1, 0)
            buckets[fv].push_back(new)
            open_count[fv] += 1
            n_open += 1
            if fv <= bound:
                focal.push(FocalEntry(pair[int, int](-c, -fv), -new))
    return None


def agent_conflicts(list paths, int i):
    cdef list out = []
    cdef list pi = paths[i]
    cdef list pj
    cdef Py_ssize_t li = len(pi), lj, horizon, t, j
    cdef int a, b, a_prev, b_prev
    cdef vector[int] ci
    for t in range(li):
        ci.push_back(pi[t])
    for j in range(len(paths)):
        if j == i:
            continue
        pj = paths[j]
        lj = len(pj)
        horizon = li if li > lj else lj
        a_prev = ci[0]
        b_prev = pj[0]
        for t in range(horizon):
            a = ci[t] if t < li else ci[li - 1]
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


def all_conflicts(list paths):
    out = []
    for i in range(len(paths)):
        for c in agent_conflicts(paths, i):
            if c[1] == i:
                out.append(c)
    return out
