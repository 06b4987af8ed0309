"""numba kernels for the per-arrival and per-slot hot paths.

Everything here operates on flat arrays so the JIT can run object-free:
topologies arrive as CSR adjacency (``indptr``/``adj_node``/``adj_eid``),
active transfers as a pooled edge-id layout (``job_start``/``job_len`` into
one big ``pool_eid`` array).  Pure-Python reference implementations of the
same algorithms live in the test suite; these kernels must match them and
exist only for speed (one sandbox core).

Set ``TREECAST_NO_NUMBA=1`` to run the kernels uncompiled (slow, for debug).
"""

from __future__ import annotations

import os

import numpy as np

if os.environ.get("TREECAST_NO_NUMBA"):
    def njit(*args, **kwargs):  # pragma: no cover - debug aid
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap
else:
    from numba import njit

INF = np.inf


@njit(cache=True)
def _path_into(parent, source, node, buf):
    """Write the source->node parent-chain into buf (forward order); return length."""
    n = 0
    v = node
    while v != -1:
        buf[n] = v
        n += 1
        if v == source:
            break
        v = parent[v]
    # reverse in place
    for i in range(n // 2):
        buf[i], buf[n - 1 - i] = buf[n - 1 - i], buf[i]
    return n


@njit(cache=True)
def _path_less(parent, source, a, b, succ, buf_a, buf_b):
    """True if path source->a->succ is lexicographically smaller than source->b->succ.

    The shared successor is appended before comparing, so a chain that is a
    proper prefix of the other is ordered by the successor against the first
    node the longer chain adds (under positive weights the successor never
    equals an interior node, so the comparison always decides).
    """
    la = _path_into(parent, source, a, buf_a)
    lb = _path_into(parent, source, b, buf_b)
    buf_a[la] = succ
    buf_b[lb] = succ
    m = la + 1 if la < lb else lb + 1
    for i in range(m):
        if buf_a[i] != buf_b[i]:
            return buf_a[i] < buf_b[i]
    return la < lb


@njit(cache=True)
def _dijkstra_one(indptr, adj_node, adj_eid, weights, source,
                  dist, parent, settled, heap_d, heap_n, buf_a, buf_b):
    n = indptr.shape[0] - 1
    for i in range(n):
        dist[i] = INF
        parent[i] = -1
        settled[i] = False
    dist[source] = 0.0
    heap_d[0] = 0.0
    heap_n[0] = source
    size = 1
    while size > 0:
        d = heap_d[0]
        u = heap_n[0]
        # pop: move last to root, sift down
        size -= 1
        heap_d[0] = heap_d[size]
        heap_n[0] = heap_n[size]
        i = 0
        while True:
            lft = 2 * i + 1
            rgt = lft + 1
            small = i
            if lft < size and heap_d[lft] < heap_d[small]:
                small = lft
            if rgt < size and heap_d[rgt] < heap_d[small]:
                small = rgt
            if small == i:
                break
            heap_d[i], heap_d[small] = heap_d[small], heap_d[i]
            heap_n[i], heap_n[small] = heap_n[small], heap_n[i]
            i = small
        if settled[u]:
            continue
        settled[u] = True
        for k in range(indptr[u], indptr[u + 1]):
            v = adj_node[k]
            nd = d + weights[adj_eid[k]]
            if nd < dist[v]:
                dist[v] = nd
                parent[v] = u
                # push (nd, v)
                heap_d[size] = nd
                heap_n[size] = v
                i = size
                size += 1
                while i > 0:
                    par = (i - 1) // 2
                    if heap_d[par] <= heap_d[i]:
                        break
                    heap_d[i], heap_d[par] = heap_d[par], heap_d[i]
                    heap_n[i], heap_n[par] = heap_n[par], heap_n[i]
                    i = par
            elif nd == dist[v] and not settled[v] and parent[v] != u:
                # equal-weight path: keep the lexicographically smaller one
                if _path_less(parent, source, u, parent[v], v, buf_a, buf_b):
                    parent[v] = u


@njit(cache=True)
def dijkstra_multi(indptr, adj_node, adj_eid, weights, sources):
    """Shortest paths from each source; returns (dist, parent) matrices.

    Distances follow the directed edge weights in the direction of travel.
    Equal-weight ties resolve to the lexicographically smallest node
    sequence, so results are deterministic.
    """
    n = indptr.shape[0] - 1
    m = adj_node.shape[0]
    ns = sources.shape[0]
    dist = np.empty((ns, n), dtype=np.float64)
    parent = np.empty((ns, n), dtype=np.int32)
    settled = np.empty(n, dtype=np.bool_)
    heap_d = np.empty(m + 2, dtype=np.float64)
    heap_n = np.empty(m + 2, dtype=np.int32)
    buf_a = np.empty(n + 1, dtype=np.int32)
    buf_b = np.empty(n + 1, dtype=np.int32)
    for s in range(ns):
        _dijkstra_one(indptr, adj_node, adj_eid, weights, sources[s],
                      dist[s], parent[s], settled, heap_d, heap_n, buf_a, buf_b)
    return dist, parent


# --------------------------------------------------------------- dispatch

@njit(cache=True)
def greedy_fill(job_start, job_len, pool_eid, demand, order, cap):
    """Fill jobs in the given order: each takes its bottleneck leftover.

    ``cap`` is consumed in place; returns per-job rates (aligned with the
    job arrays, not with ``order``).
    """
    rates = np.zeros(demand.shape[0])
    for oi in range(order.shape[0]):
        j = order[oi]
        r = demand[j]
        s = job_start[j]
        for t in range(job_len[j]):
            c = cap[pool_eid[s + t]]
            if c < r:
                r = c
        if r < 0.0:
            r = 0.0
        for t in range(job_len[j]):
            cap[pool_eid[s + t]] -= r
        rates[j] = r
    return rates


@njit(cache=True)
def _mmf_less(share, arr, rid, pidx, a, b):
    """Priority order for freezing: (share, arrival, request id, partition)."""
    if share[a] != share[b]:
        return share[a] < share[b]
    if arr[a] != arr[b]:
        return arr[a] < arr[b]
    if rid[a] != rid[b]:
        return rid[a] < rid[b]
    return pidx[a] < pidx[b]


@njit(cache=True)
def mmf_rates(job_start, job_len, pool_eid, demand, arrival, rid, pidx, cap0):
    """Progressive filling: repeatedly freeze the job that stops growing first.

    A job's share is the minimum over its tree edges of remaining capacity
    divided by the number of not-yet-frozen trees on that edge; it freezes
    at min(share, demand), and that effective value is the selection key --
    a demand-limited job exits at its demand before the shared edge fills,
    so its leftover reaches everyone, which is what makes the result exactly
    max-min fair.  Keys only grow as jobs freeze, so a lazy min-heap
    (re-push on stale key) visits jobs in exact freeze order, ties resolved
    by (arrival, request id, partition index).
    """
    n_jobs = demand.shape[0]
    cap = cap0.copy()
    count = np.zeros(cap.shape[0])
    for j in range(n_jobs):
        s = job_start[j]
        for t in range(job_len[j]):
            count[pool_eid[s + t]] += 1.0

    share = np.empty(n_jobs)
    for j in range(n_jobs):
        s = job_start[j]
        best = demand[j]
        for t in range(job_len[j]):
            e = pool_eid[s + t]
            q = cap[e] / count[e]
            if q < best:
                best = q
        share[j] = best

    # binary heap of job indices keyed by current `share` copy (stale allowed)
    heap = np.empty(n_jobs, dtype=np.int64)
    key = share.copy()
    size = 0
    for j in range(n_jobs):
        heap[size] = j
        i = size
        size += 1
        while i > 0:
            p = (i - 1) // 2
            if not _mmf_less(key, arrival, rid, pidx, heap[i], heap[p]):
                break
            heap[i], heap[p] = heap[p], heap[i]
            i = p
    rates = np.zeros(n_jobs)
    while size > 0:
        j = heap[0]
        size -= 1
        heap[0] = heap[size]
        i = 0
        while True:
            lft = 2 * i + 1
            rgt = lft + 1
            small = i
            if lft < size and _mmf_less(key, arrival, rid, pidx, heap[lft], heap[small]):
                small = lft
            if rgt < size and _mmf_less(key, arrival, rid, pidx, heap[rgt], heap[small]):
                small = rgt
            if small == i:
                break
            heap[i], heap[small] = heap[small], heap[i]
            i = small
        # recompute j's current effective value min(share, demand)
        s = job_start[j]
        cur = demand[j]
        for t in range(job_len[j]):
            e = pool_eid[s + t]
            q = cap[e] / count[e]
            if q < cur:
                cur = q
        if cur > key[j]:
            # stale: someone else must freeze first; re-push with fresh key
            key[j] = cur
            heap[size] = j
            i = size
            size += 1
            while i > 0:
                p = (i - 1) // 2
                if not _mmf_less(key, arrival, rid, pidx, heap[i], heap[p]):
                    break
                heap[i], heap[p] = heap[p], heap[i]
                i = p
            continue
        r = cur
        if r < 0.0:
            r = 0.0
        rates[j] = r
        for t in range(job_len[j]):
            e = pool_eid[s + t]
            count[e] -= 1.0
            cap[e] -= r
    return rates


# ----------------------------------------------------------- slot delivery

@njit(cache=True)
def apply_delivery(alive, job_start, job_len, pool_eid, delivered,
                   loads, edge_delivered, slot_edge_volume):
    """Book one slot's deliveries: per-edge load release and volume counters.

    ``slot_edge_volume`` must arrive zeroed; it receives this slot's volume
    per edge (for the capacity check), while ``edge_delivered`` accumulates
    across the whole run.
    """
    for a in range(alive.shape[0]):
        j = alive[a]
        d = delivered[a]
        if d == 0.0:
            continue
        s = job_start[j]
        for t in range(job_len[j]):
            e = pool_eid[s + t]
            loads[e] -= d
            edge_delivered[e] += d
            slot_edge_volume[e] += d


@njit(cache=True)
def load_identity_gap(alive, job_start, job_len, pool_eid, residual, loads, scratch):
    """Largest |Σ residuals over an edge − booked load| across all edges."""
    for e in range(scratch.shape[0]):
        scratch[e] = 0.0
    for a in range(alive.shape[0]):
        j = alive[a]
        r = residual[j]
        s = job_start[j]
        for t in range(job_len[j]):
            scratch[pool_eid[s + t]] += r
    gap = 0.0
    for e in range(scratch.shape[0]):
        d = abs(scratch[e] - loads[e])
        if d > gap:
            gap = d
    return gap
