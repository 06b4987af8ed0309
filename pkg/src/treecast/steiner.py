"""Load-aware forwarding-tree search.

A forwarding tree is an arborescence rooted at the sender that reaches every
receiver in one partition; traffic flows at a single rate over all of its
edges.  Trees are chosen to minimize total *weight*, where each directed
edge weighs its currently outstanding volume plus the volume of the transfer
being placed -- so lightly loaded regions attract new trees, and a large
transfer prefers fewer edges.

Two searches are provided: a metric-closure heuristic (terminal complete
graph under weighted shortest paths -> spanning tree -> path expansion ->
prune -> orient away from the root) used by the simulator, and an exact
dynamic program over terminal subsets used as the test oracle on small
instances.  Both are deterministic: equal-weight shortest paths resolve to
the lexicographically smallest node sequence, and remaining ties break on
sorted node ids.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .netgraph import Network

# Weight and load maps are float64 arrays indexed by directed edge id.
LoadMap = np.ndarray
WeightMap = np.ndarray


def new_load_map(net: Network) -> LoadMap:
    """All-zero outstanding-volume map for a network."""
    return np.zeros(net.num_edges, dtype=np.float64)


def compute_weights(loads: LoadMap, volume: float) -> WeightMap:
    """Per-edge search weight: outstanding volume plus the new transfer's volume."""
    if volume <= 0:
        raise ValueError(f"transfer volume must be positive, got {volume}")
    if np.any(loads < -1e-9):
        raise ValueError("negative outstanding load")
    return loads + volume


@dataclass(frozen=True)
class ForwardingTree:
    """Arborescence: ``root`` plus directed edges oriented away from it."""

    root: int
    terminals: frozenset[int]
    edges: tuple[tuple[int, int], ...]  # (u, v) pairs, sorted
    eids: np.ndarray = field(compare=False, repr=False)  # aligned with edges

    @property
    def nodes(self) -> frozenset[int]:
        out = {self.root}
        for u, v in self.edges:
            out.add(u)
            out.add(v)
        return frozenset(out)

    def out_degree(self) -> dict[int, int]:
        deg: dict[int, int] = {}
        for u, _ in self.edges:
            deg[u] = deg.get(u, 0) + 1
        return deg

    def replication_nodes(self) -> tuple[int, ...]:
        """Nodes that copy traffic onto two or more outgoing edges."""
        return tuple(sorted(u for u, d in self.out_degree().items() if d >= 2))


def tree_weight(tree: ForwardingTree, weights: WeightMap) -> float:
    return float(weights[tree.eids].sum())


def validate_tree(net: Network, tree: ForwardingTree) -> None:
    """Raise ValueError unless the tree is a valid rooted arborescence.

    Checks: edges exist in the network, each node has at most one incoming
    edge, the root has none, every terminal (and every edge) is reachable
    from the root, there are no cycles, and every leaf is a terminal.
    """
    children: dict[int, list[int]] = {}
    indeg: dict[int, int] = {}
    for (u, v), eid in zip(tree.edges, tree.eids):
        if not net.has_edge(u, v) or net.edge_id(u, v) != int(eid):
            raise ValueError(f"edge ({u},{v}) not in network or eid mismatch")
        children.setdefault(u, []).append(v)
        indeg[v] = indeg.get(v, 0) + 1
        if indeg[v] > 1:
            raise ValueError(f"node {v} has two parents")
    if indeg.get(tree.root):
        raise ValueError("root has an incoming edge")
    seen = {tree.root}
    q = deque([tree.root])
    while q:
        u = q.popleft()
        for v in children.get(u, ()):
            if v in seen:
                raise ValueError("cycle detected")
            seen.add(v)
            q.append(v)
    if len(seen) != len(tree.edges) + 1:
        raise ValueError("tree has edges unreachable from the root")
    missing = set(tree.terminals) - seen
    if missing:
        raise ValueError(f"terminals not reached: {sorted(missing)}")
    for u in seen:
        if u != tree.root and u not in children and u not in tree.terminals:
            raise ValueError(f"non-terminal leaf {u}")


def _check_terminals(net: Network, root: int, terminals) -> list[int]:
    ts = sorted(set(int(t) for t in terminals))
    if not ts:
        raise ValueError("need at least one terminal")
    if root in ts:
        raise ValueError("root must not be a terminal")
    for t in ts + [root]:
        if not (0 <= t < net.num_nodes):
            raise ValueError(f"node {t} outside the network")
    return ts


def _walk(parent_row, src: int, dst: int) -> list[int]:
    """Forward node sequence src..dst from one Dijkstra parent row."""
    path = [dst]
    v = dst
    while v != src:
        v = int(parent_row[v])
        if v < 0:
            raise ValueError(f"no path to {dst}")  # impossible on connected nets
        path.append(v)
    path.reverse()
    return path


def _finish_tree(net: Network, weights: WeightMap, root: int, ts: list[int],
                 und_edges: dict[tuple[int, int], float]) -> ForwardingTree:
    """Spanning tree over an undirected edge pool -> prune -> orient from root."""
    # Kruskal, deterministic: sort by (weight, u, v)
    keep = set(ts) | {root}
    parent_ds: dict[int, int] = {}

    def find(x: int) -> int:
        while parent_ds.get(x, x) != x:
            parent_ds[x] = parent_ds.get(parent_ds[x], parent_ds[x])
            x = parent_ds[x]
        return x

    mst: dict[int, list[int]] = {}
    n_nodes = len({u for e in und_edges for u in e})
    taken = 0
    for (u, v), w in sorted(und_edges.items(), key=lambda kv: (kv[1], kv[0])):
        ru, rv = find(u), find(v)
        if ru == rv:
            continue
        parent_ds[ru] = rv
        mst.setdefault(u, []).append(v)
        mst.setdefault(v, []).append(u)
        taken += 1
        if taken == n_nodes - 1:
            break
    # prune non-terminal leaves repeatedly
    deg = {u: len(vs) for u, vs in mst.items()}
    leaves = deque(u for u, d in deg.items() if d == 1 and u not in keep)
    removed: set[tuple[int, int]] = set()
    gone: set[int] = set()
    while leaves:
        u = leaves.popleft()
        gone.add(u)
        for v in mst[u]:
            if v in gone or (min(u, v), max(u, v)) in removed:
                continue
            removed.add((min(u, v), max(u, v)))
            deg[v] -= 1
            if deg[v] == 1 and v not in keep:
                leaves.append(v)
    # orient away from root (BFS, children ascending)
    edges: list[tuple[int, int]] = []
    seen = {root}
    q = deque([root])
    while q:
        u = q.popleft()
        for v in sorted(mst.get(u, ())):
            if v in seen or v in gone or (min(u, v), max(u, v)) in removed:
                continue
            seen.add(v)
            edges.append((u, v))
            q.append(v)
    edges.sort()
    eids = np.array([net.edge_id(u, v) for u, v in edges], dtype=np.int32)
    return ForwardingTree(root=root, terminals=frozenset(ts), edges=tuple(edges), eids=eids)


def min_weight_steiner_tree(net: Network, weights: WeightMap, root: int,
                            terminals) -> ForwardingTree:
    """Metric-closure heuristic search for a light forwarding tree.

    Shortest paths between the root and the terminals are computed under the
    directed weights in the direction of travel; the closure's spanning tree
    is grown from the root, expanded back into graph paths, re-spanned,
    pruned of non-terminal leaves, and oriented away from the root.  On
    symmetric weight maps the result is within 2x of the optimum.
    """
    ts = _check_terminals(net, root, terminals)
    if len(weights) != net.num_edges:
        raise ValueError("weight map does not match the network")
    if np.any(weights <= 0):
        raise ValueError("edge weights must be positive")
    k_nodes = [root] + ts
    sources = np.array(k_nodes, dtype=np.int64)
    dist, parent = _kernels.dijkstra_multi(
        net.adj_indptr, net.adj_node, net.adj_eid, weights, sources)
    return _tree_from_closure(net, weights, root, ts, k_nodes, dist, parent)


def _tree_from_closure(net: Network, weights: WeightMap, root: int, ts: list[int],
                       k_nodes: list[int], dist: np.ndarray,
                       parent: np.ndarray) -> ForwardingTree:
    """Closure spanning tree (grown from the root) -> expansion -> finish."""
    k = len(k_nodes)
    in_tree = [0]  # indices into k_nodes; root first
    pending = set(range(1, k))
    closure_pairs: list[tuple[int, int]] = []  # (src_idx, dst_idx)
    while pending:
        best = None
        for a in in_tree:
            row = dist[a]
            for b in pending:
                key = (row[k_nodes[b]], k_nodes[a], k_nodes[b])
                if best is None or key < best[0]:
                    best = (key, a, b)
        _, a, b = best
        if not np.isfinite(best[0][0]):
            raise ValueError("terminal unreachable")  # cannot happen when connected
        closure_pairs.append((a, b))
        in_tree.append(b)
        pending.discard(b)
    und_edges: dict[tuple[int, int], float] = {}
    for a, b in closure_pairs:
        path = _walk(parent[a], k_nodes[a], k_nodes[b])
        for u, v in zip(path, path[1:]):
            key = (min(u, v), max(u, v))
            w = float(weights[net.edge_id(u, v)])
            if key not in und_edges or w < und_edges[key]:
                und_edges[key] = w
    return _finish_tree(net, weights, root, ts, und_edges)


_ORACLE_MAX_NODES = 16
_ORACLE_MAX_TERMINALS = 10


def exact_steiner_oracle(net: Network, weights: WeightMap, root: int,
                         terminals) -> ForwardingTree:
    """Exact minimum-weight forwarding tree by DP over terminal subsets.

    Intended as a reference for small instances; refuses anything bigger
    than {_ORACLE_MAX_NODES} nodes with more than {_ORACLE_MAX_TERMINALS}
    terminals.  Deterministic: fixed iteration order with strict
    improvement, so ties always resolve the same way, and re-weighting an
    edge outside the returned tree never changes the result.
    """
    ts = _check_terminals(net, root, terminals)
    n, k = net.num_nodes, len(ts)
    if n > _ORACLE_MAX_NODES and k > _ORACLE_MAX_TERMINALS:
        raise ValueError(f"oracle limited to {_ORACLE_MAX_NODES} nodes or "
                         f"{_ORACLE_MAX_TERMINALS} terminals (got {n}, {k})")
    if np.any(weights <= 0):
        raise ValueError("edge weights must be positive")

    # All-pairs directed distances with deterministic path reconstruction.
    d = np.full((n, n), np.inf)
    via = np.full((n, n), -1, dtype=np.int32)
    for i in range(n):
        d[i, i] = 0.0
    for eid, e in enumerate(net.edges):
        if weights[eid] < d[e.u, e.v]:
            d[e.u, e.v] = weights[eid]
    for m in range(n):
        for i in range(n):
            dim = d[i, m]
            if not np.isfinite(dim):
                continue
            for j in range(n):
                nd = dim + d[m, j]
                if nd < d[i, j]:
                    d[i, j] = nd
                    via[i, j] = m

    def expand(i: int, j: int, out: list[tuple[int, int]]):
        if i == j:
            return
        m = int(via[i, j])
        if m < 0:
            out.append((i, j))
        else:
            expand(i, m, out)
            expand(m, j, out)

    full = (1 << k) - 1
    cost = np.full((full + 1, n), np.inf)
    # choice[mask][v]: (-1, terminal) base, (u, submask) split+path
    choice: list[list[tuple[int, int] | None]] = [[None] * n for _ in range(full + 1)]
    for i, t in enumerate(ts):
        m = 1 << i
        for v in range(n):
            cost[m, v] = d[v, t]
            choice[m][v] = (-1, t)
    for mask in range(1, full + 1):
        if mask & (mask - 1) == 0:
            continue
        merged = np.full(n, np.inf)
        marg: list[int] = [0] * n
        sub = (mask - 1) & mask
        while sub:
            rest = mask ^ sub
            if sub < rest:  # each unordered split once
                for v in range(n):
                    c = cost[sub, v] + cost[rest, v]
                    if c < merged[v]:
                        merged[v] = c
                        marg[v] = sub
            sub = (sub - 1) & mask
        for v in range(n):
            best = merged[v]
            buid = v
            for u in range(n):
                c = d[v, u] + merged[u]
                if c < best:
                    best = c
                    buid = u
            cost[mask, v] = best
            choice[mask][v] = (buid, marg[buid])

    edges_raw: list[tuple[int, int]] = []

    def build(mask: int, v: int):
        u, info = choice[mask][v]
        if u == -1:
            expand(v, info, edges_raw)
            return
        expand(v, u, edges_raw)
        build(info, u)
        build(mask ^ info, u)

    build(full, root)

    # The union of reconstructed edges can touch a node twice; keep the first
    # in-edge per node (BFS from root), then prune non-terminal leaves.
    children: dict[int, list[int]] = {}
    for u, v in sorted(set(edges_raw)):
        children.setdefault(u, []).append(v)
    par: dict[int, int] = {root: -1}
    order = deque([root])
    while order:
        u = order.popleft()
        for v in children.get(u, ()):
            if v not in par:
                par[v] = u
                order.append(v)
    keep = set(ts)
    kids_count: dict[int, int] = {}
    for v, u in par.items():
        if u >= 0:
            kids_count[u] = kids_count.get(u, 0) + 1
    drop = deque(v for v in par if v != root and kids_count.get(v, 0) == 0 and v not in keep)
    dead: set[int] = set()
    while drop:
        v = drop.popleft()
        dead.add(v)
        u = par[v]
        kids_count[u] -= 1
        if u != root and kids_count[u] == 0 and u not in keep:
            drop.append(u)
    edges = sorted((u, v) for v, u in par.items() if u >= 0 and v not in dead)
    eids = np.array([net.edge_id(u, v) for u, v in edges], dtype=np.int32)
    tree = ForwardingTree(root=root, terminals=frozenset(ts), edges=tuple(edges), eids=eids)
    got = tree_weight(tree, weights)
    want = float(cost[full, root])
    if abs(got - want) > 1e-9 * max(1.0, want):
        raise AssertionError(f"oracle reconstruction weight {got} != DP value {want}")
    return tree
