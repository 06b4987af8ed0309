"""Receiver partitioning and transfer admission.

A transfer request names one sender, a set of receivers, and a volume.  On
admission the receiver set may be split into cohorts, each served by its own
forwarding tree at its own rate, so nearby receivers are not held back by a
congested corner of the network.  Splitting costs bandwidth (the payload is
replicated per tree), so a split is only accepted while the total weight of
the candidate trees stays within a factor ``p_f`` of the single-tree weight.

Cohorts come from an agglomerative hierarchy over the receivers (average
linkage on hop distances by default).  Two alternative strategies exist for
comparison runs: uniform random assignment, and clustering receivers by how
far they sit from the sender.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .netgraph import Network
from .steiner import (ForwardingTree, LoadMap, _tree_from_closure,
                      compute_weights, tree_weight)

STRATEGIES = ("proximity", "random", "source_distance")


@dataclass(frozen=True)
class TransferRequest:
    """One bulk multicast transfer: ``source`` -> every node in ``receivers``."""

    rid: int
    arrival: int
    source: int
    receivers: tuple[int, ...]
    volume: float

    def __post_init__(self):
        rcv = tuple(sorted(set(int(r) for r in self.receivers)))
        if rcv != self.receivers:
            object.__setattr__(self, "receivers", rcv)
        if not rcv:
            raise ValueError("request has no receivers")
        if self.source in rcv:
            raise ValueError("source cannot be a receiver")
        if self.volume <= 0:
            raise ValueError("volume must be positive")
        if self.arrival < 0:
            raise ValueError("arrival slot must be >= 0")


@dataclass
class PartitionJob:
    """Schedulable unit: one receiver cohort served by one forwarding tree.

    ``residual`` is the volume still to deliver; the owning request counts
    as complete for a receiver when that receiver's job drains.
    """

    request: TransferRequest
    index: int  # 1-based within the request
    receivers: tuple[int, ...]
    tree: ForwardingTree
    residual: float

    @property
    def rid(self) -> int:
        return self.request.rid

    @property
    def arrival(self) -> int:
        return self.request.arrival

    @property
    def key(self) -> tuple[int, int]:
        return (self.request.rid, self.index)


class ClusterHierarchy:
    """Merge history of agglomerative clustering over a receiver set.

    ``cut(k)`` replays merges from singletons until exactly ``k`` clusters
    remain; clusters come back as sorted member tuples ordered by smallest
    member.
    """

    def __init__(self, members: tuple[int, ...],
                 merges: list[tuple[tuple[int, ...], tuple[int, ...], float]]):
        self.members = members
        self.merges = merges

    def cut(self, k: int) -> list[tuple[int, ...]]:
        m = len(self.members)
        if not (1 <= k <= m):
            raise ValueError(f"cut level {k} outside 1..{m}")
        clusters = {(x,) for x in self.members}
        for a, b, _ in self.merges[: m - k]:
            clusters.remove(a)
            clusters.remove(b)
            clusters.add(tuple(sorted(a + b)))
        return sorted(clusters, key=lambda c: c[0])


def agglomerate(receivers, dist: np.ndarray) -> ClusterHierarchy:
    """Average-linkage agglomeration of ``receivers`` under a node metric.

    ``dist`` is a full node-by-node distance matrix (hop counts in normal
    use).  Ties on linkage value resolve toward the pair with the smallest
    (then second-smallest) minimum member id, so the hierarchy is
    deterministic.
    """
    mem = tuple(sorted(set(int(r) for r in receivers)))
    m = len(mem)
    if m == 0:
        raise ValueError("no receivers to cluster")
    pair = np.array([[float(dist[a, b]) for b in mem] for a in mem])
    if not np.allclose(pair, pair.T):
        raise ValueError("distance matrix must be symmetric")
    return _agglomerate_from_matrix(mem, pair)


def _agglomerate_from_matrix(mem: tuple[int, ...], pair: np.ndarray) -> ClusterHierarchy:
    m = len(mem)
    members: list[tuple[int, ...] | None] = [(x,) for x in mem]
    sizes = [1.0] * m
    active = list(range(m))
    link = pair.copy()
    merges: list[tuple[tuple[int, ...], tuple[int, ...], float]] = []
    while len(active) > 1:
        best = None
        for ai in range(len(active)):
            i = active[ai]
            for aj in range(ai + 1, len(active)):
                j = active[aj]
                lo, hi = members[i][0], members[j][0]
                if lo > hi:
                    lo, hi = hi, lo
                key = (link[i, j], lo, hi)
                if best is None or key < best[0]:
                    best = (key, i, j)
        (value, _, _), i, j = best
        merges.append((members[i], members[j], float(value)))
        # Lance-Williams average-linkage update, j folds into i
        si, sj = sizes[i], sizes[j]
        for c in active:
            if c in (i, j):
                continue
            link[i, c] = link[c, i] = (si * link[i, c] + sj * link[j, c]) / (si + sj)
        members[i] = tuple(sorted(members[i] + members[j]))
        sizes[i] = si + sj
        members[j] = None
        active.remove(j)
    return ClusterHierarchy(mem, merges)


def source_distance_hierarchy(source: int, receivers, dist: np.ndarray) -> ClusterHierarchy:
    """Cluster receivers by similarity of their hop distance from the sender."""
    mem = tuple(sorted(set(int(r) for r in receivers)))
    d = np.array([float(dist[source, r]) for r in mem])
    pair = np.abs(d[:, None] - d[None, :])
    return _agglomerate_from_matrix(mem, pair)


def random_partition(receivers, k: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    """Assign each receiver to one of ``k`` bins uniformly; drop empty bins."""
    mem = tuple(sorted(set(int(r) for r in receivers)))
    bins: list[list[int]] = [[] for _ in range(k)]
    for r in mem:
        bins[int(rng.integers(k))].append(r)
    return sorted((tuple(b) for b in bins if b), key=lambda c: c[0])


def release_load(job: PartitionJob, delivered: float, loads: LoadMap) -> None:
    """Retire ``delivered`` volume from a job and its tree's outstanding load."""
    if delivered < 0:
        raise ValueError("delivered volume cannot be negative")
    if delivered > job.residual + 1e-9:
        raise ValueError(f"delivered {delivered} exceeds residual {job.residual}")
    d = min(delivered, job.residual)
    job.residual -= d
    if job.residual < 1e-12:
        job.residual = 0.0
    loads[job.tree.eids] -= d


def submit(request: TransferRequest, n: int, p_f: float, net: Network,
           loads: LoadMap, dist: np.ndarray, *,
           strategy: str = "proximity", rng: np.random.Generator | None = None,
           uniform_weights: bool = False) -> list[PartitionJob]:
    """Admit a request: choose cohorts and trees, book their load.

    Tries cohort counts ``k = min(n, |receivers|) .. 2`` against the
    hierarchy (or random assignment); the first ``k`` whose candidate trees
    -- all evaluated under the weight map as of admission -- weigh no more
    than ``p_f`` times the single tree is accepted.  Accepted cohorts get
    their trees assigned sequentially, each search seeing the load of the
    previous assignments.  If no split qualifies, the single tree is used.

    Mutates ``loads``. ``uniform_weights`` searches trees by edge count
    instead (bandwidth floor for comparison runs).
    """
    jobs, _ = submit_detail(request, n, p_f, net, loads, dist, strategy=strategy,
                            rng=rng, uniform_weights=uniform_weights)
    return jobs


def submit_detail(request: TransferRequest, n: int, p_f: float, net: Network,
                  loads: LoadMap, dist: np.ndarray, *,
                  strategy: str = "proximity",
                  rng: np.random.Generator | None = None,
                  uniform_weights: bool = False,
                  ) -> tuple[list[PartitionJob], ForwardingTree]:
    """Like :func:`submit` but also returns the single-tree alternative."""
    if n < 1:
        raise ValueError("partition bound n must be >= 1")
    if p_f <= 0:
        raise ValueError("partitioning factor must be positive")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown partition strategy {strategy!r}")
    for node in request.receivers + (request.source,):
        if not (0 <= node < net.num_nodes):
            raise ValueError(f"node {node} outside the network")

    vol = request.volume
    if uniform_weights:
        weights = np.ones(net.num_edges)
    else:
        weights = compute_weights(loads, vol)
    src = request.source
    rcv = request.receivers
    k_nodes = [src] + list(rcv)
    sources = np.array(k_nodes, dtype=np.int64)
    dmat, pmat = _kernels.dijkstra_multi(
        net.adj_indptr, net.adj_node, net.adj_eid, weights, sources)
    row_of = {node: i for i, node in enumerate(k_nodes)}

    def closure_tree(part, wmap) -> ForwardingTree:
        nodes = [src] + list(part)
        rows = [row_of[x] for x in nodes]
        return _tree_from_closure(net, wmap, src, list(part), nodes,
                                  dmat[rows], pmat[rows])

    single = closure_tree(rcv, weights)
    w_single = tree_weight(single, weights)

    m = len(rcv)
    parts_chosen: list[tuple[int, ...]] | None = None
    if n >= 2 and m >= 2:
        hierarchy = None
        if strategy == "proximity":
            hierarchy = agglomerate(rcv, dist)
        elif strategy == "source_distance":
            hierarchy = source_distance_hierarchy(src, rcv, dist)
        elif rng is None:
            raise ValueError("random strategy needs an rng")
        for k in range(min(n, m), 1, -1):
            if hierarchy is not None:
                parts = hierarchy.cut(k)
            else:
                parts = random_partition(rcv, k, rng)
                if len(parts) < 2:
                    continue
            total = sum(tree_weight(closure_tree(p, weights), weights) for p in parts)
            if total <= p_f * w_single + 1e-9 * max(1.0, w_single):
                parts_chosen = parts
                break

    if parts_chosen is None:
        loads[single.eids] += vol
        return [PartitionJob(request, 1, rcv, single, vol)], single

    out: list[PartitionJob] = []
    for idx, part in enumerate(parts_chosen, start=1):
        if uniform_weights:
            wmap = weights
        else:
            wmap = compute_weights(loads, vol)
        if idx == 1:
            tree = closure_tree(part, wmap)  # same map as the qualifying check
        else:
            nodes = [src] + list(part)
            srcs = np.array(nodes, dtype=np.int64)
            dm, pm = _kernels.dijkstra_multi(
                net.adj_indptr, net.adj_node, net.adj_eid, wmap, srcs)
            tree = _tree_from_closure(net, wmap, src, list(part), nodes, dm, pm)
        loads[tree.eids] += vol
        out.append(PartitionJob(request, idx, part, tree, vol))
    return out, single
