"""Per-slot rate allocation for the active partition jobs.

Three policies share one contract: given the active jobs and the network,
return a rate per job (bytes per time unit) such that, on every directed
edge, the rates of the jobs whose trees use that edge sum to at most its
capacity, and no job is driven faster than it can finish within one slot
(``rate <= residual / delta``).

* ``fcfs`` -- strict priority by arrival slot: each job in order takes the
  bottleneck leftover along its tree.
* ``srpt`` -- same greedy fill, but ordered by the remaining volume of the
  whole transfer the job belongs to (summed over its sibling partitions),
  shortest first.
* ``mmf`` -- max-min fairness by progressive filling: grow all rates
  together, freeze a job when one of its edges runs out (or its demand is
  met), repeat.  The result maximises the minimum rate, then the next, and
  so on; it is the unique allocation where every unsatisfied job has a
  saturated edge on which it is among the fastest.

All ties -- equal arrival, equal remaining volume, equal share -- resolve by
``(arrival, request id, partition index)``, so the allocation is a pure
function of the job set and never depends on list order.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping

import numpy as np

from ._kernels import greedy_fill, mmf_rates
from .cohort import PartitionJob
from .netgraph import Network

__all__ = [
    "POLICIES",
    "RateVector",
    "dispatch",
    "dispatch_fcfs",
    "dispatch_mmf",
    "dispatch_srpt",
]

POLICIES = ("fcfs", "srpt", "mmf")

#: Rates keyed by ``job.key`` (request id, partition index).
RateVector = Mapping[tuple[int, int], float]


def _as_arrays(jobs: list[PartitionJob], net: Network, delta: float):
    """Flatten jobs into the pooled layout the kernels consume."""
    n = len(jobs)
    job_len = np.empty(n, dtype=np.int64)
    arrival = np.empty(n, dtype=np.int64)
    rid = np.empty(n, dtype=np.int64)
    pidx = np.empty(n, dtype=np.int64)
    demand = np.empty(n)
    for j, job in enumerate(jobs):
        if job.residual < 0:
            raise ValueError(f"job {job.key} has negative residual {job.residual}")
        eids = job.tree.eids
        if eids.size and (eids.min() < 0 or eids.max() >= net.num_edges):
            raise ValueError(f"job {job.key} uses edges outside the network")
        job_len[j] = eids.size
        arrival[j] = job.arrival
        rid[j], pidx[j] = job.key
        demand[j] = job.residual / delta
    job_start = np.zeros(n, dtype=np.int64)
    if n:
        np.cumsum(job_len[:-1], out=job_start[1:])
    total = int(job_len.sum())
    pool_eid = np.empty(total, dtype=np.int32)
    for j, job in enumerate(jobs):
        pool_eid[job_start[j] : job_start[j] + job_len[j]] = job.tree.eids
    return job_start, job_len, pool_eid, demand, arrival, rid, pidx


def _check(net: Network, delta: float) -> None:
    if not isinstance(net, Network):
        raise TypeError("net must be a Network")
    if not delta > 0:
        raise ValueError(f"slot length must be positive, got {delta}")


def _to_vector(jobs: list[PartitionJob], rates: np.ndarray) -> dict[tuple[int, int], float]:
    return {job.key: float(rates[j]) for j, job in enumerate(jobs)}


def dispatch_fcfs(
    jobs: Iterable[PartitionJob], net: Network, delta: float = 1.0
) -> dict[tuple[int, int], float]:
    """Greedy fill in arrival order (first come, first served)."""
    jobs = list(jobs)
    _check(net, delta)
    if not jobs:
        return {}
    job_start, job_len, pool_eid, demand, arrival, rid, pidx = _as_arrays(jobs, net, delta)
    order = np.lexsort((pidx, rid, arrival))
    rates = greedy_fill(job_start, job_len, pool_eid, demand, order, net.capacities.copy())
    return _to_vector(jobs, rates)


def dispatch_srpt(
    jobs: Iterable[PartitionJob],
    net: Network,
    delta: float = 1.0,
    *,
    per_partition: bool = False,
) -> dict[tuple[int, int], float]:
    """Greedy fill, shortest remaining transfer first.

    A transfer's remaining volume is the sum of the residuals of all its
    partition jobs, so sibling partitions share one priority and preempt as
    a unit.  ``per_partition=True`` ranks each partition by its own residual
    instead.
    """
    jobs = list(jobs)
    _check(net, delta)
    if not jobs:
        return {}
    job_start, job_len, pool_eid, demand, arrival, rid, pidx = _as_arrays(jobs, net, delta)
    if per_partition:
        remaining = np.array([job.residual for job in jobs])
    else:
        by_rid: dict[int, float] = {}
        for job in jobs:
            by_rid[job.rid] = by_rid.get(job.rid, 0.0) + job.residual
        remaining = np.array([by_rid[job.rid] for job in jobs])
    order = np.lexsort((pidx, rid, arrival, remaining))
    rates = greedy_fill(job_start, job_len, pool_eid, demand, order, net.capacities.copy())
    return _to_vector(jobs, rates)


def dispatch_mmf(
    jobs: Iterable[PartitionJob], net: Network, delta: float = 1.0
) -> dict[tuple[int, int], float]:
    """Max-min fair rates by progressive filling."""
    jobs = list(jobs)
    _check(net, delta)
    if not jobs:
        return {}
    job_start, job_len, pool_eid, demand, arrival, rid, pidx = _as_arrays(jobs, net, delta)
    rates = mmf_rates(
        job_start, job_len, pool_eid, demand, arrival, rid, pidx, net.capacities
    )
    return _to_vector(jobs, rates)


_DISPATCHERS = {
    "fcfs": dispatch_fcfs,
    "srpt": dispatch_srpt,
    "mmf": dispatch_mmf,
}


def dispatch(
    jobs: Iterable[PartitionJob],
    net: Network,
    delta: float = 1.0,
    policy: str = "mmf",
) -> dict[tuple[int, int], float]:
    """Allocate this slot's rates under the named policy."""
    try:
        fn = _DISPATCHERS[policy]
    except KeyError:
        raise ValueError(f"unknown policy {policy!r}, expected one of {POLICIES}") from None
    return fn(jobs, net, delta)
