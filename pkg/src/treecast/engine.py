"""Slotted-timeline simulation: workload, admission, dispatch, delivery.

One run is a strict per-slot cycle.  At slot ``t``:

1. every request whose arrival slot is ``t`` is admitted — its receiver
   cohorts and forwarding trees are chosen and their load is booked — but it
   carries no traffic yet;
2. rates are allocated over the jobs admitted *before* slot ``t`` (a new
   transfer first transmits in the slot after it arrives);
3. each active job delivers ``rate × δ``, bounded by what it still owes;
   jobs that reach zero are recorded as completed at slot ``t`` (all
   receivers of that partition finish together).

The loop continues past the last arrival until every job drains.  Requests
arriving during the warmup window are simulated normally but flagged so the
statistics layer can skip them.

Bookkeeping is checked every slot, not only under test: per-edge delivered
volume never exceeds capacity × δ, the per-edge load ledger equals the sum
of outstanding residuals, and each partition's delivered total equals the
request volume when it completes.  A breach raises :class:`InvariantError`
rather than producing silently wrong results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as kn
from .cohort import PartitionJob, TransferRequest, submit_detail
from .netgraph import (
    Network,
    TopologyError,
    generate_random_topology,
    hop_distances,
    load_topology,
)
from .steiner import ForwardingTree, new_load_map

__all__ = [
    "SCHEMES",
    "ConfigError",
    "EventLog",
    "InvariantError",
    "PartitionRecord",
    "RequestRecord",
    "SimConfig",
    "generate_workload",
    "load_network",
    "parse_config",
    "run",
]


class ConfigError(ValueError):
    """Raised for unreadable, unknown, or out-of-range configuration."""


class InvariantError(RuntimeError):
    """Raised when a run breaks one of its bookkeeping guarantees."""


#: scheme name -> (max cohorts, partitioning factor or None=config, default policy)
SCHEMES = {
    "dccast": (1, None, "fcfs"),
    "quickcast_np": (1, None, "mmf"),
    "quickcast_two": (2, math.inf, "mmf"),
    "quickcast": (2, None, "mmf"),
}

_DISTRIBUTIONS = ("exponential", "pareto", "lognormal")
_POLICIES = ("fcfs", "srpt", "mmf")
_STRATEGIES = ("proximity", "random", "source_distance")
_WEIGHTINGS = ("load", "uniform")


@dataclass
class SimConfig:
    """One simulation point; every field has a config-file key of the same
    name (``lambda`` maps to :attr:`arrival_rate`)."""

    topology: str = "gscale"
    scheme: str = "quickcast"
    policy: str | None = None  # None -> the scheme's default
    arrival_rate: float = 1.0  # config key: lambda
    size_dist: str = "exponential"
    size_mean: float = 20.0
    size_min: float = 2.0
    size_max: float = 2000.0
    size_sigma: float = 1.0  # lognormal shape
    receivers: int = 10
    max_partitions: int = 2
    pf: float = 1.1
    delta: float = 1.0
    slots: int = 1000
    warmup: int = 100
    seed: int = 0
    partition_strategy: str = "proximity"
    tree_weighting: str = "load"

    def validate(self) -> "SimConfig":
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.policy is not None and self.policy not in _POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}")
        if not self.arrival_rate > 0:
            raise ConfigError(f"lambda must be positive, got {self.arrival_rate}")
        if self.size_dist not in _DISTRIBUTIONS:
            raise ConfigError(f"unknown size_dist {self.size_dist!r}")
        if not (0 <= self.size_min <= self.size_mean <= self.size_max):
            raise ConfigError(
                f"need size_min <= size_mean <= size_max, got "
                f"{self.size_min}/{self.size_mean}/{self.size_max}"
            )
        if self.size_dist == "pareto" and not (0 < self.size_min < self.size_mean):
            raise ConfigError("pareto sizes need 0 < size_min < size_mean")
        if not self.size_sigma > 0:
            raise ConfigError("size_sigma must be positive")
        if self.receivers < 1:
            raise ConfigError("receivers must be >= 1")
        if self.max_partitions < 1:
            raise ConfigError("max_partitions must be >= 1")
        if not self.pf >= 1.0:
            raise ConfigError(f"pf must be >= 1, got {self.pf}")
        if not self.delta > 0:
            raise ConfigError("delta must be positive")
        if self.slots < 0 or self.warmup < 0 or self.warmup > self.slots:
            raise ConfigError("need 0 <= warmup <= slots")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.partition_strategy not in _STRATEGIES:
            raise ConfigError(f"unknown partition_strategy {self.partition_strategy!r}")
        if self.tree_weighting not in _WEIGHTINGS:
            raise ConfigError(f"unknown tree_weighting {self.tree_weighting!r}")
        return self

    def effective_policy(self) -> str:
        return self.policy if self.policy is not None else SCHEMES[self.scheme][2]

    def with_overrides(self, pairs: dict[str, str]) -> "SimConfig":
        updates = {}
        for key, value in pairs.items():
            if key not in _FIELD_BY_KEY:
                raise ConfigError(f"unknown config key {key!r}")
            updates[_FIELD_BY_KEY[key]] = _coerce(key, value)
        return replace(self, **updates).validate()


_FIELD_BY_KEY = {f: f for f in (
    "topology", "scheme", "policy", "size_dist", "size_mean", "size_min",
    "size_max", "size_sigma", "receivers", "max_partitions", "pf", "delta",
    "slots", "warmup", "seed", "partition_strategy", "tree_weighting",
)}
_FIELD_BY_KEY["lambda"] = "arrival_rate"

_INT_KEYS = {"receivers", "max_partitions", "slots", "warmup", "seed"}
_FLOAT_KEYS = {"lambda", "size_mean", "size_min", "size_max", "size_sigma", "pf", "delta"}


def _coerce(key: str, value: str):
    value = value.strip()
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {value!r}") from exc
    if key == "policy" and value in ("", "default", "none"):
        return None
    return value


def parse_config(text: str) -> SimConfig:
    """Build a config from ``key = value`` lines (``#`` comments, blank ok)."""
    pairs: dict[str, str] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_BY_KEY:
            raise ConfigError(f"line {ln}: unknown config key {key!r}")
        if key in pairs:
            raise ConfigError(f"line {ln}: duplicate key {key!r}")
        pairs[key] = value
    return SimConfig().with_overrides(pairs)


def load_config(path: str) -> SimConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return parse_config(text)


def load_network(cfg: SimConfig) -> Network:
    """Materialize the configured topology (builtin, file, or ``random:N,L``)."""
    spec = cfg.topology
    if spec.startswith("random:"):
        try:
            nodes_s, links_s = spec[len("random:"):].split(",")
            nodes, links = int(nodes_s), int(links_s)
        except ValueError as exc:
            raise ConfigError(f"topology {spec!r}: expected random:<nodes>,<links>") from exc
        try:
            return generate_random_topology(nodes, links, seed=cfg.seed)
        except (TopologyError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
    try:
        return load_topology(spec)
    except (TopologyError, OSError) as exc:
        raise ConfigError(f"topology {spec!r}: {exc}") from exc


# ------------------------------------------------------------ workload

def _size_sampler(cfg: SimConfig):
    if cfg.size_dist == "exponential":
        mean = cfg.size_mean

        def draw(rng):
            return rng.exponential(mean)
    elif cfg.size_dist == "pareto":
        xm = cfg.size_min
        alpha = cfg.size_mean / (cfg.size_mean - cfg.size_min)

        def draw(rng):
            return xm * (1.0 + rng.pareto(alpha))
    else:  # lognormal
        sigma = cfg.size_sigma
        mu = math.log(cfg.size_mean) - 0.5 * sigma * sigma

        def draw(rng):
            return rng.lognormal(mu, sigma)
    lo, hi = cfg.size_min, cfg.size_max

    def clamped(rng):
        return float(min(max(draw(rng), lo), hi))

    return clamped


def _rng_streams(cfg: SimConfig):
    workload_ss, partition_ss = np.random.SeedSequence(cfg.seed).spawn(2)
    return np.random.default_rng(workload_ss), np.random.default_rng(partition_ss)


def generate_workload(cfg: SimConfig, net: Network | None = None) -> list[TransferRequest]:
    """Poisson arrivals with i.i.d. sizes, sources, and receiver sets.

    Per slot the arrival count is Poisson(λ); each arrival draws, in order,
    its size (clamped to [size_min, size_max]), a uniform source, and
    ``receivers`` distinct nodes uniformly among the non-source nodes.
    Deterministic per (config, seed).
    """
    cfg.validate()
    if net is None:
        net = load_network(cfg)
    if cfg.receivers >= net.num_nodes:
        raise ConfigError(
            f"receivers={cfg.receivers} needs more than {net.num_nodes} nodes"
        )
    rng, _ = _rng_streams(cfg)
    draw_size = _size_sampler(cfg)
    counts = rng.poisson(cfg.arrival_rate, size=cfg.slots)
    nodes = np.arange(net.num_nodes)
    out: list[TransferRequest] = []
    for slot in range(cfg.slots):
        for _ in range(int(counts[slot])):
            volume = draw_size(rng)
            source = int(rng.integers(net.num_nodes))
            pool = nodes[nodes != source]
            recv = rng.choice(pool, size=cfg.receivers, replace=False)
            out.append(TransferRequest(
                rid=len(out), arrival=slot, source=source,
                receivers=tuple(int(r) for r in recv), volume=volume,
            ))
    return out


# ----------------------------------------------------------- event records

@dataclass
class PartitionRecord:
    """One cohort of one request: its tree and when it finished."""

    index: int
    receivers: tuple[int, ...]
    tree: ForwardingTree
    replication_nodes: tuple[int, ...]
    completion_slot: int = -1
    delivered: float = 0.0


@dataclass
class RequestRecord:
    rid: int
    arrival: int
    source: int
    receivers: tuple[int, ...]
    volume: float
    counted: bool  # False for warmup arrivals: simulated, excluded from stats
    single_tree_edges: int  # edge count of the no-partitioning alternative
    partitions: list[PartitionRecord] = field(default_factory=list)

    @property
    def completion_slot(self) -> int:
        return max(p.completion_slot for p in self.partitions)


@dataclass
class EventLog:
    """Everything a finished run exposes to the metrics layer."""

    cfg: SimConfig
    net: Network
    requests: list[RequestRecord]
    edge_delivered: np.ndarray  # cumulative volume per directed edge
    slots_simulated: int  # arrival window plus drain
    max_capacity_gap: float  # worst per-slot (delivered/δ − C_e), ≤ tolerance
    max_load_gap: float  # worst load-ledger mismatch observed

    @property
    def policy(self) -> str:
        return self.cfg.effective_policy()


_GROW = 1024


class _JobPool:
    """Flat, append-only job state shared with the numba kernels."""

    def __init__(self, num_edges: int):
        self.n = 0
        self.start = np.zeros(_GROW, dtype=np.int64)
        self.length = np.zeros(_GROW, dtype=np.int64)
        self.arrival = np.zeros(_GROW, dtype=np.int64)
        self.rid = np.zeros(_GROW, dtype=np.int64)
        self.pidx = np.zeros(_GROW, dtype=np.int64)
        self.residual = np.zeros(_GROW)
        self.volume = np.zeros(_GROW)
        self.delivered = np.zeros(_GROW)
        self.pool = np.zeros(_GROW, dtype=np.int32)
        self.pool_len = 0
        self.scratch = np.zeros(num_edges)

    def _room(self, extra_jobs: int, extra_eids: int) -> None:
        need = self.n + extra_jobs
        if need > self.start.shape[0]:
            size = max(need, 2 * self.start.shape[0])
            for name in ("start", "length", "arrival", "rid", "pidx",
                         "residual", "volume", "delivered"):
                old = getattr(self, name)
                new = np.zeros(size, dtype=old.dtype)
                new[: self.n] = old[: self.n]
                setattr(self, name, new)
        need = self.pool_len + extra_eids
        if need > self.pool.shape[0]:
            size = max(need, 2 * self.pool.shape[0])
            new = np.zeros(size, dtype=np.int32)
            new[: self.pool_len] = self.pool[: self.pool_len]
            self.pool = new

    def add(self, job: PartitionJob, rid: int) -> int:
        # ``rid`` is the dense admission index of the owning request, not the
        # caller-facing request id; admission order is (arrival, request id),
        # so ordering by it is equivalent and keeps per-request grouping O(n).
        eids = job.tree.eids
        self._room(1, eids.size)
        g = self.n
        self.start[g] = self.pool_len
        self.length[g] = eids.size
        self.arrival[g] = job.arrival
        self.rid[g] = rid
        self.pidx[g] = job.index
        self.residual[g] = job.residual
        self.volume[g] = job.residual
        self.pool[self.pool_len : self.pool_len + eids.size] = eids
        self.pool_len += eids.size
        self.n = g + 1
        return g


def _slot_rates(pool: _JobPool, alive: np.ndarray, policy: str,
                capacities: np.ndarray, delta: float) -> np.ndarray:
    """Rates for the alive jobs (aligned with ``alive``) under ``policy``."""
    start = pool.start[alive]
    length = pool.length[alive]
    demand = pool.residual[alive] / delta
    arrival = pool.arrival[alive]
    rid = pool.rid[alive]
    pidx = pool.pidx[alive]
    if policy == "mmf":
        return kn.mmf_rates(start, length, pool.pool, demand,
                            arrival, rid, pidx, capacities)
    if policy == "fcfs":
        order = np.lexsort((pidx, rid, arrival))
    else:  # srpt: whole-request remaining volume first
        per_request = np.bincount(rid, weights=pool.residual[alive])
        order = np.lexsort((pidx, rid, arrival, per_request[rid]))
    return kn.greedy_fill(start, length, pool.pool, demand, order, capacities.copy())


def run(cfg: SimConfig, workload: list[TransferRequest] | None = None,
        net: Network | None = None) -> EventLog:
    """Simulate one configuration to completion and return its event log.

    ``workload`` and ``net`` default to the configured generator/topology;
    passing them pins a fixed scenario (the demo presets do this).
    """
    cfg.validate()
    if net is None:
        net = load_network(cfg)
    _, partition_rng = _rng_streams(cfg)
    if workload is None:
        workload = generate_workload(cfg, net)
    else:
        workload = sorted(workload, key=lambda r: (r.arrival, r.rid))
        if len({r.rid for r in workload}) != len(workload):
            raise ConfigError("injected workload has duplicate request ids")
        for req in workload:
            if not 0 <= req.arrival < cfg.slots:
                raise ConfigError("injected workload arrives outside the slot window")

    n_cohorts, pf_override, _ = SCHEMES[cfg.scheme]
    pf = cfg.pf if pf_override is None else pf_override
    if cfg.scheme == "quickcast":
        n_cohorts = cfg.max_partitions
    policy = cfg.effective_policy()
    uniform = cfg.tree_weighting == "uniform"

    dist = hop_distances(net)
    loads = new_load_map(net)
    capacities = net.capacities
    delta = cfg.delta

    pool = _JobPool(net.num_edges)
    records: list[RequestRecord] = []
    part_record: list[PartitionRecord] = []  # by job id
    edge_delivered = np.zeros(net.num_edges)
    slot_edge_volume = np.zeros(net.num_edges)

    alive = np.empty(0, dtype=np.int64)
    next_req = 0
    cap_tol = 1e-9 * max(1.0, float(capacities.max()))
    max_cap_gap = 0.0
    max_load_gap = 0.0

    slot = 0
    hard_stop = None
    while True:
        arrivals_open = slot < cfg.slots
        if not arrivals_open and alive.size == 0 and next_req >= len(workload):
            break
        if hard_stop is not None and slot > hard_stop:
            raise InvariantError(f"run failed to drain by slot {slot}")

        # 1. admissions: choose cohorts + trees, book load; active next slot
        fresh: list[int] = []
        while next_req < len(workload) and workload[next_req].arrival == slot:
            req = workload[next_req]
            next_req += 1
            jobs, single = submit_detail(
                req, n_cohorts, pf, net, loads, dist,
                strategy=cfg.partition_strategy, rng=partition_rng,
                uniform_weights=uniform,
            )
            dense_rid = len(records)
            rec = RequestRecord(
                rid=req.rid, arrival=req.arrival, source=req.source,
                receivers=req.receivers, volume=req.volume,
                counted=req.arrival >= cfg.warmup,
                single_tree_edges=int(single.eids.size),
            )
            for job in jobs:
                g = pool.add(job, dense_rid)
                pr = PartitionRecord(
                    index=job.index, receivers=job.receivers, tree=job.tree,
                    replication_nodes=tuple(job.tree.replication_nodes()),
                )
                rec.partitions.append(pr)
                part_record.append(pr)
                fresh.append(g)
            records.append(rec)

        # 2-3. dispatch over previously admitted jobs, then deliver
        if alive.size:
            rates = _slot_rates(pool, alive, policy, capacities, delta)
            delivered = np.minimum(rates * delta, pool.residual[alive])
            slot_edge_volume[:] = 0.0
            kn.apply_delivery(alive, pool.start, pool.length, pool.pool,
                              delivered, loads, edge_delivered, slot_edge_volume)
            gap = float((slot_edge_volume / delta - capacities).max())
            max_cap_gap = max(max_cap_gap, gap)
            if gap > cap_tol:
                raise InvariantError(
                    f"slot {slot}: edge over capacity by {gap:.3e}"
                )
            pool.residual[alive] -= delivered
            pool.delivered[alive] += delivered

            resid = pool.residual[alive]
            snap = resid <= 1e-12 * np.maximum(1.0, pool.volume[alive])
            if snap.any():
                finished = alive[snap]
                for g in finished:
                    # release the sub-tolerance leftover from the ledger too,
                    # so booked load stays exactly the sum of residuals
                    leftover = float(pool.residual[g])
                    if leftover:
                        s, ln = pool.start[g], pool.length[g]
                        loads[pool.pool[s : s + ln]] -= leftover
                    pool.residual[g] = 0.0
                    pr = part_record[g]
                    pr.completion_slot = slot
                    pr.delivered = float(pool.delivered[g])
                    err = abs(pr.delivered - pool.volume[g])
                    if err > 1e-6 * max(1.0, pool.volume[g]):
                        raise InvariantError(
                            f"slot {slot}: partition delivered {pr.delivered}"
                            f" != volume {pool.volume[g]} (err {err:.3e})"
                        )
                alive = alive[~snap]
            elif float(delivered.sum()) <= 0.0:
                raise InvariantError(f"slot {slot}: active jobs but no progress")

        if fresh:
            alive = np.concatenate([alive, np.asarray(fresh, dtype=np.int64)])

        # ledger check: booked load == outstanding residuals, every slot
        gap = kn.load_identity_gap(alive, pool.start, pool.length, pool.pool,
                                   pool.residual, loads, pool.scratch)
        max_load_gap = max(max_load_gap, float(gap))
        backlog = float(pool.residual[alive].sum()) if alive.size else 0.0
        if gap > 1e-6 * max(1.0, backlog):
            raise InvariantError(f"slot {slot}: load ledger off by {gap:.3e}")

        if hard_stop is None and slot + 1 >= cfg.slots:
            # Arrivals are over.  Every policy here makes strictly positive
            # progress per slot (at least the smallest edge capacity in
            # aggregate, or a job completes), so the drain is bounded by
            # backlog / (min capacity × δ) plus one slot per live job.
            min_cap = float(capacities.min())
            hard_stop = slot + 10 + alive.size + int(2.0 * backlog / (min_cap * delta))
        slot += 1

    total = float(np.abs(loads).max()) if loads.size else 0.0
    if total > 1e-6:
        raise InvariantError(f"load ledger not empty after drain: {total:.3e}")
    for rec in records:
        for pr in rec.partitions:
            if pr.completion_slot < 0:
                raise InvariantError(f"request {rec.rid} cohort {pr.index} never finished")
            if pr.completion_slot < rec.arrival + 1:
                raise InvariantError("completion before first eligible slot")

    return EventLog(cfg=cfg, net=net, requests=records,
                    edge_delivered=edge_delivered, slots_simulated=slot,
                    max_capacity_gap=max_cap_gap, max_load_gap=max_load_gap)
