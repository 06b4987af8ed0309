"""Statistics over finished runs: completion times, bandwidth, group tables.

Everything here is pure post-processing of an :class:`~treecast.engine.EventLog`;
nothing mutates the log.  The module also owns the on-disk result formats: a
flat CSV (one row per run, stable column set) and a JSON document carrying the
raw distributions behind the summary numbers.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .engine import EventLog

__all__ = [
    "CSV_COLUMNS",
    "GroupTableUsage",
    "MetricsError",
    "MetricsReport",
    "bandwidth_usage",
    "build_report",
    "bw_overhead_vs_single_tree",
    "completion_stats",
    "csv_row",
    "format_csv",
    "group_table_usage",
    "json_document",
    "mean_edge_utilization",
    "write_csv",
    "write_json",
]


class MetricsError(ValueError):
    """Raised for logs that cannot be summarized (incomplete, empty window)."""


def _check_complete(log: EventLog) -> None:
    for rec in log.requests:
        for p in rec.partitions:
            if p.completion_slot < 0:
                raise MetricsError(f"request {rec.rid} cohort {p.index} incomplete")


def _receiver_times(log: EventLog) -> np.ndarray:
    """Completion time of every post-warmup receiver, one entry each."""
    out: list[int] = []
    for rec in log.requests:
        if not rec.counted:
            continue
        for p in rec.partitions:
            out.extend([p.completion_slot - rec.arrival] * len(p.receivers))
    return np.asarray(out, dtype=np.int64)


def completion_stats(log: EventLog) -> tuple[float, float, float]:
    """(mean, 99th percentile, max) completion time per post-warmup receiver."""
    _check_complete(log)
    times = _receiver_times(log)
    if times.size == 0:
        raise MetricsError("no post-warmup receivers to summarize")
    return float(times.mean()), float(np.percentile(times, 99)), float(times.max())


def bandwidth_usage(log: EventLog, *, counted_only: bool = False) -> float:
    """Total volume-hops: Σ over requests of volume × total tree edges.

    With ``counted_only=False`` the figure covers the whole run and is
    cross-checked against the per-edge delivery ledger (double-entry); a
    mismatch beyond 1e-6 (scaled) raises :class:`MetricsError`.
    """
    _check_complete(log)
    total = math.fsum(  # fsum: exact, hence independent of record order
        rec.volume * sum(p.tree.eids.size for p in rec.partitions)
        for rec in log.requests if rec.counted or not counted_only
    )
    if not counted_only:
        ledger = float(log.edge_delivered.sum())
        if abs(total - ledger) > 1e-6 * max(1.0, total):
            raise MetricsError(
                f"bandwidth ledgers disagree: booked {total!r}, delivered {ledger!r}"
            )
    return total


def bw_overhead_vs_single_tree(log: EventLog) -> float:
    """Ratio of volume-hops used vs the single-tree (no split) alternative.

    Both sides are summed over post-warmup requests.  1.0 means the run used
    exactly the bandwidth a minimal single tree per request would have.
    """
    _check_complete(log)
    used = bandwidth_usage(log, counted_only=True)
    floor = math.fsum(rec.volume * rec.single_tree_edges
                      for rec in log.requests if rec.counted)
    if floor <= 0:
        raise MetricsError("no post-warmup requests to compare")
    return used / floor


@dataclass(frozen=True)
class GroupTableUsage:
    """Replication (group-table) entries required per switch."""

    per_node: tuple[int, ...]  # max simultaneous entries, by node id
    network_max: int
    mean_per_node: float


def group_table_usage(log: EventLog) -> GroupTableUsage:
    """Worst-case simultaneous replication entries at each node.

    A tree occupies one entry at every node where it forwards to two or more
    next hops, for every slot in which the cohort is in the system (arrival
    through completion).  Warmup traffic occupies switches like any other, so
    all requests count here.
    """
    _check_complete(log)
    n = log.net.num_nodes
    width = log.slots_simulated + 1
    diff = np.zeros((n, width + 1), dtype=np.int32)
    for rec in log.requests:
        for p in rec.partitions:
            for node in p.replication_nodes:
                diff[node, rec.arrival] += 1
                diff[node, p.completion_slot + 1] -= 1
    per_node = diff.cumsum(axis=1).max(axis=1) if width else np.zeros(n, np.int32)
    per_node = np.maximum(per_node, 0)
    return GroupTableUsage(
        per_node=tuple(int(x) for x in per_node),
        network_max=int(per_node.max()) if n else 0,
        mean_per_node=float(per_node.mean()) if n else 0.0,
    )


def mean_edge_utilization(log: EventLog) -> float:
    """Delivered volume over capacity × δ × slots, averaged across edges."""
    slots = log.slots_simulated
    if slots == 0:
        return 0.0
    frac = log.edge_delivered / (log.net.capacities * log.cfg.delta * slots)
    return float(frac.mean())


@dataclass(frozen=True)
class MetricsReport:
    """The summary block every run emits (CSV row / JSON `summary`)."""

    mean_ct: float
    p99_ct: float
    max_ct: float
    total_bytes: float  # volume-hops over post-warmup requests
    bw_overhead_vs_single_tree: float
    max_group_entries: int
    mean_group_entries: float
    mean_edge_utilization: float


def build_report(log: EventLog) -> MetricsReport:
    mean_ct, p99_ct, max_ct = completion_stats(log)
    if not mean_ct <= p99_ct + 1e-12 or not p99_ct <= max_ct + 1e-12:
        raise MetricsError("completion statistics out of order")
    groups = group_table_usage(log)
    return MetricsReport(
        mean_ct=mean_ct,
        p99_ct=p99_ct,
        max_ct=max_ct,
        total_bytes=bandwidth_usage(log, counted_only=True),
        bw_overhead_vs_single_tree=bw_overhead_vs_single_tree(log),
        max_group_entries=groups.network_max,
        mean_group_entries=groups.mean_per_node,
        mean_edge_utilization=mean_edge_utilization(log),
    )


# --------------------------------------------------------------- flat files

CSV_COLUMNS = (
    "preset", "scheme", "policy", "lambda", "receivers", "pf", "seed",
    "mean_ct", "p99_ct", "max_ct", "total_bytes",
    "bw_overhead_vs_single_tree", "max_group_entries", "runtime_ms",
)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)  # shortest round-trip form; deterministic
    return str(value)


def csv_row(log: EventLog, report: MetricsReport, *, preset: str,
            runtime_ms: int) -> dict[str, object]:
    cfg = log.cfg
    return {
        "preset": preset,
        "scheme": cfg.scheme,
        "policy": log.policy,
        "lambda": cfg.arrival_rate,
        "receivers": cfg.receivers,
        "pf": cfg.pf,
        "seed": cfg.seed,
        "mean_ct": report.mean_ct,
        "p99_ct": report.p99_ct,
        "max_ct": report.max_ct,
        "total_bytes": report.total_bytes,
        "bw_overhead_vs_single_tree": report.bw_overhead_vs_single_tree,
        "max_group_entries": report.max_group_entries,
        "runtime_ms": runtime_ms,
    }


def format_csv(rows: list[dict[str, object]]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        if set(row) != set(CSV_COLUMNS):
            raise MetricsError(f"row keys {sorted(row)} do not match the schema")
        lines.append(",".join(_fmt(row[col]) for col in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def write_csv(path, rows: list[dict[str, object]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_csv(rows))


def json_document(log: EventLog, report: MetricsReport, *, preset: str,
                  runtime_ms: int) -> dict:
    """Summary plus the distributions behind it (per-receiver times, group
    tables, edge utilization) and a per-request completion table."""
    groups = group_table_usage(log)
    slots = max(log.slots_simulated, 1)
    util = log.edge_delivered / (log.net.capacities * log.cfg.delta * slots)
    return {
        "preset": preset,
        "seed": log.cfg.seed,
        "runtime_ms": runtime_ms,
        "config": asdict(log.cfg),
        "policy": log.policy,
        "slots_simulated": log.slots_simulated,
        "summary": asdict(report),
        "distributions": {
            "receiver_completion_times": [int(t) for t in _receiver_times(log)],
            "group_table_max_per_node": list(groups.per_node),
            "edge_utilization": [float(u) for u in util],
        },
        "requests": [
            {
                "rid": rec.rid,
                "arrival": rec.arrival,
                "source": rec.source,
                "volume": rec.volume,
                "counted": rec.counted,
                "completion_slot": rec.completion_slot,
                "partitions": [
                    {
                        "receivers": list(p.receivers),
                        "completion_slot": p.completion_slot,
                        "tree_edges": int(p.tree.eids.size),
                    }
                    for p in rec.partitions
                ],
            }
            for rec in log.requests
        ],
    }


def write_json(path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
