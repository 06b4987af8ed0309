"""Experiment harness: run scenario points, sweep seeds, emit CSV/JSON.

Two subcommands::

    treecast run   (--config PATH | --preset NAME) [--seed N] [--out DIR]
                   [--override key=value ...]
    treecast sweep (--config PATH | --preset NAME) --seeds A..B [--out DIR]
                   [--override key=value ...] [--workers K]

``run`` executes every point of the chosen scenario at one seed and writes a
CSV summary plus a JSON document with the underlying distributions.  ``sweep``
repeats the points across a seed range and appends one aggregate (mean) row
per point.  Output bytes are deterministic for a given command line: the CSV's
``runtime_ms`` column is fixed at 0, and measured wall-clock times go to the
JSON and stdout instead.

Exit codes: 0 success, 1 configuration problems, 2 a run or its bookkeeping
failed an internal consistency check.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass
from multiprocessing import Pool
from pathlib import Path
from typing import Callable

from .cohort import TransferRequest
from .engine import (
    ConfigError,
    InvariantError,
    SimConfig,
    load_config,
    load_network,
    run,
)
from .netgraph import Network
from .metrics import (
    MetricsError,
    build_report,
    csv_row,
    json_document,
    write_csv,
    write_json,
)

__all__ = ["PRESETS", "ExperimentPreset", "main"]


WorkloadFactory = Callable[[SimConfig, Network], list[TransferRequest]]


@dataclass(frozen=True)
class ExperimentPreset:
    """A named bundle of config points (deltas over defaults) to compare."""

    name: str
    points: tuple[dict[str, str], ...]
    axes: tuple[str, ...]  # which keys vary across the points
    workload: WorkloadFactory | None = None  # None -> generated workload


def _contended_pair(cfg: SimConfig, net: Network) -> list[TransferRequest]:
    # The bundled weakest-link scenario: two same-slot transfers of equal
    # volume; the 1 -> {6,7,8} transfer competes for the 2-3 trunk but can
    # reach 7 and 8 directly, so splitting frees those two receivers.
    volume = 5.0
    return [
        TransferRequest(rid=0, arrival=0, source=0, receivers=(4, 5), volume=volume),
        TransferRequest(rid=1, arrival=0, source=1, receivers=(6, 7, 8), volume=volume),
    ]


def _pts(base: dict[str, str], axes: list[dict[str, str]]) -> tuple[dict[str, str], ...]:
    return tuple({**base, **ax} for ax in axes)


def _build_presets() -> dict[str, ExperimentPreset]:
    presets = {}

    base = {"topology": "weakest_link", "receivers": "3", "slots": "1", "warmup": "0"}
    presets["fig1"] = ExperimentPreset(
        name="fig1",
        points=_pts(base, [{"scheme": "dccast"}, {"scheme": "quickcast_two"}]),
        axes=("scheme",),
        workload=_contended_pair,
    )

    base = {"topology": "random:50,150", "lambda": "1.0", "size_dist": "exponential",
            "size_mean": "20", "slots": "5000", "warmup": "500"}
    presets["fig2"] = ExperimentPreset(
        name="fig2",
        points=_pts(base, [
            {"scheme": "dccast", "receivers": "10"},
            {"scheme": "quickcast_two", "policy": "fcfs", "receivers": "10"},
            {"scheme": "dccast", "receivers": "20"},
            {"scheme": "quickcast_two", "policy": "fcfs", "receivers": "20"},
        ]),
        axes=("scheme", "receivers"),
    )

    # single-tree selection with the policy varied, per the original
    # scheduling-policy comparison (trees held fixed across policies)
    base = {"topology": "random:50,150", "scheme": "quickcast_np", "lambda": "1.0",
            "size_dist": "pareto", "slots": "1000", "warmup": "100"}
    presets["policies"] = ExperimentPreset(
        name="policies",
        points=_pts(base, [
            {"policy": policy, "receivers": n}
            for n in ("5", "10", "20") for policy in ("fcfs", "srpt", "mmf")
        ]),
        axes=("policy", "receivers"),
    )

    base = {"topology": "gscale", "lambda": "1.0", "receivers": "10",
            "slots": "1000", "warmup": "100"}
    presets["partitioning"] = ExperimentPreset(
        name="partitioning",
        points=_pts(base, [
            {"scheme": "quickcast"},
            {"scheme": "quickcast_np"},
            {"scheme": "quickcast_two"},
        ]),
        axes=("scheme",),
    )

    base = {"topology": "gscale", "lambda": "1.0", "receivers": "8",
            "slots": "500", "warmup": "50"}
    presets["bw-partitioning"] = ExperimentPreset(
        name="bw-partitioning",
        points=_pts(base, [
            {"scheme": "quickcast_two", "partition_strategy": "proximity"},
            {"scheme": "quickcast_two", "partition_strategy": "random"},
            {"scheme": "quickcast_two", "partition_strategy": "source_distance"},
            # bandwidth floor: one minimal-edge tree per transfer, no split
            {"scheme": "quickcast_np", "tree_weighting": "uniform"},
        ]),
        axes=("scheme", "partition_strategy", "tree_weighting"),
    )

    # skewed sizes (lognormal, sigma 2) mirror real analytics-traffic traces
    base = {"topology": "gscale", "receivers": "10",
            "size_dist": "lognormal", "size_sigma": "2.0"}
    presets["qc-vs-dccast"] = ExperimentPreset(
        name="qc-vs-dccast",
        points=_pts(base, [
            {"scheme": scheme, "lambda": lam, "slots": slots, "warmup": warm}
            for lam, slots, warm in (("0.01", "20000", "2000"), ("1.0", "2000", "200"))
            for scheme in ("quickcast", "dccast")
        ]),
        axes=("scheme", "lambda"),
    )

    base = {"topology": "gscale", "size_dist": "lognormal", "size_sigma": "2.0"}
    presets["copies"] = ExperimentPreset(
        name="copies",
        points=_pts(base, [
            {"scheme": scheme, "receivers": str(n), "lambda": lam,
             "slots": slots, "warmup": warm}
            for lam, slots, warm in (("0.01", "5000", "500"), ("0.1", "2000", "200"))
            for n in range(2, 11)
            for scheme in ("quickcast", "dccast")
        ]),
        axes=("scheme", "receivers", "lambda"),
    )
    return presets


PRESETS = _build_presets()

_MEAN_COLS = ("mean_ct", "p99_ct", "max_ct", "total_bytes",
              "bw_overhead_vs_single_tree", "max_group_entries")


def _parse_overrides(items: list[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--override expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _parse_seeds(text: str) -> list[int]:
    lo, sep, hi = text.partition("..")
    try:
        if sep:
            seeds = list(range(int(lo), int(hi) + 1))
        else:
            seeds = [int(text)]
    except ValueError as exc:
        raise ConfigError(f"--seeds expects N or A..B, got {text!r}") from exc
    if not seeds or seeds[0] < 0:
        raise ConfigError(f"--seeds range {text!r} is empty or negative")
    return seeds


def _scenario(ns) -> tuple[str, list[dict[str, str]], WorkloadFactory | None]:
    """(label, point deltas, workload factory) for --preset or --config."""
    if ns.preset is not None:
        preset = PRESETS.get(ns.preset)
        if preset is None:
            known = ", ".join(sorted(PRESETS))
            raise ConfigError(f"unknown preset {ns.preset!r} (have: {known})")
        return preset.name, list(preset.points), preset.workload
    point = load_config(ns.config)  # validates early, before any sweep work
    del point
    return Path(ns.config).stem, [{}], None


def _point_config(ns, deltas: dict[str, str], seed: int) -> SimConfig:
    cfg = SimConfig() if ns.preset is not None else load_config(ns.config)
    merged = dict(deltas)
    merged.update(_parse_overrides(ns.override))
    merged["seed"] = str(seed)
    return cfg.with_overrides(merged)


def _execute(cfg: SimConfig, factory: WorkloadFactory | None):
    net = load_network(cfg)
    workload = factory(cfg, net) if factory is not None else None
    started = time.perf_counter()
    log = run(cfg, workload=workload, net=net)
    wall_ms = int(round(1000.0 * (time.perf_counter() - started)))
    return log, build_report(log), wall_ms


def _sweep_task(task):
    """One (point, seed) execution; module-level so worker pools can load it."""
    ns, deltas, factory, label, seed = task
    cfg = _point_config(ns, deltas, seed)
    log, report, _ = _execute(cfg, factory)
    return csv_row(log, report, preset=label, runtime_ms=0)


def _aggregate_row(rows: list[dict[str, object]]) -> dict[str, object]:
    out = dict(rows[0])
    out["seed"] = "mean"
    for col in _MEAN_COLS:
        out[col] = sum(float(r[col]) for r in rows) / len(rows)
    out["runtime_ms"] = 0
    return out


def _out_dir(ns) -> Path:
    out = Path(ns.out if ns.out is not None else os.environ.get("TREECAST_OUT", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_run(ns) -> int:
    label, points, factory = _scenario(ns)
    out = _out_dir(ns)
    rows, docs = [], []
    for deltas in points:
        cfg = _point_config(ns, deltas, ns.seed)
        log, report, wall_ms = _execute(cfg, factory)
        rows.append(csv_row(log, report, preset=label, runtime_ms=0))
        docs.append(json_document(log, report, preset=label, runtime_ms=wall_ms))
        print(f"{cfg.scheme}/{log.policy} lambda={cfg.arrival_rate:g} "
              f"N={cfg.receivers}: mean_ct={report.mean_ct:.3f} "
              f"p99={report.p99_ct:.3f} max={report.max_ct:.3f} "
              f"({wall_ms} ms)")
        if factory is not None:
            for rec in log.requests:
                for p in rec.partitions:
                    print(f"  transfer {rec.rid} -> {p.receivers}: "
                          f"done at slot {p.completion_slot}")
    csv_path = out / f"{label}_seed{ns.seed}.csv"
    json_path = out / f"{label}_seed{ns.seed}.json"
    write_csv(csv_path, rows)
    write_json(json_path, {"runs": docs})
    print(f"wrote {csv_path} and {json_path}")
    return 0


def _cmd_sweep(ns) -> int:
    label, points, factory = _scenario(ns)
    seeds = _parse_seeds(ns.seeds)
    if ns.workers < 1:
        raise ConfigError("--workers must be >= 1")
    out = _out_dir(ns)
    tasks = [(ns, deltas, factory, label, seed)
             for deltas in points for seed in seeds]
    if ns.workers == 1:
        results = [_sweep_task(t) for t in tasks]
    else:
        with Pool(ns.workers) as pool:
            results = pool.map(_sweep_task, tasks)
    rows = []
    for i in range(0, len(results), len(seeds)):
        block = results[i : i + len(seeds)]
        rows.extend(block)
        rows.append(_aggregate_row(block))
    csv_path = out / f"{label}_sweep.csv"
    write_csv(csv_path, rows)
    print(f"wrote {csv_path} ({len(rows)} rows: {len(points)} points x "
          f"{len(seeds)} seeds + aggregates)")
    return 0


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treecast",
        description="Run bulk-multicast transfer simulations and export results.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        grp = p.add_mutually_exclusive_group(required=True)
        grp.add_argument("--config", help="config file of key = value lines")
        grp.add_argument("--preset", help=f"one of: {', '.join(sorted(PRESETS))}")
        p.add_argument("--out", default=None,
                       help="output directory (default: $TREECAST_OUT or .)")
        p.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE", help="config override, repeatable")

    p_run = sub.add_parser("run", help="run every point of one scenario at one seed")
    common(p_run)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="repeat a scenario across seeds")
    common(p_sweep)
    p_sweep.add_argument("--seeds", required=True, metavar="A..B",
                         help="seed range A..B (inclusive) or a single seed")
    p_sweep.add_argument("--workers", type=int, default=1,
                         help="parallel worker processes (results are "
                              "byte-identical regardless)")
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    ns = _parser().parse_args(argv)
    try:
        return ns.func(ns)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InvariantError, MetricsError) as exc:
        print(f"consistency check failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
