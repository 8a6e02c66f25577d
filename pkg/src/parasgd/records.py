"""
CSV and manifest files written by the commands.

trace.csv / tau.csv / scaling.csv
    scheme,K,tau,b,round,serial_iters,parallel_iters,sim_time,accuracy
heatmap.csv
    K,tau,N_a,M_a,speedup,reached      (M_a = inf and empty speedup when not reached)
overhead.csv
    S,naive_speedup,sparknet_speedup,best_tau
scaling_summary.csv
    scheme,K,time_to_target,speedup

Floats are written with repr(), which reads back to the identical value.
"""

import csv
import json
import os
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from parasgd.analysis import OverheadPoint, ScalingRow, SweepGrid
from parasgd.models import EvalRecord, RunTrace, Scheme

TRACE_COLUMNS = (
    "scheme",
    "K",
    "tau",
    "b",
    "round",
    "serial_iters",
    "parallel_iters",
    "sim_time",
    "accuracy",
)
HEATMAP_COLUMNS = ("K", "tau", "N_a", "M_a", "speedup", "reached")
OVERHEAD_COLUMNS = ("S", "naive_speedup", "sparknet_speedup", "best_tau")
SCALING_COLUMNS = ("scheme", "K", "time_to_target", "speedup")


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_rows(path: str, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def trace_rows(trace: RunTrace) -> List[Tuple[Any, ...]]:
    return [
        (
            trace.scheme.value,
            trace.workers,
            trace.tau,
            trace.batch_size,
            r.round,
            r.serial_iters,
            r.parallel_iters,
            r.sim_time,
            r.accuracy,
        )
        for r in trace.records
    ]


def write_trace_csv(traces: Sequence[RunTrace], path: str) -> None:
    _write_rows(path, TRACE_COLUMNS, (row for trace in traces for row in trace_rows(trace)))


def read_trace_csv(path: str) -> List[RunTrace]:
    """Traces in order of first appearance, one per (scheme, K, tau, b)"""
    grouped: Dict[Tuple[str, int, int, int], List[EvalRecord]] = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise ValueError(f"{path}: expected columns {','.join(TRACE_COLUMNS)}")
        for row in reader:
            key = (row["scheme"], int(row["K"]), int(row["tau"]), int(row["b"]))
            grouped.setdefault(key, []).append(
                EvalRecord(
                    round=int(row["round"]),
                    serial_iters=int(row["serial_iters"]),
                    parallel_iters=int(row["parallel_iters"]),
                    sim_time=float(row["sim_time"]),
                    accuracy=float(row["accuracy"]),
                )
            )
    return [
        RunTrace(
            scheme=Scheme(scheme), workers=K, tau=tau, batch_size=b, records=tuple(records)
        )
        for (scheme, K, tau, b), records in grouped.items()
    ]


def write_heatmap_csv(grid: SweepGrid, path: str) -> None:
    rows = []
    for K in grid.workers:
        for tau in grid.taus:
            point = grid.cell(K, tau)
            M_a = point.M_a if point.reached else "inf"
            rows.append((K, tau, point.N_a, M_a, point.speedup, point.reached))
    _write_rows(path, HEATMAP_COLUMNS, rows)


def write_overhead_csv(points: Sequence[OverheadPoint], path: str) -> None:
    _write_rows(
        path,
        OVERHEAD_COLUMNS,
        ((p.S, p.naive_speedup, p.sparknet_speedup, p.best_tau) for p in points),
    )


def write_scaling_csv(rows: Sequence[ScalingRow], path: str) -> None:
    _write_rows(
        path,
        SCALING_COLUMNS,
        ((r.scheme.value, r.K, r.time_to_target, r.speedup) for r in rows),
    )


def write_manifest(
    path: str,
    command: str,
    config: Mapping[str, Any],
    results: Optional[Mapping[str, Any]] = None,
) -> None:
    """Sorted, indented JSON; no timestamps, so reruns give identical bytes"""
    content = {"command": command, "config": dict(config), "results": dict(results or {})}
    with open(path, "w") as f:
        json.dump(content, f, indent=2, sort_keys=True)
        f.write("\n")


def read_manifest(path: str) -> Dict[str, Any]:
    with open(path) as f:
        return json.load(f)


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
