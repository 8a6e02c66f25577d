"""
Speedup formulas, N_a / M_a extraction and the sweep drivers.

Serial SGD needs N_a iterations to reach accuracy a, taking N_a * C_b;
SparkNet needs M_a rounds of (tau * C_b + S). Every speedup below is a
ratio of those two wall-clock times.
"""

import logging
import math
import statistics
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

from parasgd.models import CostModel, RunTrace, Scheme
from parasgd.schemes import Workload, map_workers, run_serial, run_sparknet

logger = logging.getLogger(__name__)

DEFAULT_TAU_SET = (1, 2, 5, 10, 25, 100, 500, 1000, 2500)
DEFAULT_OVERHEAD_SET = (0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0)

UNREACHED = math.inf

Cell = Tuple[int, int]


class BaselineError(RuntimeError):
    pass


def naive_speedup(C_b: float, K: int, S: float, gamma: float = 1.0) -> float:
    """C(b) / (C(b/K) + S); with gamma=1 this is C_b / (C_b / K + S) <= C_b / S"""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if S == 0:
        # C_b cancels; exactly K when gamma=1
        return float(K) ** gamma
    return C_b / CostModel(C_b, S, gamma).naive_iteration_cost(K)


def sparknet_speedup(N_a: float, C_b: float, tau: int, S: float, M_a: float) -> float:
    """N_a C(b) / ((tau C(b) + S) M_a)"""
    if N_a <= 0 or C_b <= 0 or tau < 1 or S < 0 or M_a <= 0:
        raise ValueError(
            f"sparknet_speedup needs positive inputs, got N_a={N_a}, C_b={C_b}, "
            f"tau={tau}, S={S}, M_a={M_a}"
        )
    return N_a * C_b / ((tau * C_b + S) * M_a)


def zero_overhead_speedup(N_a: float, tau: int, M_a: float) -> float:
    return N_a / (tau * M_a)


def best_tau_speedup(
    records: Sequence[Tuple[int, float]], N_a: float, C_b: float, S: float
) -> Tuple[int, float]:
    """
    Maximize sparknet_speedup over (tau, M_a) records; ties go to the smaller tau.
    Records that never reached the target (M_a infinite or None) are skipped.
    """
    if not records:
        raise ValueError("best_tau_speedup needs at least one (tau, M_a) record")
    best: Optional[Tuple[int, float]] = None
    for tau, M_a in sorted(records, key=lambda r: r[0]):
        if M_a is None or math.isinf(M_a):
            continue
        speedup = sparknet_speedup(N_a, C_b, tau, S, M_a)
        if best is None or speedup > best[1]:
            best = (tau, speedup)
    if best is None:
        raise ValueError("No tau reached the target accuracy")
    return best


def serial_wallclock(N: int, C_b: float) -> float:
    return 0.0 + N * C_b


def naive_wallclock(N: int, C_b: float, K: int, S: float, gamma: float = 1.0) -> float:
    return 0.0 + N * CostModel(C_b, S, gamma).naive_iteration_cost(K)


def sparknet_wallclock(M: int, tau: int, C_b: float, S: float, warm_start: int = 0) -> float:
    return 0.0 + warm_start * C_b + M * (tau * C_b + S)


def suggest_tau(C_b: float, S: float, multiple: int = 5) -> int:
    """
    Rounds of `multiple * S / C_b` local steps spend at most 1 / (multiple + 1)
    of their time communicating.
    """
    if C_b <= 0 or S < 0 or multiple < 1:
        raise ValueError(f"Need C_b > 0, S >= 0, multiple >= 1 (got {C_b}, {S}, {multiple})")
    return max(1, math.ceil(multiple * S / C_b))


def time_to_accuracy(trace: RunTrace, target: float) -> Optional[float]:
    return trace.time_to(target)


def measured_speedup(baseline: RunTrace, trace: RunTrace, target: float) -> Optional[float]:
    """Ratio of simulated times to first reach `target`; None if either never does"""
    base_time = time_to_accuracy(baseline, target)
    time = time_to_accuracy(trace, target)
    if base_time is None or time is None:
        return None
    return base_time / time


def accuracy_at(trace: RunTrace, iterations: int) -> float:
    """Accuracy of the last evaluation at or before `iterations` serial iterations"""
    reached = [r for r in trace.records if r.serial_iters <= iterations]
    if not reached:
        raise BaselineError(f"No evaluation at or before {iterations} iterations")
    return reached[-1].accuracy


def rounds_for(parallel_budget: int, tau: int) -> int:
    """Round budget covering `parallel_budget` local steps per worker"""
    return max(1, math.ceil(parallel_budget / tau))


@dataclass(frozen=True)
class SpeedupPoint:
    """
    One measured cell, with every input needed to recompute its speedup.

    M_a is None for the naive scheme and infinite for a SparkNet run that
    never reached the target.
    """

    K: int
    tau: int
    S: float
    C_b: float
    N_a: int
    M_a: Optional[float] = None

    @property
    def reached(self) -> bool:
        return self.M_a is None or not math.isinf(self.M_a)

    @property
    def speedup(self) -> Optional[float]:
        if self.M_a is None:
            return naive_speedup(self.C_b, self.K, self.S)
        if math.isinf(self.M_a):
            return None
        return sparknet_speedup(self.N_a, self.C_b, self.tau, self.S, self.M_a)


@dataclass(frozen=True)
class SweepGrid:
    workers: Tuple[int, ...]
    taus: Tuple[int, ...]
    points: Dict[Cell, SpeedupPoint]
    N_a: int
    target: float

    def __post_init__(self) -> None:
        missing = [
            (K, tau) for K in self.workers for tau in self.taus if (K, tau) not in self.points
        ]
        if missing:
            raise ValueError(f"SweepGrid has holes at {missing}")

    def cell(self, K: int, tau: int) -> SpeedupPoint:
        return self.points[(K, tau)]

    def row(self, K: int) -> List[Tuple[int, float]]:
        """(tau, M_a) pairs for one worker count"""
        return [(tau, self.points[(K, tau)].M_a or UNREACHED) for tau in self.taus]

    def matrix(self) -> List[List[Optional[float]]]:
        return [[self.cell(K, tau).speedup for tau in self.taus] for K in self.workers]


@dataclass(frozen=True)
class OverheadPoint:
    S: float
    K: int
    naive_speedup: float
    sparknet_speedup: Optional[float]
    best_tau: Optional[int]


@dataclass(frozen=True)
class ScalingRow:
    scheme: Scheme
    K: int
    time_to_target: Optional[float]
    speedup: Optional[float]


def serial_baseline(
    workload: Workload,
    target: float,
    iter_budget: int,
    eval_every: int,
    cost: CostModel = CostModel(),
) -> Tuple[RunTrace, int]:
    """Serial run to the target; returns (trace, N_a)"""
    trace = run_serial(workload, iter_budget, eval_every, target, cost)
    N_a = trace.iterations_to(target)
    if N_a is None:
        best = max((r.accuracy for r in trace.records), default=0.0)
        raise BaselineError(
            f"Serial baseline did not reach accuracy {target} within {iter_budget} "
            f"iterations (best {best:.4f}); lower the target or raise the budget"
        )
    logger.info("Serial baseline: N_a=%d for target %s", N_a, target)
    return trace, N_a


def calibrate_target(
    workload: Workload, iterations: int, eval_every: int, cost: CostModel = CostModel()
) -> float:
    """The accuracy a serial run shows after `iterations` iterations"""
    trace = run_serial(workload, iterations, eval_every, None, cost, stop_at_target=False)
    target = accuracy_at(trace, iterations)
    logger.info("Calibrated target accuracy %.4f at %d serial iterations", target, iterations)
    return target


def _run_cells(workload: Workload, cells: Sequence[Cell], run_cell, threads: int):
    # cells share nothing; results are keyed by coordinates
    inner = replace(workload, threads=1) if threads > 1 else workload
    results = map_workers(lambda cell: run_cell(inner, cell), cells, threads)
    return dict(zip(cells, results))


def sweep_heatmap(
    workload: Workload,
    workers: Sequence[int],
    taus: Sequence[int],
    target: float,
    parallel_budget: int,
    baseline_budget: int,
    eval_every: int,
    warm_start: int = 50,
    threads: int = 1,
    baseline: Optional[Tuple[RunTrace, int]] = None,
) -> Tuple[SweepGrid, RunTrace]:
    """
    One SparkNet run per (K, tau) cell, scored with the zero-overhead
    speedup N_a / (tau * M_a). Cells that exhaust their budget keep
    M_a = inf instead of a zero.
    """
    if not workers or not taus:
        raise ValueError("Heatmap needs at least one K and one tau")
    baseline_trace, N_a = baseline or serial_baseline(
        workload, target, baseline_budget, eval_every
    )
    cost = CostModel(C_b=1.0, S=0.0)

    def run_cell(cell_workload: Workload, cell: Cell) -> SpeedupPoint:
        K, tau = cell
        trace = run_sparknet(
            cell_workload, K, tau, rounds_for(parallel_budget, tau), target, cost, warm_start
        )
        M_a = trace.rounds_to(target)
        point = SpeedupPoint(
            K=K, tau=tau, S=0.0, C_b=1.0, N_a=N_a, M_a=UNREACHED if M_a is None else M_a
        )
        logger.info("Heatmap cell K=%d tau=%d: M_a=%s speedup=%s", K, tau, M_a, point.speedup)
        return point

    cells = [(K, tau) for K in workers for tau in taus]
    points = _run_cells(workload, cells, run_cell, threads)
    grid = SweepGrid(
        workers=tuple(workers), taus=tuple(taus), points=points, N_a=N_a, target=target
    )
    return grid, baseline_trace


def sweep_overhead(
    grid: SweepGrid, K: int, overheads: Sequence[float], C_b: float = 1.0
) -> List[OverheadPoint]:
    """Naive and best-tau SparkNet speedups against S, from the M_a already measured for K"""
    row = grid.row(K)
    points = []
    for S in overheads:
        try:
            best_tau, best = best_tau_speedup(row, grid.N_a, C_b, S)
        except ValueError:
            best_tau, best = None, None
        points.append(
            OverheadPoint(
                S=S,
                K=K,
                naive_speedup=naive_speedup(C_b, K, S),
                sparknet_speedup=best,
                best_tau=best_tau,
            )
        )
    return points


def sweep_tau(
    workload: Workload,
    taus: Sequence[int],
    workers: int,
    parallel_budget: int,
    target: Optional[float],
    cost: CostModel,
    warm_start: int = 50,
    threads: int = 1,
) -> Dict[int, RunTrace]:
    """Full accuracy-vs-simulated-time traces, one per tau, at a fixed K"""

    def run_cell(cell_workload: Workload, cell: Cell) -> RunTrace:
        _, tau = cell
        return run_sparknet(
            cell_workload,
            workers,
            tau,
            rounds_for(parallel_budget, tau),
            target,
            cost,
            warm_start,
            stop_at_target=False,
        )

    traces = _run_cells(workload, [(workers, tau) for tau in taus], run_cell, threads)
    return {tau: traces[(workers, tau)] for tau in taus}


def sweep_scaling(
    workload: Workload,
    workers: Sequence[int],
    tau: int,
    parallel_budget: int,
    target: float,
    cost: CostModel,
    eval_every: int,
    warm_start: int = 50,
    threads: int = 1,
) -> Tuple[RunTrace, Dict[int, RunTrace], List[ScalingRow]]:
    """
    Serial baseline against SparkNet at several cluster sizes, all on the
    simulated clock; rows give the time to reach `target` and the ratio to
    the serial time.
    """
    baseline = run_serial(
        workload, parallel_budget, eval_every, target, cost, stop_at_target=False
    )

    def run_cell(cell_workload: Workload, cell: Cell) -> RunTrace:
        K, _ = cell
        return run_sparknet(
            cell_workload,
            K,
            tau,
            rounds_for(parallel_budget, tau),
            target,
            cost,
            warm_start,
            stop_at_target=False,
        )

    results = _run_cells(workload, [(K, tau) for K in workers], run_cell, threads)
    traces = {K: results[(K, tau)] for K in workers}
    base_time = baseline.time_to(target)
    rows = [ScalingRow(Scheme.SERIAL, 1, base_time, 1.0 if base_time is not None else None)]
    for K, trace in traces.items():
        rows.append(
            ScalingRow(
                Scheme.SPARKNET, K, trace.time_to(target), measured_speedup(baseline, trace, target)
            )
        )
        logger.info("Scaling K=%d: time to target %s", K, trace.time_to(target))
    return baseline, traces, rows


def median_speedups(grids: Sequence[SweepGrid]) -> Dict[Cell, float]:
    """Per-cell median over repeated sweeps; unreached cells count as 0"""
    if not grids:
        raise ValueError("median_speedups needs at least one grid")
    cells = list(grids[0].points)
    return {
        cell: statistics.median([grid.points[cell].speedup or 0.0 for grid in grids])
        for cell in cells
    }
