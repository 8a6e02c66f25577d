"""
Serial SGD, naive minibatch splitting and SparkNet-style model averaging,
run against a simulated wall clock.

Workers are executed in worker-id order, or on a thread pool when
`Workload.threads > 1`; both give bit-identical traces because every worker
owns its Net and results are combined in worker-id order.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, TypeVar

from parasgd.data import BatchIterator, batch_iterator, shard
from parasgd.models import (
    CostModel,
    Dataset,
    EvalRecord,
    NetParams,
    RunTrace,
    Scheme,
    TerminalReason,
)
from parasgd.network import Net, WeightCollection

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

Observer = Callable[[EvalRecord, WeightCollection], None]


class SimClock:
    """
    Simulated seconds, kept as integer event counts per phase

    elapsed = sum(count * unit_cost) over phases in first-charged order, so
    the reading equals the closed-form wall-clock expressions exactly
    instead of drifting with repeated float additions.
    """

    def __init__(self):
        self._phases: Dict[str, List] = {}

    def charge(self, phase: str, unit_cost: float, count: int = 1) -> None:
        if count < 0 or unit_cost < 0:
            raise ValueError("Simulated time only moves forward")
        entry = self._phases.setdefault(phase, [0, unit_cost])
        if entry[1] != unit_cost:
            raise ValueError(f"Phase {phase!r} already charged at {entry[1]}, not {unit_cost}")
        entry[0] += count

    def count(self, phase: str) -> int:
        entry = self._phases.get(phase)
        return entry[0] if entry else 0

    @property
    def elapsed(self) -> float:
        total = 0.0
        for count, unit_cost in self._phases.values():
            total += count * unit_cost
        return total


@dataclass(frozen=True)
class Workload:
    """
    Everything a scheme needs besides its own knobs: the network, the data
    and the SGD hyperparameters. The minibatch size b is the data layer's
    batch extent.
    """

    net_params: NetParams
    train: Dataset
    validation: Dataset
    learning_rate: float
    momentum: float = 0.0
    seed: int = 0
    eval_steps: Optional[int] = None
    threads: int = 1

    @property
    def batch_size(self) -> int:
        return self.net_params.batch_size

    def build_net(self) -> Net:
        net = Net.build(self.net_params, self.seed, self.learning_rate, self.momentum)
        net.set_validation_data(self.validation)
        return net

    def worker_iterators(self, workers: int) -> List[BatchIterator]:
        iterators = []
        for worker_shard in shard(self.train, workers, self.seed):
            if len(worker_shard) < self.batch_size:
                raise ValueError(
                    f"Shard {worker_shard.worker_id} holds {len(worker_shard)} examples, "
                    f"fewer than the batch size {self.batch_size}"
                )
            iterators.append(batch_iterator(worker_shard, self.batch_size, self.seed))
        return iterators

    def worker_nets(self, workers: int) -> List[Net]:
        """One Net per worker, each attached to its own shard iterator"""
        nets = []
        for batches in self.worker_iterators(workers):
            net = self.build_net()
            net.set_training_data(batches)
            nets.append(net)
        return nets


def map_workers(fn: Callable[[T], R], items: Sequence[T], threads: int = 1) -> List[R]:
    """Apply fn to every item; results come back in item order"""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as executor:
        return list(executor.map(fn, items))


def _finish(
    scheme: Scheme,
    workload: Workload,
    workers: int,
    tau: int,
    records: List[EvalRecord],
    target: Optional[float],
    warm_start: int = 0,
) -> RunTrace:
    reached = target is not None and any(r.accuracy >= target for r in records)
    trace = RunTrace(
        scheme=scheme,
        workers=workers,
        tau=tau,
        batch_size=workload.batch_size,
        records=tuple(records),
        terminal_reason=(
            TerminalReason.TARGET_REACHED if reached else TerminalReason.BUDGET_EXHAUSTED
        ),
        learning_rate=workload.learning_rate,
        seed=workload.seed,
        warm_start=warm_start,
    )
    logger.info(
        "%s K=%d tau=%d finished after %d evaluations: %s",
        scheme.value,
        workers,
        tau,
        len(records),
        trace.terminal_reason.value if trace.terminal_reason else "",
    )
    return trace


def run_serial(
    workload: Workload,
    iter_budget: int,
    eval_every: int,
    target: Optional[float],
    cost: CostModel,
    stop_at_target: bool = True,
    observer: Optional[Observer] = None,
) -> RunTrace:
    """
    Plain SGD on one machine, evaluated every `eval_every` iterations.
    Simulated time after t iterations is t * C_b.
    """
    if eval_every < 1:
        raise ValueError(f"eval_every must be >= 1, got {eval_every}")
    (net,) = workload.worker_nets(1)
    clock = SimClock()
    records: List[EvalRecord] = []
    done = 0
    while done < iter_budget:
        steps = min(eval_every, iter_budget - done)
        net.train(steps)
        done += steps
        clock.charge("compute", cost.C_b, steps)
        record = EvalRecord(
            round=0,
            serial_iters=done,
            parallel_iters=done,
            sim_time=clock.elapsed,
            accuracy=net.test(workload.eval_steps),
        )
        records.append(record)
        logger.debug("serial %s", record)
        if observer is not None:
            observer(record, net.get_weights())
        if stop_at_target and target is not None and record.accuracy >= target:
            break
    return _finish(Scheme.SERIAL, workload, 1, 1, records, target)


def run_naive(
    workload: Workload,
    workers: int,
    iter_budget: int,
    eval_every: int,
    target: Optional[float],
    cost: CostModel,
    stop_at_target: bool = True,
    observer: Optional[Observer] = None,
) -> RunTrace:
    """
    Every minibatch is split into `workers` equal parts; part gradients are
    averaged into the full-batch gradient and applied once. The parameter
    trajectory is the serial one; each iteration costs C(b/K) + S.
    """
    if eval_every < 1:
        raise ValueError(f"eval_every must be >= 1, got {eval_every}")
    if workers < 1 or workload.batch_size % workers != 0:
        raise ValueError(f"{workers} workers do not divide the batch size {workload.batch_size}")
    net = workload.build_net()
    (batches,) = workload.worker_iterators(1)
    iteration_cost = cost.naive_iteration_cost(workers)
    clock = SimClock()
    records: List[EvalRecord] = []
    done = 0
    while done < iter_budget:
        steps = min(eval_every, iter_budget - done)
        for _ in range(steps):
            parts = next(batches).split(workers)
            # equal parts, so the size-weighted mean is the plain mean
            gradients = map_workers(net.backward, parts, workload.threads)
            net.apply_gradient(WeightCollection.mean(gradients))
        done += steps
        clock.charge("iteration", iteration_cost, steps)
        record = EvalRecord(
            round=done,
            serial_iters=done,
            parallel_iters=done,
            sim_time=clock.elapsed,
            accuracy=net.test(workload.eval_steps),
        )
        records.append(record)
        logger.debug("naive %s", record)
        if observer is not None:
            observer(record, net.get_weights())
        if stop_at_target and target is not None and record.accuracy >= target:
            break
    return _finish(Scheme.NAIVE, workload, workers, 1, records, target)


def _local_round(weights: WeightCollection, tau: int) -> Callable[[Net], WeightCollection]:
    def train_worker(net: Net) -> WeightCollection:
        net.set_weights(weights)
        net.train(tau)
        return net.get_weights()

    return train_worker


def run_sparknet(
    workload: Workload,
    workers: int,
    tau: int,
    round_budget: int,
    target: Optional[float],
    cost: CostModel,
    warm_start: int = 50,
    stop_at_target: bool = True,
    observer: Optional[Observer] = None,
) -> RunTrace:
    """
    Rounds of broadcast, `tau` local SGD steps per worker, collect and average

    The warm start runs `warm_start` serial steps on worker 0's net and
    shard before the first broadcast and costs warm_start * C_b. Each round
    then costs tau * C_b + S, workers running concurrently in simulated time.
    The final model is the last round's average.
    """
    if workers < 1 or tau < 1:
        raise ValueError(f"Need workers >= 1 and tau >= 1, got K={workers}, tau={tau}")
    if warm_start < 0:
        raise ValueError(f"warm_start must be >= 0, got {warm_start}")
    nets = workload.worker_nets(workers)
    master = workload.build_net()
    clock = SimClock()

    nets[0].train(warm_start)
    clock.charge("warm-start", cost.C_b, warm_start)
    weights = nets[0].get_weights()

    records: List[EvalRecord] = []
    for round_no in range(1, round_budget + 1):
        collected = map_workers(_local_round(weights, tau), nets, workload.threads)
        weights = WeightCollection.mean(collected)
        clock.charge("round", cost.round_cost(tau))

        master.set_weights(weights)
        record = EvalRecord(
            round=round_no,
            serial_iters=warm_start + round_no * tau * workers,
            parallel_iters=warm_start + round_no * tau,
            sim_time=clock.elapsed,
            accuracy=master.test(workload.eval_steps),
        )
        records.append(record)
        logger.debug("sparknet K=%d tau=%d %s", workers, tau, record)
        if observer is not None:
            observer(record, weights)
        if stop_at_target and target is not None and record.accuracy >= target:
            break
    return _finish(Scheme.SPARKNET, workload, workers, tau, records, target, warm_start)


def run_scheme(
    scheme: Scheme,
    workload: Workload,
    workers: int,
    tau: int,
    budget: int,
    eval_every: int,
    target: Optional[float],
    cost: CostModel,
    warm_start: int = 50,
    stop_at_target: bool = True,
) -> RunTrace:
    """Dispatch on scheme; `budget` is iterations for serial/naive, rounds for sparknet"""
    if scheme is Scheme.SERIAL:
        return run_serial(workload, budget, eval_every, target, cost, stop_at_target)
    elif scheme is Scheme.NAIVE:
        return run_naive(workload, workers, budget, eval_every, target, cost, stop_at_target)
    elif scheme is Scheme.SPARKNET:
        return run_sparknet(
            workload, workers, tau, budget, target, cost, warm_start, stop_at_target
        )
    raise ValueError(f"Unknown scheme: {scheme}")

