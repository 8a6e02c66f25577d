from dataclasses import replace

import numpy as np
import pytest

from parasgd.analysis import naive_wallclock, serial_wallclock, sparknet_wallclock
from parasgd.models import Batch, CostModel, Scheme, TerminalReason
from parasgd.schemes import SimClock, map_workers, run_naive, run_scheme, run_serial, run_sparknet


def capture():
    """Observer collecting (record, weights) pairs"""
    seen = []

    def observer(record, weights):
        seen.append((record, weights))

    return seen, observer


def test_sim_clock_sums_counts_times_units():
    clock = SimClock()
    assert clock.elapsed == 0.0
    clock.charge("warm-start", 0.3, 7)
    for _ in range(11):
        clock.charge("round", 1.7)
    assert clock.count("round") == 11
    assert clock.elapsed == 0.0 + 7 * 0.3 + 11 * 1.7
    with pytest.raises(ValueError):
        clock.charge("round", 2.0)
    with pytest.raises(ValueError):
        clock.charge("round", 1.7, -1)


def test_map_workers_keeps_item_order():
    items = list(range(20))
    assert map_workers(lambda x: x * x, items, threads=4) == [x * x for x in items]
    assert map_workers(lambda x: -x, items) == [-x for x in items]


def test_serial_clock_and_counters(workload):
    trace = run_serial(workload, 100, 10, None, CostModel(C_b=2.0))
    assert trace.records[-1].sim_time == 200.0
    assert [r.serial_iters for r in trace.records] == list(range(10, 101, 10))
    assert all(r.parallel_iters == r.serial_iters and r.round == 0 for r in trace.records)
    assert trace.terminal_reason is TerminalReason.BUDGET_EXHAUSTED
    times = [r.sim_time for r in trace.records]
    assert times == sorted(set(times))


def test_serial_partial_last_chunk(workload, unit_cost):
    trace = run_serial(workload, 25, 10, None, unit_cost)
    assert [r.serial_iters for r in trace.records] == [10, 20, 25]


def test_serial_target_zero_stops_at_first_evaluation(workload, unit_cost):
    trace = run_serial(workload, 100, 7, 0.0, unit_cost)
    assert trace.iterations_to(0.0) == 7
    assert len(trace.records) == 1
    assert trace.terminal_reason is TerminalReason.TARGET_REACHED


def test_zero_budget_gives_no_records(workload, unit_cost):
    assert run_serial(workload, 0, 10, 0.5, unit_cost).records == ()
    assert run_sparknet(workload, 2, 5, 0, 0.5, unit_cost, warm_start=0).records == ()


def test_identical_seeds_identical_traces(workload_factory, unit_cost):
    a = run_serial(workload_factory(seed=3), 60, 20, None, unit_cost)
    b = run_serial(workload_factory(seed=3), 60, 20, None, unit_cost)
    assert a == b


@pytest.mark.parametrize("workers", [2, 4])
def test_naive_follows_the_serial_trajectory(workload, unit_cost, workers):
    serial_weights, serial_observer = capture()
    naive_weights, naive_observer = capture()
    run_serial(workload, 200, 20, None, unit_cost, observer=serial_observer)
    run_naive(workload, workers, 200, 20, None, unit_cost, observer=naive_observer)
    assert len(serial_weights) == len(naive_weights) == 10
    for (serial_record, expected), (naive_record, actual) in zip(serial_weights, naive_weights):
        assert serial_record.serial_iters == naive_record.serial_iters
        assert actual.max_relative_deviation(expected) < 1e-10


def test_naive_with_one_worker_is_serial(workload, unit_cost):
    serial = run_serial(workload, 60, 20, None, unit_cost)
    naive = run_naive(workload, 1, 60, 20, None, unit_cost)
    assert [r.sim_time for r in naive.records] == [r.sim_time for r in serial.records]
    assert [r.accuracy for r in naive.records] == [r.accuracy for r in serial.records]


def test_naive_clock_and_divisibility(workload_factory):
    workload = workload_factory(batch_size=10)
    trace = run_naive(workload, 5, 30, 10, None, CostModel(C_b=2.0, S=20.0))
    assert trace.records[0].sim_time == pytest.approx(10 * 20.4)
    assert [r.round for r in trace.records] == [10, 20, 30]
    with pytest.raises(ValueError):
        run_naive(workload, 3, 30, 10, None, CostModel())


@pytest.mark.parametrize("workers", [2, 4])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_tau_one_matches_big_batch_sgd(workload_factory, unit_cost, workers, seed):
    workload = workload_factory(seed=seed)
    seen, observer = capture()
    run_sparknet(workload, workers, 1, 100, None, unit_cost, warm_start=0, observer=observer)

    oracle = workload.build_net()
    iterators = workload.worker_iterators(workers)
    for record, averaged in seen:
        big_batch = Batch.concat([next(batches) for batches in iterators])
        oracle.apply_gradient(oracle.backward(big_batch))
        assert averaged.max_relative_deviation(oracle.get_weights()) < 1e-10
    assert len(seen) == 100


@pytest.mark.parametrize("momentum", [0.0, 0.9])
def test_one_worker_sparknet_is_serial_bit_for_bit(workload_factory, unit_cost, momentum):
    workload = workload_factory(momentum=momentum)
    serial_weights, serial_observer = capture()
    spark_weights, spark_observer = capture()
    run_serial(workload, 110, 5, None, unit_cost, observer=serial_observer)
    run_sparknet(workload, 1, 5, 20, None, unit_cost, warm_start=10, observer=spark_observer)

    by_iteration = {record.serial_iters: weights for record, weights in serial_weights}
    for record, weights in spark_weights:
        assert record.serial_iters == record.parallel_iters == 10 + 5 * record.round
        assert weights.equals(by_iteration[record.serial_iters])


def test_one_worker_rounds_match_serial_iterations(workload, unit_cost):
    target = 0.8
    serial = run_serial(workload, 1500, 5, target, unit_cost)
    spark = run_sparknet(workload, 1, 5, 300, target, unit_cost, warm_start=0)
    assert serial.iterations_to(target) is not None
    assert spark.rounds_to(target) * 5 == serial.iterations_to(target)
    assert spark.time_to(target) == serial.time_to(target)


def test_sparknet_counters_and_clock(workload):
    cost = CostModel(C_b=2.0, S=20.0)
    trace = run_sparknet(workload, 2, 50, 40, None, cost, warm_start=0)
    assert trace.records[-1].sim_time == 4800.0
    last = trace.records[-1]
    assert (last.round, last.serial_iters, last.parallel_iters) == (40, 4000, 2000)

    warm = run_sparknet(workload, 3, 4, 5, None, cost, warm_start=6)
    assert [r.serial_iters for r in warm.records] == [6 + 12 * r for r in range(1, 6)]
    assert warm.records[0].sim_time == 6 * 2.0 + (4 * 2.0 + 20.0)
    assert warm.warm_start == 6


@pytest.mark.parametrize("seed", range(5))
def test_clock_matches_closed_forms(workload, seed):
    rng = np.random.default_rng(seed)
    C_b, S = float(rng.uniform(0.01, 5.0)), float(rng.uniform(0.0, 50.0))
    gamma = float(rng.uniform(0.1, 1.0))
    workers = int(rng.choice([1, 2, 4, 8]))
    tau, warm = int(rng.integers(1, 8)), int(rng.integers(0, 20))
    every = int(rng.integers(1, 9))
    cost = CostModel(C_b=C_b, S=S, gamma=gamma)

    for record in run_serial(workload, 40, every, None, cost).records:
        assert record.sim_time == serial_wallclock(record.serial_iters, C_b)
    for record in run_naive(workload, workers, 40, every, None, cost).records:
        assert record.sim_time == naive_wallclock(record.serial_iters, C_b, workers, S, gamma)
    for record in run_sparknet(workload, workers, tau, 6, None, cost, warm_start=warm).records:
        assert record.sim_time == sparknet_wallclock(record.round, tau, C_b, S, warm)


def test_threads_give_identical_traces(workload, unit_cost):
    single = run_sparknet(workload, 4, 3, 6, None, unit_cost, warm_start=5)
    threaded = run_sparknet(replace(workload, threads=4), 4, 3, 6, None, unit_cost, warm_start=5)
    assert single.records == threaded.records

    naive = run_naive(workload, 4, 12, 4, None, unit_cost)
    naive_threaded = run_naive(replace(workload, threads=4), 4, 12, 4, None, unit_cost)
    assert naive.records == naive_threaded.records


def test_averaging_preserves_structure(workload, unit_cost):
    seen, observer = capture()
    run_sparknet(workload, 3, 2, 2, None, unit_cost, warm_start=0, observer=observer)
    expected = workload.build_net().get_weights().structure()
    assert all(weights.structure() == expected for _, weights in seen)


def test_sparknet_preconditions(workload_factory, unit_cost):
    workload = workload_factory(per_class=8)
    # 18 training examples over 4 workers leaves shards smaller than b=8
    with pytest.raises(ValueError, match="fewer than the batch size"):
        run_sparknet(workload, 4, 1, 1, None, unit_cost)
    with pytest.raises(ValueError):
        run_sparknet(workload, 1, 0, 1, None, unit_cost)
    with pytest.raises(ValueError):
        run_sparknet(workload, 0, 1, 1, None, unit_cost)


def test_stop_at_target_and_full_traces(workload, unit_cost):
    stopped = run_sparknet(workload, 2, 5, 30, 0.5, unit_cost, warm_start=0)
    full = run_sparknet(workload, 2, 5, 30, 0.5, unit_cost, warm_start=0, stop_at_target=False)
    assert stopped.terminal_reason is TerminalReason.TARGET_REACHED
    assert full.terminal_reason is TerminalReason.TARGET_REACHED
    assert len(full.records) == 30
    assert stopped.records == full.records[: len(stopped.records)]


def test_run_scheme_dispatch(workload, unit_cost):
    serial = run_scheme(Scheme.SERIAL, workload, 1, 1, 20, 10, None, unit_cost)
    spark = run_scheme(Scheme.SPARKNET, workload, 2, 5, 3, 10, None, unit_cost, warm_start=0)
    assert serial.scheme is Scheme.SERIAL and len(serial.records) == 2
    assert spark.scheme is Scheme.SPARKNET and spark.tau == 5 and len(spark.records) == 3
