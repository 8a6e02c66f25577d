"""
Desk-scale speedup trends on lenet-small. Slow: run with `pytest -m slow`.
"""

import pytest

from parasgd.analysis import (
    DEFAULT_TAU_SET,
    calibrate_target,
    median_speedups,
    serial_baseline,
    sweep_heatmap,
    sweep_overhead,
    sweep_tau,
)
from parasgd.data import generate_synthetic
from parasgd.models import CostModel
from parasgd.schemes import Workload
from parasgd.settings import lenet_small

pytestmark = pytest.mark.slow

SEEDS = (0, 1, 2)
CALIBRATE_AT = 2000
EVAL_EVERY = 50
PARALLEL_BUDGET = 4000
WORKERS = (1, 2, 4)
TAUS = (1, 10, 50, 100)
TAU_WORKERS = 5


def lenet_workload(seed: int) -> Workload:
    # 7000 examples, 5600 of them for training
    dataset = generate_synthetic(10, (1, 28, 28), 700, separation=4.0, seed=seed)
    train, validation = dataset.split(0.2, seed)
    return Workload(
        net_params=lenet_small(50, (1, 28, 28), 10),
        train=train,
        validation=validation,
        learning_rate=0.01,
        seed=seed,
    )


@pytest.fixture(scope="module")
def measured():
    """Per seed: (workload, target, baseline, K x tau grid, K=4 grid over the wide tau set)"""
    runs = []
    for seed in SEEDS:
        workload = lenet_workload(seed)
        target = calibrate_target(workload, CALIBRATE_AT, EVAL_EVERY)
        baseline = serial_baseline(workload, target, CALIBRATE_AT, EVAL_EVERY)
        grid, _ = sweep_heatmap(
            workload,
            WORKERS,
            TAUS,
            target,
            PARALLEL_BUDGET,
            CALIBRATE_AT,
            EVAL_EVERY,
            warm_start=0,
            baseline=baseline,
        )
        wide, _ = sweep_heatmap(
            workload,
            (4,),
            DEFAULT_TAU_SET,
            target,
            PARALLEL_BUDGET,
            CALIBRATE_AT,
            EVAL_EVERY,
            warm_start=0,
            baseline=baseline,
        )
        runs.append((workload, target, grid, wide))
    return runs


def test_heatmap_trends(measured):
    medians = median_speedups([grid for _, _, grid, _ in measured])
    for tau in TAUS:
        assert 0.7 <= medians[(1, tau)] <= 1.3
    assert medians[(4, 10)] >= 1.3 * medians[(1, 10)]
    for _, _, grid, _ in measured:
        assert all(grid.cell(4, tau).reached for tau in TAUS)


def test_overhead_trends(measured):
    curves = [sweep_overhead(wide, 4, [1.0, 10.0, 100.0]) for _, _, _, wide in measured]
    at_1, at_10, at_100 = (
        sorted(curve[i].sparknet_speedup or 0.0 for curve in curves)[1] for i in range(3)
    )
    assert curves[0][1].naive_speedup < 0.5
    assert at_10 >= 1.0
    assert at_100 >= 0.5 * at_1


def test_infrequent_averaging_still_reaches_the_target(measured):
    for workload, target, _, _ in measured:
        traces = sweep_tau(
            workload,
            (10, 50, 100),
            TAU_WORKERS,
            PARALLEL_BUDGET,
            target,
            CostModel(),
            warm_start=0,
        )
        for tau, trace in traces.items():
            assert trace.time_to(target) is not None, f"tau={tau} never reached {target}"
