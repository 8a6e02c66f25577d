import os
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

from parasgd.models import (
    ActivationLayer,
    ConvLayer,
    DataLayer,
    LabelLayer,
    LinearLayer,
    NetParams,
    NetSpecError,
    PoolLayer,
    SoftmaxWithLoss,
)

VALID_SCHEMES = ("serial", "naive", "sparknet")
SWEEP_KINDS = ("heatmap", "overhead", "tau", "scaling")
DATA_SOURCES = ("synthetic", "idx", "csv")

OUTPUT_DIR_ENV = "PARASGD_OUT"
DEFAULT_OUTPUT_DIR = "parasgd-out"


@dataclass(frozen=True)
class NetSection:
    preset: str = "lenet-small"


@dataclass(frozen=True)
class DataSection:
    source: str = "synthetic"
    classes: int = 10
    # per-example (channels, height, width)
    shape: Tuple[int, ...] = (1, 28, 28)
    per_class: int = 600
    separation: float = 4.0
    images: str = ""
    labels: str = ""
    csv: str = ""
    # without a validation source, this share of the training set is held out
    validation_fraction: float = 0.2
    validation_images: str = ""
    validation_labels: str = ""
    validation_csv: str = ""


@dataclass(frozen=True)
class TrainSection:
    batch_size: int = 50
    learning_rate: float = 0.01
    momentum: float = 0.0
    warm_start: int = 50


@dataclass(frozen=True)
class SchemeSection:
    name: str = "sparknet"
    workers: int = 4
    tau: int = 50


@dataclass(frozen=True)
class CostSection:
    C_b: float = 1.0
    S: float = 0.0
    gamma: float = 1.0


@dataclass(frozen=True)
class TargetSection:
    accuracy: float = 0.9
    # > 0: replace accuracy by what a serial run shows after this many iterations
    calibrate_at: int = 0


@dataclass(frozen=True)
class BudgetSection:
    # serial/naive iterations, and local steps per worker in sweeps
    iterations: int = 2000
    rounds: int = 40


@dataclass(frozen=True)
class EvalSection:
    every: int = 50
    # 0 is the whole validation set
    steps: int = 0


@dataclass(frozen=True)
class SweepSection:
    heatmap_workers: Tuple[int, ...] = (1, 2, 4)
    heatmap_taus: Tuple[int, ...] = (1, 10, 50, 100)
    overhead_workers: int = 4
    overhead_taus: Tuple[int, ...] = (1, 2, 5, 10, 25, 100, 500, 1000, 2500)
    overheads: Tuple[float, ...] = (0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0)
    tau_workers: int = 5
    tau_taus: Tuple[int, ...] = (1, 5, 25, 50, 100)
    scaling_workers: Tuple[int, ...] = (2, 4, 8)
    scaling_tau: int = 50


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    # 0 is one thread per available CPU
    threads: int = 0


@dataclass(frozen=True)
class OutputSection:
    dir: str = ""


SECTIONS = {
    "net": NetSection,
    "data": DataSection,
    "train": TrainSection,
    "scheme": SchemeSection,
    "cost": CostSection,
    "target": TargetSection,
    "budget": BudgetSection,
    "eval": EvalSection,
    "sweep": SweepSection,
    "run": RunSection,
    "output": OutputSection,
}


def available_threads() -> int:
    return os.cpu_count() or 1


# Architecture presets, built for a given batch size, example shape and class count.
# lenet:       conv 5x5x20, max 2x2/2, conv 5x5x50, max 2x2/2, linear 500, relu, linear
# lenet-small: the same graph with 8 and 16 filters and 64 hidden units
# mlp:         linear 64, relu, linear


def _lenet(
    batch_size: int,
    shape: Tuple[int, int, int],
    classes: int,
    filters: Tuple[int, int],
    hidden: int,
) -> NetParams:
    return NetParams(
        (
            DataLayer("data", (batch_size, *shape)),
            LabelLayer("label", (batch_size, 1)),
            ConvLayer("conv1", ("data",), kernel=(5, 5), num_filters=filters[0]),
            PoolLayer("pool1", ("conv1",), kernel=(2, 2), stride=2),
            ConvLayer("conv2", ("pool1",), kernel=(5, 5), num_filters=filters[1]),
            PoolLayer("pool2", ("conv2",), kernel=(2, 2), stride=2),
            LinearLayer("ip1", ("pool2",), num_outputs=hidden),
            ActivationLayer("relu1", ("ip1",)),
            LinearLayer("ip2", ("relu1",), num_outputs=classes),
            SoftmaxWithLoss("loss", ("ip2", "label")),
        )
    )


def lenet(batch_size: int, shape: Tuple[int, int, int], classes: int) -> NetParams:
    return _lenet(batch_size, shape, classes, (20, 50), 500)


def lenet_small(batch_size: int, shape: Tuple[int, int, int], classes: int) -> NetParams:
    return _lenet(batch_size, shape, classes, (8, 16), 64)


def mlp(batch_size: int, shape: Tuple[int, int, int], classes: int, hidden: int = 64) -> NetParams:
    return NetParams(
        (
            DataLayer("data", (batch_size, *shape)),
            LabelLayer("label", (batch_size, 1)),
            LinearLayer("ip1", ("data",), num_outputs=hidden),
            ActivationLayer("relu1", ("ip1",)),
            LinearLayer("ip2", ("relu1",), num_outputs=classes),
            SoftmaxWithLoss("loss", ("ip2", "label")),
        )
    )


PRESETS: Dict[str, Callable[[int, Tuple[int, int, int], int], NetParams]] = {
    "lenet": lenet,
    "lenet-small": lenet_small,
    "mlp": mlp,
}


def build_preset(
    name: str, batch_size: int, shape: Tuple[int, int, int], classes: int
) -> NetParams:
    try:
        preset = PRESETS[name]
    except KeyError:
        raise NetSpecError(
            f"Unknown net preset {name!r} (valid: {', '.join(PRESETS)})"
        ) from None
    return preset(batch_size, shape, classes)
