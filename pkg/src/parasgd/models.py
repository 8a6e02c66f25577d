from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from parasgd.lib import STREAM_SPLIT, derive_seed
from parasgd.tensor import NDArray


class NetSpecError(ValueError):
    pass


class Pooling(Enum):
    MAX = "max"


class Activation(Enum):
    RELU = "relu"


class Scheme(Enum):
    SERIAL = "serial"
    NAIVE = "naive"
    SPARKNET = "sparknet"


class TerminalReason(Enum):
    TARGET_REACHED = "target reached"
    BUDGET_EXHAUSTED = "budget exhausted"


@dataclass(frozen=True)
class DataLayer:
    """shape: (batch, channels, height, width)"""

    name: str
    shape: Tuple[int, int, int, int]


@dataclass(frozen=True)
class LabelLayer:
    """shape: (batch, 1)"""

    name: str
    shape: Tuple[int, int]


@dataclass(frozen=True)
class ConvLayer:
    name: str
    inputs: Tuple[str, ...]
    kernel: Tuple[int, int]
    num_filters: int


@dataclass(frozen=True)
class PoolLayer:
    name: str
    inputs: Tuple[str, ...]
    kernel: Tuple[int, int]
    stride: int
    pool: Pooling = Pooling.MAX


@dataclass(frozen=True)
class LinearLayer:
    name: str
    inputs: Tuple[str, ...]
    num_outputs: int


@dataclass(frozen=True)
class ActivationLayer:
    name: str
    inputs: Tuple[str, ...]
    activation: Activation = Activation.RELU


@dataclass(frozen=True)
class SoftmaxWithLoss:
    """inputs: (logits, label)"""

    name: str
    inputs: Tuple[str, ...]


LayerSpec = Union[
    DataLayer, LabelLayer, ConvLayer, PoolLayer, LinearLayer, ActivationLayer, SoftmaxWithLoss
]


@dataclass(frozen=True)
class NetParams:
    """
    Layer graph in topological order.

    eg. NetParams((
            DataLayer("data", (64, 1, 28, 28)),
            LabelLayer("label", (64, 1)),
            ConvLayer("conv1", ("data",), kernel=(5, 5), num_filters=20),
            ...
            SoftmaxWithLoss("loss", ("ip2", "label")),
        ))
    """

    layers: Tuple[LayerSpec, ...]

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        declared = set()
        for spec in self.layers:
            if spec.name in declared:
                raise NetSpecError(f"Duplicate layer name: {spec.name}")
            for name in getattr(spec, "inputs", ()):
                if name not in declared:
                    raise NetSpecError(
                        f"Layer {spec.name!r} references {name!r} which is not declared before it"
                    )
            declared.add(spec.name)

        for kind in (DataLayer, LabelLayer, SoftmaxWithLoss):
            count = sum(isinstance(spec, kind) for spec in self.layers)
            if count != 1:
                raise NetSpecError(f"Need exactly one {kind.__name__}, found {count}")

    def _single(self, kind):
        return next(spec for spec in self.layers if isinstance(spec, kind))

    @property
    def data_layer(self) -> DataLayer:
        return self._single(DataLayer)

    @property
    def label_layer(self) -> LabelLayer:
        return self._single(LabelLayer)

    @property
    def loss_layer(self) -> SoftmaxWithLoss:
        return self._single(SoftmaxWithLoss)

    @property
    def batch_size(self) -> int:
        return self.data_layer.shape[0]

    @property
    def example_shape(self) -> Tuple[int, int, int]:
        _, c, h, w = self.data_layer.shape
        return (c, h, w)


@dataclass(frozen=True, eq=False)
class Batch:
    images: NDArray
    labels: np.ndarray

    @property
    def size(self) -> int:
        return int(self.labels.shape[0])

    def split(self, parts: int) -> Tuple["Batch", ...]:
        """Contiguous split into `parts` equally sized batches"""
        if parts < 1 or self.size % parts != 0:
            raise ValueError(f"Cannot split a batch of {self.size} into {parts} equal parts")
        step = self.size // parts
        images = self.images.array
        return tuple(
            Batch(
                images=NDArray(images[i * step : (i + 1) * step]),
                labels=self.labels[i * step : (i + 1) * step].copy(),
            )
            for i in range(parts)
        )

    @staticmethod
    def concat(batches: Sequence["Batch"]) -> "Batch":
        if not batches:
            raise ValueError("Nothing to concatenate")
        return Batch(
            images=NDArray(np.concatenate([b.images.array for b in batches], axis=0), copy=False),
            labels=np.concatenate([b.labels for b in batches]),
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    images: (n, channels, height, width)
    labels: integer vector of length n, values in [0, num_classes)
    """

    images: NDArray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self) -> None:
        if len(self.images.shape) != 4:
            raise ValueError(f"Dataset images must be rank 4, got {self.images.shape}")
        n = self.images.shape[0]
        if self.labels.shape != (n,):
            raise ValueError(f"{n} images but labels have shape {self.labels.shape}")
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"Labels outside [0, {self.num_classes})")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def example_shape(self) -> Tuple[int, int, int]:
        _, c, h, w = self.images.shape
        return (c, h, w)

    def subset(self, indices: Sequence[int]) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            images=NDArray(self.images.array[idx], copy=False),
            labels=self.labels[idx].copy(),
            num_classes=self.num_classes,
        )

    def batch(self, indices: Sequence[int]) -> Batch:
        idx = np.asarray(indices, dtype=np.int64)
        return Batch(
            images=NDArray(self.images.array[idx], copy=False), labels=self.labels[idx].copy()
        )

    def split(self, fraction: float, seed: int) -> Tuple["Dataset", "Dataset"]:
        """Deterministic shuffled split into (first, second), second holding `fraction`"""
        if not 0.0 < fraction < 1.0:
            raise ValueError(f"Split fraction must be in (0, 1), got {fraction}")
        n = len(self)
        n_second = int(round(n * fraction))
        if n_second < 1 or n_second >= n:
            raise ValueError(f"Split of {n} examples at {fraction} leaves an empty side")
        order = np.random.default_rng(derive_seed(seed, STREAM_SPLIT)).permutation(n)
        return self.subset(np.sort(order[n_second:])), self.subset(np.sort(order[:n_second]))


@dataclass(frozen=True, eq=False)
class Shard:
    """
    Contiguous range [start, stop) of the shuffled order `permutation`
    of `dataset`, owned by worker `worker_id`.
    """

    dataset: Dataset
    worker_id: int
    permutation: np.ndarray
    start: int
    stop: int

    @property
    def indices(self) -> np.ndarray:
        return self.permutation[self.start : self.stop]

    def __len__(self) -> int:
        return self.stop - self.start


@dataclass(frozen=True)
class CostModel:
    """
    C_b: simulated seconds per minibatch gradient step at batch size b
    S: simulated seconds per synchronization (one broadcast + one collect)
    gamma: models C(b/K) = C(b) * (1/K)**gamma; 1 is the linear best case
    """

    C_b: float = 1.0
    S: float = 0.0
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if not self.C_b > 0:
            raise ValueError(f"C_b must be > 0, got {self.C_b}")
        if not self.S >= 0:
            raise ValueError(f"S must be >= 0, got {self.S}")
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")

    def split_cost(self, workers: int) -> float:
        """C(b/K)"""
        if self.gamma == 1.0:
            return self.C_b / workers
        return self.C_b * workers ** (-self.gamma)

    def naive_iteration_cost(self, workers: int) -> float:
        return self.split_cost(workers) + self.S

    def round_cost(self, tau: int) -> float:
        return tau * self.C_b + self.S


@dataclass(frozen=True)
class EvalRecord:
    """
    round: synchronizations so far (0 for serial)
    serial_iters: minibatch gradient steps executed over all machines
    parallel_iters: gradient steps along the wall-clock critical path
    """

    round: int
    serial_iters: int
    parallel_iters: int
    sim_time: float
    accuracy: float


@dataclass(frozen=True)
class RunTrace:
    scheme: Scheme
    workers: int
    tau: int
    batch_size: int
    records: Tuple[EvalRecord, ...] = ()
    terminal_reason: Optional[TerminalReason] = None
    learning_rate: Optional[float] = None
    seed: Optional[int] = None
    warm_start: int = 0

    def first_reaching(self, target: float) -> Optional[EvalRecord]:
        return next((r for r in self.records if r.accuracy >= target), None)

    def iterations_to(self, target: float) -> Optional[int]:
        """N_a: serial iterations at the first evaluation meeting `target`"""
        record = self.first_reaching(target)
        return record.serial_iters if record else None

    def rounds_to(self, target: float) -> Optional[int]:
        """M_a: rounds at the first evaluation meeting `target`"""
        record = self.first_reaching(target)
        return record.round if record else None

    def time_to(self, target: float) -> Optional[float]:
        record = self.first_reaching(target)
        return record.sim_time if record else None

    @property
    def final_accuracy(self) -> Optional[float]:
        return self.records[-1].accuracy if self.records else None
