import itertools
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from parasgd.layers import DataInput, LabelInput, Layer, SoftmaxLoss, construct_layer
from parasgd.lib import STREAM_INIT, derive_seed
from parasgd.models import Batch, Dataset, NetParams, NetSpecError
from parasgd.tensor import NDArray, NonFiniteError, ShapeError, argmax_rows, mean_collection


class WeightCollection:
    """
    Ordered map from layer name to that layer's tensors, eg.
    {"conv1": [kernel, bias], "pool1": [], "ip1": [weight, bias], ...}

    The unit exchanged at synchronization points.
    """

    def __init__(self, weights: Mapping[str, Sequence[NDArray]]):
        self._weights: Dict[str, List[NDArray]] = {k: list(v) for k, v in weights.items()}

    def __getitem__(self, layer: str) -> List[NDArray]:
        return self._weights[layer]

    def __contains__(self, layer: object) -> bool:
        return layer in self._weights

    def __len__(self) -> int:
        return len(self._weights)

    def keys(self):
        return self._weights.keys()

    def items(self):
        return self._weights.items()

    def copy(self) -> "WeightCollection":
        return WeightCollection({k: [t.copy() for t in v] for k, v in self._weights.items()})

    def structure(self) -> Tuple[Tuple[str, Tuple[Tuple[int, ...], ...]], ...]:
        return tuple((k, tuple(t.shape for t in v)) for k, v in self._weights.items())

    def flat(self) -> np.ndarray:
        """All entries concatenated in collection order"""
        parts = [t.data for tensors in self._weights.values() for t in tensors]
        return np.concatenate(parts) if parts else np.zeros(0)

    def equals(self, other: "WeightCollection") -> bool:
        """Bitwise equality"""
        if self.structure() != other.structure():
            return False
        return all(
            a.equals(b)
            for k in self._weights
            for a, b in zip(self._weights[k], other._weights[k])
        )

    def max_relative_deviation(self, other: "WeightCollection") -> float:
        if self.structure() != other.structure():
            raise ShapeError("WeightCollections have different structure")
        a, b = self.flat(), other.flat()
        if a.size == 0:
            return 0.0
        scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), np.finfo(np.float64).tiny)
        return float(np.max(np.abs(a - b) / scale))

    @staticmethod
    def mean(collections: Sequence["WeightCollection"]) -> "WeightCollection":
        """Per-layer, per-tensor entrywise mean, summed in list order"""
        if not collections:
            raise ValueError("Cannot average an empty list of WeightCollections")
        first = collections[0]
        for other in collections[1:]:
            if other.structure() != first.structure():
                raise ShapeError("Cannot average WeightCollections of different structure")
        return WeightCollection(
            {
                layer: [
                    mean_collection([c[layer][i] for c in collections])
                    for i in range(len(tensors))
                ]
                for layer, tensors in first.items()
            }
        )


class Net:
    """
    Trainable realization of a NetParams graph.

    A Net is owned by one worker at a time. forward() and backward() keep no
    per-call state on the instance; train() and set_weights() mutate it.
    """

    def __init__(
        self,
        net_params: NetParams,
        layers: Sequence[Layer],
        weights: WeightCollection,
        learning_rate: float,
        momentum: float = 0.0,
    ):
        if not learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {learning_rate}")
        if not 0.0 <= momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {momentum}")
        self.net_params = net_params
        self.layers = tuple(layers)
        self.learning_rate = learning_rate
        self.momentum = momentum
        self._weights = weights
        self._velocity: Optional[WeightCollection] = None
        self._training_data: Optional[Iterator[Batch]] = None
        self._validation_data: Optional[Dataset] = None
        self._validation_batches: List[Batch] = []

    @classmethod
    def build(
        cls,
        net_params: NetParams,
        seed: int,
        learning_rate: float = 0.01,
        momentum: float = 0.0,
    ) -> "Net":
        """
        Instantiate the layer graph

        Biases start at zero; kernels and linear weights are drawn from
        U[-s, s], s = sqrt(6 / (fan_in + fan_out)), using a stream derived
        from (seed, layer index).
        """
        shapes: Dict[str, Tuple[int, ...]] = {}
        layers: List[Layer] = []
        weights: Dict[str, List[NDArray]] = {}
        for index, spec in enumerate(net_params.layers):
            input_names = getattr(spec, "inputs", ())
            try:
                input_shapes = [shapes[name] for name in input_names]
            except KeyError as e:
                raise NetSpecError(f"{spec.name}: unknown input {e}") from None
            layer = construct_layer(spec, input_shapes)
            shapes[spec.name] = layer.output_shape
            layers.append(layer)

            param_shapes = layer.param_shapes()
            tensors: List[NDArray] = []
            if param_shapes:
                rng = np.random.default_rng(derive_seed(seed, STREAM_INIT, index))
                fan_in, fan_out = layer.fans()
                bound = np.sqrt(6.0 / (fan_in + fan_out))
                weight_shape, *rest = param_shapes
                tensors.append(NDArray(rng.uniform(-bound, bound, size=weight_shape), copy=False))
                tensors.extend(NDArray(np.zeros(shape), copy=False) for shape in rest)
            weights[spec.name] = tensors

        return cls(net_params, layers, WeightCollection(weights), learning_rate, momentum)

    @property
    def num_classes(self) -> int:
        loss_layer = self._loss_layer
        assert isinstance(loss_layer, SoftmaxLoss)
        return loss_layer.num_classes

    @property
    def _loss_layer(self) -> Layer:
        return next(layer for layer in self.layers if isinstance(layer, SoftmaxLoss))

    def set_training_data(self, batches: Iterator[Batch]) -> None:
        self._training_data = batches

    def set_validation_data(self, dataset: Dataset) -> None:
        if dataset.example_shape != self.net_params.example_shape:
            raise ShapeError(
                f"Validation examples {dataset.example_shape} do not match "
                f"the data layer {self.net_params.example_shape}"
            )
        self._validation_data = dataset
        size = self.net_params.batch_size
        self._validation_batches = [
            dataset.batch(range(start, min(start + size, len(dataset))))
            for start in range(0, len(dataset), size)
        ]

    def get_weights(self) -> WeightCollection:
        return self._weights.copy()

    def set_weights(self, weights: WeightCollection) -> None:
        """Replace all weights; momentum history is kept"""
        expected = self._weights.structure()
        if weights.structure() != expected:
            missing = [k for k in self._weights.keys() if k not in weights]
            if missing:
                raise ShapeError(f"Missing layers in WeightCollection: {', '.join(missing)}")
            raise ShapeError("WeightCollection keys or shapes do not match this net")
        self._weights = weights.copy()

    def _run_forward(self, batch: Batch) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
        blobs: Dict[str, np.ndarray] = {}
        caches: Dict[str, Any] = {}
        for layer in self.layers:
            if isinstance(layer, DataInput):
                inputs = [batch.images.array]
            elif isinstance(layer, LabelInput):
                inputs = [batch.labels]
            else:
                inputs = [blobs[name] for name in layer.spec.inputs]
            params = [t.array for t in self._weights[layer.name]]
            out, cache = layer.forward(inputs, params)
            if not np.isfinite(out).all():
                raise NonFiniteError(f"Layer {layer.name} produced non-finite values")
            blobs[layer.name] = out
            caches[layer.name] = cache
        return blobs, caches

    def forward(self, batch: Batch) -> Tuple[float, NDArray]:
        """(batch-mean loss, class probabilities [n, num_classes])"""
        blobs, caches = self._run_forward(batch)
        loss_name = self._loss_layer.name
        return float(blobs[loss_name]), NDArray(caches[loss_name], copy=False)

    def backward(self, batch: Batch) -> WeightCollection:
        """Gradient of the batch-mean loss, shaped like get_weights()"""
        blobs, caches = self._run_forward(batch)
        inputs_of = {
            layer.name: (
                [batch.images.array]
                if isinstance(layer, DataInput)
                else [batch.labels]
                if isinstance(layer, LabelInput)
                else [blobs[name] for name in layer.spec.inputs]
            )
            for layer in self.layers
        }

        grads: Dict[str, np.ndarray] = {self._loss_layer.name: np.asarray(1.0)}
        param_grads: Dict[str, List[NDArray]] = {}
        for layer in reversed(self.layers):
            params = [t.array for t in self._weights[layer.name]]
            grad_output = grads.get(layer.name)
            if grad_output is None:
                # output feeds nothing that reaches the loss
                param_grads[layer.name] = [NDArray(np.zeros(p.shape), copy=False) for p in params]
                continue
            input_grads, layer_param_grads = layer.backward(
                grad_output, inputs_of[layer.name], params, caches[layer.name]
            )
            param_grads[layer.name] = [NDArray(g, copy=False) for g in layer_param_grads]
            for name, grad in zip(getattr(layer.spec, "inputs", ()), input_grads):
                if grad is None:
                    continue
                grads[name] = grads[name] + grad if name in grads else grad

        return WeightCollection({layer.name: param_grads[layer.name] for layer in self.layers})

    def apply_gradient(self, gradient: WeightCollection) -> None:
        """One SGD step: w <- w - lr * g, or with momentum v <- mu * v + lr * g; w <- w - v"""
        if gradient.structure() != self._weights.structure():
            raise ShapeError("Gradient structure does not match the weights")
        if self.momentum == 0.0:
            for layer, tensors in self._weights.items():
                for weight, grad in zip(tensors, gradient[layer]):
                    weight.sub_scaled_(grad, self.learning_rate)
            return

        if self._velocity is None:
            self._velocity = WeightCollection(
                {
                    k: [NDArray(np.zeros(t.shape), copy=False) for t in v]
                    for k, v in self._weights.items()
                }
            )
        for layer, tensors in self._weights.items():
            velocities = self._velocity[layer]
            for i, (weight, grad) in enumerate(zip(tensors, gradient[layer])):
                velocity = NDArray(
                    self.momentum * velocities[i].array + self.learning_rate * grad.array,
                    copy=False,
                )
                velocities[i] = velocity
                weight.sub_scaled_(velocity, 1.0)

    def train(self, num_steps: int) -> None:
        if num_steps < 0:
            raise ValueError(f"num_steps must be >= 0, got {num_steps}")
        if num_steps == 0:
            return
        if self._training_data is None:
            raise RuntimeError("No training data attached")
        for _ in range(num_steps):
            self.apply_gradient(self.backward(next(self._training_data)))

    def test(self, num_steps: Optional[int] = None) -> float:
        """
        Top-1 accuracy over `num_steps` validation batches taken in order from
        the first example (cycling); None or 0 covers the validation set once.
        """
        if self._validation_data is None:
            raise RuntimeError("No validation data attached")
        batches = self._validation_batches
        if num_steps:
            batches = list(itertools.islice(itertools.cycle(batches), num_steps))
        correct = 0
        total = 0
        for batch in batches:
            _, probabilities = self.forward(batch)
            correct += int(np.sum(argmax_rows(probabilities) == batch.labels))
            total += batch.size
        return correct / total
