from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from parasgd.layers.base import Layer, Shape
from parasgd.models import NetSpecError, SoftmaxWithLoss


class SoftmaxLoss(Layer):
    """
    Softmax followed by the batch-mean cross entropy.

    Output is the scalar loss (shape ()); the cache holds the probabilities.
    """

    def __init__(self, spec: SoftmaxWithLoss, input_shapes: Sequence[Shape]):
        if len(input_shapes) != 2:
            raise NetSpecError(f"{spec.name}: needs inputs (logits, label)")
        logits_shape, _ = input_shapes
        self.spec = spec
        self.num_classes = int(np.prod(logits_shape))
        self.output_shape = ()

    def forward(
        self, inputs: Sequence[np.ndarray], params: Sequence[np.ndarray]
    ) -> Tuple[np.ndarray, Any]:
        logits, labels = inputs
        n = logits.shape[0]
        if labels.shape != (n,):
            raise ValueError(f"{self.name}: {n} logits rows but {labels.shape[0]} labels")
        if n and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ValueError(f"{self.name}: labels outside [0, {self.num_classes})")

        z = logits.reshape(n, self.num_classes)
        shifted = z - z.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        total = exp.sum(axis=1, keepdims=True)
        probabilities = exp / total
        log_probabilities = shifted - np.log(total)
        loss = -log_probabilities[np.arange(n), labels].mean()
        return np.asarray(loss), probabilities

    def backward(
        self,
        grad_output: np.ndarray,
        inputs: Sequence[np.ndarray],
        params: Sequence[np.ndarray],
        cache: Any,
    ) -> Tuple[List[Optional[np.ndarray]], List[np.ndarray]]:
        logits, labels = inputs
        probabilities = cache
        n = logits.shape[0]
        grad = probabilities.copy()
        grad[np.arange(n), labels] -= 1.0
        grad *= float(grad_output) / n
        return [grad.reshape(logits.shape), None], []
