from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from parasgd.layers.base import Layer, Shape
from parasgd.models import Activation, ActivationLayer, NetSpecError


class ReLU(Layer):
    def __init__(self, spec: ActivationLayer, input_shapes: Sequence[Shape]):
        (input_shape,) = input_shapes
        if spec.activation is not Activation.RELU:
            raise NetSpecError(f"{spec.name}: unsupported activation {spec.activation}")
        self.spec = spec
        self.output_shape = tuple(input_shape)

    def forward(
        self, inputs: Sequence[np.ndarray], params: Sequence[np.ndarray]
    ) -> Tuple[np.ndarray, Any]:
        (x,) = inputs
        active = x > 0
        return np.where(active, x, 0.0), active

    def backward(
        self,
        grad_output: np.ndarray,
        inputs: Sequence[np.ndarray],
        params: Sequence[np.ndarray],
        cache: Any,
    ) -> Tuple[List[Optional[np.ndarray]], List[np.ndarray]]:
        return [np.where(cache, grad_output, 0.0)], []
