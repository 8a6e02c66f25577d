from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from parasgd.layers.base import Layer, Shape
from parasgd.models import LinearLayer, NetSpecError


class InnerProduct(Layer):
    """
    Fully connected layer on the flattened input.

    weight: (num_outputs, fan_in)
    bias:   (num_outputs,)
    """

    def __init__(self, spec: LinearLayer, input_shapes: Sequence[Shape]):
        (input_shape,) = input_shapes
        if spec.num_outputs < 1:
            raise NetSpecError(f"{spec.name}: numOutputs must be positive")
        self.spec = spec
        self.fan_in = int(np.prod(input_shape))
        self.output_shape = (spec.num_outputs,)

    def param_shapes(self) -> List[Shape]:
        return [(self.spec.num_outputs, self.fan_in), (self.spec.num_outputs,)]

    def fans(self) -> Tuple[int, int]:
        return self.fan_in, self.spec.num_outputs

    def forward(
        self, inputs: Sequence[np.ndarray], params: Sequence[np.ndarray]
    ) -> Tuple[np.ndarray, Any]:
        (x,) = inputs
        weight, bias = params
        flat = x.reshape(x.shape[0], self.fan_in)
        return flat @ weight.T + bias, flat

    def backward(
        self,
        grad_output: np.ndarray,
        inputs: Sequence[np.ndarray],
        params: Sequence[np.ndarray],
        cache: Any,
    ) -> Tuple[List[Optional[np.ndarray]], List[np.ndarray]]:
        (x,) = inputs
        weight, _ = params
        flat = cache
        grad_weight = grad_output.T @ flat
        grad_bias = grad_output.sum(axis=0)
        grad_x = (grad_output @ weight).reshape(x.shape)
        return [grad_x], [grad_weight, grad_bias]
