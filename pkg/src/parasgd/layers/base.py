from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from parasgd.models import LayerSpec

# per-example shape, batch axis excluded
Shape = Tuple[int, ...]


class Layer:
    def __init__(self, spec: LayerSpec, input_shapes: Sequence[Shape]):
        raise NotImplementedError("Layer.__init__() not implemented")

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def spec(self) -> LayerSpec:
        return self._spec

    @spec.setter
    def spec(self, value: LayerSpec) -> None:
        self._spec = value

    @property
    def output_shape(self) -> Shape:
        return self._output_shape

    @output_shape.setter
    def output_shape(self, value: Shape) -> None:
        self._output_shape = value

    def param_shapes(self) -> List[Shape]:
        """Shapes of the learnable tensors, in WeightCollection order"""
        return []

    def fans(self) -> Tuple[int, int]:
        """(fan_in, fan_out) for the uniform initialization bound"""
        raise NotImplementedError("Layer.fans() not implemented")

    def forward(
        self, inputs: Sequence[np.ndarray], params: Sequence[np.ndarray]
    ) -> Tuple[np.ndarray, Any]:
        """Returns (output, cache); the cache is handed back to backward()"""
        raise NotImplementedError("Layer.forward() not implemented")

    def backward(
        self,
        grad_output: np.ndarray,
        inputs: Sequence[np.ndarray],
        params: Sequence[np.ndarray],
        cache: Any,
    ) -> Tuple[List[Optional[np.ndarray]], List[np.ndarray]]:
        """Returns (gradient per input or None, gradient per param)"""
        raise NotImplementedError("Layer.backward() not implemented")
