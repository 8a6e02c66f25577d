from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from parasgd.layers.base import Layer, Shape
from parasgd.models import DataLayer, LabelLayer, NetSpecError
from parasgd.tensor import ShapeError


class DataInput(Layer):
    def __init__(self, spec: DataLayer, input_shapes: Sequence[Shape] = ()):
        if len(spec.shape) != 4 or any(e < 1 for e in spec.shape):
            raise NetSpecError(
                f"{spec.name}: data shape must be [batch, c, h, w], got {spec.shape}"
            )
        self.spec = spec
        self.output_shape = tuple(spec.shape[1:])

    def forward(
        self, inputs: Sequence[np.ndarray], params: Sequence[np.ndarray]
    ) -> Tuple[np.ndarray, Any]:
        (images,) = inputs
        # any batch size goes, per-example extents must match
        if images.ndim != 4 or tuple(images.shape[1:]) != self.output_shape:
            raise ShapeError(
                f"{self.name}: expected images [n, {', '.join(map(str, self.output_shape))}], "
                f"got {list(images.shape)}"
            )
        return images, None

    def backward(
        self,
        grad_output: np.ndarray,
        inputs: Sequence[np.ndarray],
        params: Sequence[np.ndarray],
        cache: Any,
    ) -> Tuple[List[Optional[np.ndarray]], List[np.ndarray]]:
        return [None], []


class LabelInput(Layer):
    def __init__(self, spec: LabelLayer, input_shapes: Sequence[Shape] = ()):
        if len(spec.shape) != 2 or spec.shape[1] != 1:
            raise NetSpecError(f"{spec.name}: label shape must be [batch, 1], got {spec.shape}")
        self.spec = spec
        self.output_shape = (1,)

    def forward(
        self, inputs: Sequence[np.ndarray], params: Sequence[np.ndarray]
    ) -> Tuple[np.ndarray, Any]:
        (labels,) = inputs
        labels = np.asarray(labels).reshape(-1)
        return labels.astype(np.int64), None

    def backward(
        self,
        grad_output: np.ndarray,
        inputs: Sequence[np.ndarray],
        params: Sequence[np.ndarray],
        cache: Any,
    ) -> Tuple[List[Optional[np.ndarray]], List[np.ndarray]]:
        return [None], []
