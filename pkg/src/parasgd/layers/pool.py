from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from parasgd.layers.base import Layer, Shape
from parasgd.models import NetSpecError, Pooling, PoolLayer


class MaxPooling(Layer):
    """Valid max pooling; each window routes its gradient to one input, ties to the lowest index"""

    def __init__(self, spec: PoolLayer, input_shapes: Sequence[Shape]):
        (input_shape,) = input_shapes
        if spec.pool is not Pooling.MAX:
            raise NetSpecError(f"{spec.name}: only max pooling is supported")
        if len(input_shape) != 3:
            raise NetSpecError(f"{spec.name}: pool input must be [c, h, w], got {input_shape}")
        channels, height, width = input_shape
        kh, kw = spec.kernel
        if spec.stride < 1 or kh < 1 or kw < 1:
            raise NetSpecError(f"{spec.name}: kernel and stride must be positive")
        if kh > height or kw > width:
            raise NetSpecError(
                f"{spec.name}: pool kernel {spec.kernel} does not fit input {height}x{width}"
            )
        self.spec = spec
        self.output_shape = (
            channels,
            (height - kh) // spec.stride + 1,
            (width - kw) // spec.stride + 1,
        )

    def forward(
        self, inputs: Sequence[np.ndarray], params: Sequence[np.ndarray]
    ) -> Tuple[np.ndarray, Any]:
        (x,) = inputs
        kh, kw = self.spec.kernel
        stride = self.spec.stride
        _, oh, ow = self.output_shape
        windows = sliding_window_view(x, (kh, kw), axis=(2, 3))[
            :, :, : oh * stride : stride, : ow * stride : stride
        ]
        flat = windows.reshape(*windows.shape[:4], kh * kw)
        # argmax picks the first maximum in row-major window order
        argmax = flat.argmax(axis=-1)
        out = np.take_along_axis(flat, argmax[..., None], axis=-1)[..., 0]
        return out, argmax

    def backward(
        self,
        grad_output: np.ndarray,
        inputs: Sequence[np.ndarray],
        params: Sequence[np.ndarray],
        cache: Any,
    ) -> Tuple[List[Optional[np.ndarray]], List[np.ndarray]]:
        (x,) = inputs
        argmax = cache
        _, kw = self.spec.kernel
        stride = self.spec.stride
        n, channels, oh, ow = grad_output.shape

        rows = np.arange(oh)[None, None, :, None] * stride + argmax // kw
        cols = np.arange(ow)[None, None, None, :] * stride + argmax % kw
        batch_idx = np.arange(n)[:, None, None, None]
        channel_idx = np.arange(channels)[None, :, None, None]

        grad_x = np.zeros_like(x)
        # overlapping windows (stride < kernel) may hit one input twice
        np.add.at(grad_x, (batch_idx, channel_idx, rows, cols), grad_output)
        return [grad_x], []
