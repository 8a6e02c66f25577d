from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from parasgd.layers.base import Layer, Shape
from parasgd.models import ConvLayer, NetSpecError


class Convolution(Layer):
    """
    Valid padding, stride 1, direct evaluation through an im2col matrix.

    kernel: (num_filters, channels, kh, kw)
    bias:   (num_filters,)
    """

    def __init__(self, spec: ConvLayer, input_shapes: Sequence[Shape]):
        (input_shape,) = input_shapes
        if len(input_shape) != 3:
            raise NetSpecError(f"{spec.name}: conv input must be [c, h, w], got {input_shape}")
        channels, height, width = input_shape
        kh, kw = spec.kernel
        if spec.num_filters < 1 or kh < 1 or kw < 1:
            raise NetSpecError(f"{spec.name}: kernel and numFilters must be positive")
        if kh > height or kw > width:
            raise NetSpecError(
                f"{spec.name}: kernel {spec.kernel} does not fit input {height}x{width}"
            )
        self.spec = spec
        self.channels = channels
        self.output_shape = (spec.num_filters, height - kh + 1, width - kw + 1)

    def param_shapes(self) -> List[Shape]:
        kh, kw = self.spec.kernel
        return [(self.spec.num_filters, self.channels, kh, kw), (self.spec.num_filters,)]

    def fans(self) -> Tuple[int, int]:
        kh, kw = self.spec.kernel
        return self.channels * kh * kw, self.spec.num_filters * kh * kw

    def _columns(self, x: np.ndarray) -> np.ndarray:
        n = x.shape[0]
        kh, kw = self.spec.kernel
        _, oh, ow = self.output_shape
        windows = sliding_window_view(x, (kh, kw), axis=(2, 3))  # n, c, oh, ow, kh, kw
        return windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, self.channels * kh * kw)

    def forward(
        self, inputs: Sequence[np.ndarray], params: Sequence[np.ndarray]
    ) -> Tuple[np.ndarray, Any]:
        (x,) = inputs
        kernel, bias = params
        n = x.shape[0]
        filters, oh, ow = self.output_shape
        cols = self._columns(x)
        out = cols @ kernel.reshape(filters, -1).T + bias
        return out.reshape(n, oh, ow, filters).transpose(0, 3, 1, 2), cols

    def backward(
        self,
        grad_output: np.ndarray,
        inputs: Sequence[np.ndarray],
        params: Sequence[np.ndarray],
        cache: Any,
    ) -> Tuple[List[Optional[np.ndarray]], List[np.ndarray]]:
        (x,) = inputs
        kernel, _ = params
        cols = cache
        n = x.shape[0]
        kh, kw = self.spec.kernel
        filters, oh, ow = self.output_shape

        grad = grad_output.transpose(0, 2, 3, 1).reshape(-1, filters)
        grad_kernel = (grad.T @ cols).reshape(kernel.shape)
        grad_bias = grad.sum(axis=0)

        grad_cols = (grad @ kernel.reshape(filters, -1)).reshape(n, oh, ow, self.channels, kh, kw)
        grad_x = np.zeros_like(x)
        for i in range(kh):
            for j in range(kw):
                grad_x[:, :, i : i + oh, j : j + ow] += grad_cols[:, :, :, :, i, j].transpose(
                    0, 3, 1, 2
                )
        return [grad_x], [grad_kernel, grad_bias]
