__all__ = [
    "Layer",
    "DataInput",
    "LabelInput",
    "Convolution",
    "MaxPooling",
    "InnerProduct",
    "ReLU",
    "SoftmaxLoss",
    "construct_layer",
]

from typing import Sequence

from parasgd.layers.activation import ReLU
from parasgd.layers.base import Layer, Shape
from parasgd.layers.conv import Convolution
from parasgd.layers.data import DataInput, LabelInput
from parasgd.layers.linear import InnerProduct
from parasgd.layers.pool import MaxPooling
from parasgd.layers.softmax import SoftmaxLoss
from parasgd.models import (
    ActivationLayer,
    ConvLayer,
    DataLayer,
    LabelLayer,
    LayerSpec,
    LinearLayer,
    NetSpecError,
    PoolLayer,
    SoftmaxWithLoss,
)

_LAYER_KINDS = {
    DataLayer: DataInput,
    LabelLayer: LabelInput,
    ConvLayer: Convolution,
    PoolLayer: MaxPooling,
    LinearLayer: InnerProduct,
    ActivationLayer: ReLU,
    SoftmaxWithLoss: SoftmaxLoss,
}


def construct_layer(spec: LayerSpec, input_shapes: Sequence[Shape]) -> Layer:
    try:
        layer_cls = _LAYER_KINDS[type(spec)]
    except KeyError:
        raise NetSpecError(f"Unsupported layer kind: {type(spec).__name__}") from None
    return layer_cls(spec, input_shapes)
