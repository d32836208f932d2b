"""Layer graph descriptions and the standard presets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple, Union

from .im2col import conv_output_shape


@dataclass(frozen=True)
class FullyConnected:
    inputs: int
    outputs: int
    activation: str = "sigmoid"

    def matrix_shape(self, bias: bool = True):
        return (self.outputs, self.inputs + int(bias))

    weight_sharing = 1


@dataclass(frozen=True)
class ConvAsMatrix:
    """Valid, stride-1 convolution computed as ``W @ im2col(x)``, optionally 2x2 max-pooled."""

    kernel: int
    in_ch: int
    out_ch: int
    input_shape: Tuple[int, int]
    pooling: bool = True
    activation: str = "tanh"

    def matrix_shape(self, bias: bool = True):
        return (self.out_ch, self.in_ch * self.kernel * self.kernel + int(bias))

    @property
    def conv_shape(self):
        return conv_output_shape(self.input_shape[0], self.input_shape[1], self.kernel)

    @property
    def weight_sharing(self) -> int:
        oh, ow = self.conv_shape
        return oh * ow

    @property
    def output_shape(self):
        oh, ow = self.conv_shape
        if self.pooling:
            return (self.out_ch, oh // 2, ow // 2)
        return (self.out_ch, oh, ow)

    @property
    def output_size(self) -> int:
        c, h, w = self.output_shape
        return c * h * w


@dataclass(frozen=True)
class LSTMBlock:
    """One LSTM layer; its gates share a single (4*hidden) x (input + hidden + 1) matrix."""

    hidden: int
    inputs: int

    def matrix_shape(self, bias: bool = True):
        return (4 * self.hidden, self.inputs + self.hidden + int(bias))


Layer = Union[FullyConnected, ConvAsMatrix, LSTMBlock]


@dataclass
class NetworkSpec:
    layers: List[Layer]
    loss: str = "cross_entropy_softmax"
    bias: bool = True
    input_shape: Tuple[int, ...] = None

    def __post_init__(self):
        self.validate()

    @property
    def is_recurrent(self) -> bool:
        return any(isinstance(layer, LSTMBlock) for layer in self.layers)

    def matrix_shapes(self):
        return [layer.matrix_shape(self.bias) for layer in self.layers]

    def weight_sharing(self, unroll_steps: int = 1):
        if self.is_recurrent:
            return [unroll_steps] * len(self.layers)
        return [getattr(layer, "weight_sharing", 1) for layer in self.layers]

    def validate(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        if self.loss != "cross_entropy_softmax":
            raise ValueError(f"unsupported loss {self.loss!r}")
        prev = None
        for i, layer in enumerate(self.layers):
            if isinstance(layer, ConvAsMatrix):
                if prev is not None and prev != (layer.in_ch, *layer.input_shape):
                    raise ValueError(f"layer {i}: conv input {layer.in_ch}x{layer.input_shape} does not match {prev}")
                prev = layer.output_shape
            elif isinstance(layer, FullyConnected):
                size = prev if isinstance(prev, int) or prev is None else prev[0] * prev[1] * prev[2]
                if size is not None and size != layer.inputs:
                    raise ValueError(f"layer {i}: expects {layer.inputs} inputs, previous layer gives {size}")
                prev = layer.outputs
            elif isinstance(layer, LSTMBlock):
                if prev is not None and prev != layer.inputs:
                    raise ValueError(f"layer {i}: LSTM expects {layer.inputs} inputs, previous gives {prev}")
                prev = layer.hidden
            else:
                raise TypeError(f"unknown layer type {type(layer).__name__}")
        last = self.layers[-1]
        if not isinstance(last, FullyConnected) or last.activation != "softmax":
            raise ValueError("last layer must be a fully connected softmax layer")


def fcn_mnist(hidden=(256, 128)) -> NetworkSpec:
    sizes = [784, *hidden, 10]
    layers = [FullyConnected(a, b, "sigmoid") for a, b in zip(sizes[:-2], sizes[1:-1])]
    layers.append(FullyConnected(sizes[-2], 10, "softmax"))
    return NetworkSpec(layers, input_shape=(784,))


def cnn_mnist() -> NetworkSpec:
    c1 = ConvAsMatrix(5, 1, 16, (28, 28))
    c2 = ConvAsMatrix(5, 16, 32, c1.output_shape[1:])
    return NetworkSpec(
        [c1, c2, FullyConnected(c2.output_size, 128, "tanh"), FullyConnected(128, 10, "softmax")],
        input_shape=(1, 28, 28),
    )


def lstm_wp(vocab: int = 87, hidden: int = 64) -> NetworkSpec:
    return NetworkSpec(
        [LSTMBlock(hidden, vocab), LSTMBlock(hidden, hidden), FullyConnected(hidden, vocab, "softmax")],
        input_shape=(vocab,),
    )


def toy(inputs: int = 8, hidden: int = 16, classes: int = 4) -> NetworkSpec:
    return NetworkSpec(
        [FullyConnected(inputs, hidden, "sigmoid"), FullyConnected(hidden, classes, "softmax")],
        input_shape=(inputs,),
    )
