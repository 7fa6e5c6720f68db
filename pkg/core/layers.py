"""Layer objects built from LayerSpec records, and a Sequential container"""

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core import functional as F
from core.tensor import Parameter, Tensor
from models.error_models import DimensionError
from models.layer_models import LayerKind, LayerSpec


def _uniform(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int, dtype) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Layer:
    def __init__(self, spec: LayerSpec, name: str):
        self.spec = spec
        self.name = name

    def parameters(self) -> List[Parameter]:
        return []

    def __call__(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def output_shape(self, shape: Tuple[int, ...]) -> Tuple[int, ...]:
        """Per-sample output shape (no batch axis) for a per-sample input shape"""
        return shape


class Conv2d(Layer):
    def __init__(self, spec: LayerSpec, name: str, rng: np.random.Generator, dtype):
        super().__init__(spec, name)
        kh, kw = spec.kernel
        fan_in = spec.in_channels * kh * kw
        self.weight = Parameter(f"{name}.weight", Tensor(
            _uniform(rng, (spec.out_channels, spec.in_channels, kh, kw), fan_in, dtype)))
        self.bias = Parameter(f"{name}.bias", Tensor(np.zeros(spec.out_channels, dtype=dtype)))

    def parameters(self) -> List[Parameter]:
        return [self.weight, self.bias]

    def __call__(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight.value, self.bias.value, self.spec.stride)

    def output_shape(self, shape):
        c, h, w = shape
        if c != self.spec.in_channels:
            raise DimensionError(f"{self.name} expects {self.spec.in_channels} channels, got {c}")
        (kh, kw), (sh, sw) = self.spec.kernel, self.spec.stride
        return self.spec.out_channels, F.conv_output_size(h, kh, sh), F.conv_output_size(w, kw, sw)


class ConvTranspose2d(Layer):
    def __init__(self, spec: LayerSpec, name: str, rng: np.random.Generator, dtype):
        super().__init__(spec, name)
        kh, kw = spec.kernel
        fan_in = spec.in_channels * kh * kw
        self.weight = Parameter(f"{name}.weight", Tensor(
            _uniform(rng, (spec.in_channels, spec.out_channels, kh, kw), fan_in, dtype)))
        self.bias = Parameter(f"{name}.bias", Tensor(np.zeros(spec.out_channels, dtype=dtype)))

    def parameters(self) -> List[Parameter]:
        return [self.weight, self.bias]

    def __call__(self, x: Tensor) -> Tensor:
        return F.conv_transpose2d(x, self.weight.value, self.bias.value, self.spec.stride)

    def output_shape(self, shape):
        c, h, w = shape
        if c != self.spec.in_channels:
            raise DimensionError(f"{self.name} expects {self.spec.in_channels} channels, got {c}")
        (kh, kw), (sh, sw) = self.spec.kernel, self.spec.stride
        return self.spec.out_channels, F.tconv_output_size(h, kh, sh), F.tconv_output_size(w, kw, sw)


class MaxPool2d(Layer):
    def __call__(self, x: Tensor) -> Tensor:
        out, _ = F.max_pool2d(x, self.spec.kernel)
        return out

    def output_shape(self, shape):
        c, h, w = shape
        kh, kw = self.spec.kernel
        return c, h // kh, w // kw


class Linear(Layer):
    def __init__(self, spec: LayerSpec, name: str, rng: np.random.Generator, dtype):
        super().__init__(spec, name)
        self.weight = Parameter(f"{name}.weight", Tensor(
            _uniform(rng, (spec.in_channels, spec.out_channels), spec.in_channels, dtype)))
        self.bias = Parameter(f"{name}.bias", Tensor(np.zeros(spec.out_channels, dtype=dtype)))

    def parameters(self) -> List[Parameter]:
        return [self.weight, self.bias]

    def __call__(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight.value, self.bias.value)

    def output_shape(self, shape):
        if int(np.prod(shape)) != self.spec.in_channels or len(shape) != 1:
            raise DimensionError(f"{self.name} expects {self.spec.in_channels} features, got {shape}")
        return (self.spec.out_channels,)


class ReLU(Layer):
    def __call__(self, x: Tensor) -> Tensor:
        return F.relu(x)


class Sigmoid(Layer):
    def __call__(self, x: Tensor) -> Tensor:
        return F.sigmoid(x)


class Flatten(Layer):
    def __call__(self, x: Tensor) -> Tensor:
        return F.flatten(x)

    def output_shape(self, shape):
        return (int(np.prod(shape)),)


class Reshape(Layer):
    def __call__(self, x: Tensor) -> Tensor:
        return F.reshape(x, self.spec.target_shape)

    def output_shape(self, shape):
        if int(np.prod(shape)) != int(np.prod(self.spec.target_shape)):
            raise DimensionError(f"{self.name} cannot reshape {shape} to {self.spec.target_shape}")
        return tuple(self.spec.target_shape)


_PARAMETRIC = {
    LayerKind.CONV2D: Conv2d,
    LayerKind.TCONV2D: ConvTranspose2d,
    LayerKind.LINEAR: Linear,
}
_STATELESS = {
    LayerKind.MAXPOOL2D: MaxPool2d,
    LayerKind.RELU: ReLU,
    LayerKind.SIGMOID: Sigmoid,
    LayerKind.FLATTEN: Flatten,
    LayerKind.RESHAPE: Reshape,
}


def build_layer(spec: LayerSpec, name: str, rng: np.random.Generator, dtype=np.float32) -> Layer:
    if spec.kind in _PARAMETRIC:
        return _PARAMETRIC[spec.kind](spec, name, rng, dtype)
    return _STATELESS[spec.kind](spec, name)


class Sequential:
    """Layers applied in order; parameter names are '<prefix>.<index>.<weight|bias>'"""

    def __init__(self, specs: Sequence[LayerSpec], prefix: str, rng: np.random.Generator, dtype=np.float32):
        self.specs = list(specs)
        self.layers = [build_layer(spec, f"{prefix}.{i}", rng, dtype) for i, spec in enumerate(self.specs)]

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x

    def parameters(self) -> List[Parameter]:
        return [p for layer in self.layers for p in layer.parameters()]

    def named_parameters(self) -> Dict[str, Parameter]:
        return {p.name: p for p in self.parameters()}

    def output_shape(self, shape: Tuple[int, ...], trace: Optional[list] = None) -> Tuple[int, ...]:
        for layer in self.layers:
            shape = layer.output_shape(tuple(shape))
            if trace is not None:
                trace.append((layer.spec.kind, shape))
        return tuple(shape)
