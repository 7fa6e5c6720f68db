from enum import Enum, IntEnum
from typing import Optional, Tuple

from pydantic import BaseModel, Field, model_validator


class LayerKind(str, Enum):
    CONV2D = "conv2d"
    TCONV2D = "tconv2d"
    MAXPOOL2D = "maxpool2d"
    LINEAR = "linear"
    RELU = "relu"
    SIGMOID = "sigmoid"
    FLATTEN = "flatten"
    RESHAPE = "reshape"


# Stable on-disk codes; never renumber.
LAYER_KIND_CODES = {
    LayerKind.CONV2D: 1,
    LayerKind.TCONV2D: 2,
    LayerKind.MAXPOOL2D: 3,
    LayerKind.LINEAR: 4,
    LayerKind.RELU: 5,
    LayerKind.SIGMOID: 6,
    LayerKind.FLATTEN: 7,
    LayerKind.RESHAPE: 8,
}
LAYER_KINDS_BY_CODE = {code: kind for kind, code in LAYER_KIND_CODES.items()}


class ModelSection(IntEnum):
    ENCODER = 0
    MEAN_HEAD = 1
    LOGVAR_HEAD = 2
    DECODER = 3


class LayerSpec(BaseModel):
    """Declarative description of one layer, recorded in checkpoints"""
    kind: LayerKind
    kernel: Tuple[int, int] = (1, 1)
    stride: Tuple[int, int] = (1, 1)
    in_channels: int = Field(default=0, ge=0)
    out_channels: int = Field(default=0, ge=0)
    # (channels, height, width) for reshape layers only
    target_shape: Optional[Tuple[int, int, int]] = None

    @model_validator(mode="after")
    def _check_geometry(self):
        if self.kind in (LayerKind.CONV2D, LayerKind.TCONV2D, LayerKind.MAXPOOL2D):
            if min(self.kernel) < 1 or min(self.stride) < 1:
                raise ValueError(f"{self.kind.value} needs kernel and stride >= 1")
        if self.kind in (LayerKind.CONV2D, LayerKind.TCONV2D, LayerKind.LINEAR):
            if self.in_channels < 1 or self.out_channels < 1:
                raise ValueError(f"{self.kind.value} needs positive in/out channels")
        if self.kind == LayerKind.RESHAPE:
            if self.target_shape is None or min(self.target_shape) < 1:
                raise ValueError("reshape needs a positive target_shape")
        return self

    @classmethod
    def conv2d(cls, in_channels: int, out_channels: int, kernel: int = 3, stride: int = 1) -> "LayerSpec":
        return cls(kind=LayerKind.CONV2D, kernel=(kernel, kernel), stride=(stride, stride),
                   in_channels=in_channels, out_channels=out_channels)

    @classmethod
    def tconv2d(cls, in_channels: int, out_channels: int, kernel: int = 3, stride: int = 1) -> "LayerSpec":
        return cls(kind=LayerKind.TCONV2D, kernel=(kernel, kernel), stride=(stride, stride),
                   in_channels=in_channels, out_channels=out_channels)

    @classmethod
    def maxpool2d(cls, window: int = 2) -> "LayerSpec":
        return cls(kind=LayerKind.MAXPOOL2D, kernel=(window, window), stride=(window, window))

    @classmethod
    def linear(cls, in_features: int, out_features: int) -> "LayerSpec":
        return cls(kind=LayerKind.LINEAR, in_channels=in_features, out_channels=out_features)

    @classmethod
    def relu(cls) -> "LayerSpec":
        return cls(kind=LayerKind.RELU)

    @classmethod
    def sigmoid(cls) -> "LayerSpec":
        return cls(kind=LayerKind.SIGMOID)

    @classmethod
    def flatten(cls) -> "LayerSpec":
        return cls(kind=LayerKind.FLATTEN)

    @classmethod
    def reshape(cls, channels: int, height: int, width: int) -> "LayerSpec":
        return cls(kind=LayerKind.RESHAPE, target_shape=(channels, height, width))
