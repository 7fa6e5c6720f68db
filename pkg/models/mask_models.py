from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

MASK_SIZE = 64


class RawImage(BaseModel):
    """Decoded grayscale image, pixels as uint8 in (height, width) layout"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    width: int = Field(gt=0)
    height: int = Field(gt=0)
    pixels: np.ndarray

    @model_validator(mode="after")
    def _check_pixels(self):
        if self.pixels.dtype != np.uint8:
            raise ValueError(f"pixels must be uint8, got {self.pixels.dtype}")
        if self.pixels.shape != (self.height, self.width):
            raise ValueError(
                f"pixel array shape {self.pixels.shape} does not match {self.height}x{self.width}"
            )
        return self


class Mask(BaseModel):
    """A 64x64 shape mask with values in [0, 1]; white (1) is foreground"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    id: str
    pixels: np.ndarray

    @field_validator("pixels")
    @classmethod
    def _check_pixels(cls, pixels: np.ndarray) -> np.ndarray:
        if pixels.shape != (MASK_SIZE, MASK_SIZE):
            raise ValueError(f"mask must be {MASK_SIZE}x{MASK_SIZE}, got {pixels.shape}")
        pixels = np.array(pixels, dtype=np.float64)
        if pixels.min() < 0.0 or pixels.max() > 1.0:
            raise ValueError("mask pixels must lie in [0, 1]")
        pixels.setflags(write=False)
        return pixels

    @property
    def width(self) -> int:
        return MASK_SIZE

    @property
    def height(self) -> int:
        return MASK_SIZE

    def is_binary(self) -> bool:
        return bool(np.all((self.pixels == 0.0) | (self.pixels == 1.0)))

    def with_pixels(self, pixels: np.ndarray) -> "Mask":
        return Mask(id=self.id, pixels=np.array(pixels, dtype=np.float64))


class AugmentParams(BaseModel):
    """One draw of the training augmentation; angle is None when no rotation applies"""
    hflip: bool = False
    vflip: bool = False
    angle: Optional[float] = Field(default=None, ge=-85.0, le=85.0)


class ShapeKind(str, Enum):
    DISC = "disc"
    RECTANGLE = "rectangle"
    REGULAR_POLYGON = "regular_polygon"
    STAR = "star"
    NOISE = "noise"


class ShapeSpec(BaseModel):
    """Parameters for one synthetic shape. Lengths are in pixels, angles in degrees."""
    kind: ShapeKind
    radius: float = 20.0
    width: float = 32.0
    height: float = 32.0
    sides: int = 5
    points: int = 5
    inner_ratio: float = 0.5
    p: float = 0.5
    center_x: float = MASK_SIZE / 2
    center_y: float = MASK_SIZE / 2
    rotation: float = 0.0
