from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


class TrainingMeta(BaseModel):
    """What a checkpoint remembers about how it was trained"""
    epochs: int = Field(default=0, ge=0)
    seed: int = Field(default=0, ge=0, lt=2**32)
    batch_size: int = Field(default=32, gt=0)
    lr: float = 1e-3
    kl_beta: float = 1.0
    losses: List[float] = []
    bce: List[float] = []
    kl: List[float] = []


class Reconstruction(BaseModel):
    """Unthresholded decoder output, values strictly inside (0, 1)"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    pixels: np.ndarray

    @field_validator("pixels")
    @classmethod
    def _check_range(cls, pixels: np.ndarray) -> np.ndarray:
        if pixels.ndim != 2:
            raise ValueError(f"reconstruction must be 2-d, got shape {pixels.shape}")
        if pixels.size and (pixels.min() <= 0.0 or pixels.max() >= 1.0):
            raise ValueError("reconstruction values must lie strictly inside (0, 1)")
        return pixels
