from pathlib import Path
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from models.score_models import Measure


class RunConfig(BaseModel):
    """Resolved settings for one command run (defaults < env < --config file < flags)"""
    model_config = ConfigDict(extra="forbid")

    dataset_dir: Optional[Path] = None
    output_dir: Optional[Path] = None
    seed: int = Field(default=0, ge=0, lt=2**32)
    latent_dims: List[int] = [16, 64]
    epochs: int = Field(default=50, ge=0)
    batch_size: int = Field(default=32, gt=0)
    lr: float = Field(default=1e-3, gt=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    adam_eps: float = Field(default=1e-8, gt=0)
    kl_beta: float = Field(default=1.0, ge=0)
    measures: List[Measure] = [Measure.FILL, Measure.COMPRESSION, Measure.FFT, Measure.VAE]
    threshold: int = Field(default=128, ge=0, le=255)
    jobs: int = Field(default=1, ge=1)
    deflate_level: int = Field(default=9, ge=0, le=9)

    @field_validator("latent_dims")
    @classmethod
    def _check_latent_dims(cls, dims: List[int]) -> List[int]:
        if not dims:
            raise ValueError("at least one latent dimension is required")
        if any(d <= 0 for d in dims):
            raise ValueError(f"latent dimensions must be positive, got {dims}")
        if len(set(dims)) != len(dims):
            raise ValueError(f"latent dimensions must be distinct, got {dims}")
        return dims

    @field_validator("measures")
    @classmethod
    def _check_measures(cls, measures: List[Measure]) -> List[Measure]:
        if not measures:
            raise ValueError("at least one measure is required")
        if len(set(measures)) != len(measures):
            raise ValueError(f"duplicate measures in {[m.value for m in measures]}")
        return measures

    def echo(self) -> str:
        return self.model_dump_json()


class RunMetadata(BaseModel):
    """Sidecar written next to every CSV output; holds no timestamps so reruns stay byte-identical"""
    command: str
    seed: int
    measures: List[str] = []
    deflate_level: int = 9
    threshold: int = 128
    latent_dims: List[int] = []
    checkpoint_latent_dims: List[int] = []
    options: Dict[str, str] = {}
