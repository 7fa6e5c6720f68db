from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class Measure(str, Enum):
    FILL = "fill"
    COMPRESSION = "compression"
    FFT = "fft"
    VAE = "vae"


class RankKey(str, Enum):
    """Everything a ranking can be ordered by"""
    FILL = "fill"
    COMPRESSION = "compression"
    FFT = "fft"
    VAE = "vae"
    COMBINED = "combined"
    COMBINED_EQ = "combined_eq"


SCORE_CSV_HEADER = ["id", "fill", "compression", "fft", "vae", "combined", "combined_eq"]

# The combined measure is compression, FFT and VAE; fill ratio stays out of it.
COMBINED_COMPONENTS = [Measure.COMPRESSION, Measure.FFT, Measure.VAE]


class ScoreVector(BaseModel):
    """Per-shape measure values; absent measures are None"""
    shape_id: str
    fill: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    compression: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    fft: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    vae: Optional[float] = Field(default=None, ge=0.0, le=1.0)

    def get(self, measure: Measure) -> Optional[float]:
        return getattr(self, Measure(measure).value)

    def present(self) -> List[Measure]:
        return [m for m in Measure if self.get(m) is not None]


class ScoreTable(BaseModel):
    """Rows of a scores CSV with the batch-level combined columns"""
    scores: List[ScoreVector]
    combined: Dict[str, Optional[float]] = {}
    combined_eq: Dict[str, Optional[float]] = {}
