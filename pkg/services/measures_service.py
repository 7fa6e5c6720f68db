#!/usr/bin/env python3
"""
Measures Service
The compression measure, the Fourier mean-frequency measure, and the rules that
fold several measures into one value.
"""

import logging
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List, Optional, Sequence

import numpy as np

from models.error_models import ContractError, DimensionError, ShapeComplexityError
from models.mask_models import Mask
from models.score_models import COMBINED_COMPONENTS, Measure, ScoreTable, ScoreVector
from services.imaging_service import fill_ratio
from services.vae_service import VaeModel, vae_complexity

logger = logging.getLogger(__name__)

DEFLATE_LEVEL = 9
NYQUIST_NORM = float(np.sqrt(0.5 ** 2 + 0.5 ** 2))

# *** compression ***


def serialize_mask(m: Mask) -> bytes:
    """One byte per pixel, 0x00 black / 0xFF white, row-major"""
    return np.where(m.pixels >= 0.5, 0xFF, 0x00).astype(np.uint8).tobytes()


def deflate(data: bytes, level: int = DEFLATE_LEVEL) -> bytes:
    """Raw RFC 1951 stream, no zlib header or checksum"""
    compressor = zlib.compressobj(level, zlib.DEFLATED, -15)
    return compressor.compress(data) + compressor.flush()


def inflate(data: bytes) -> bytes:
    return zlib.decompress(data, -15)


def compression_complexity(m: Mask, level: int = DEFLATE_LEVEL) -> float:
    """min(1, compressed / uncompressed length) * (1 - fill_ratio)"""
    raw = serialize_mask(m)
    ratio = len(deflate(raw, level)) / len(raw)
    return min(1.0, ratio) * (1.0 - fill_ratio(m))


# *** Fourier ***


def _fft_radix2(x: np.ndarray) -> np.ndarray:
    """Recursive decimation-in-time FFT along the last axis; length must be a power of two"""
    n = x.shape[-1]
    if n == 1:
        return x.astype(np.complex128)
    if n & (n - 1):
        raise DimensionError(f"radix-2 FFT needs a power-of-two length, got {n}")
    even = _fft_radix2(x[..., 0::2])
    odd = _fft_radix2(x[..., 1::2]) * np.exp(-2j * np.pi * np.arange(n // 2) / n)
    return np.concatenate([even + odd, even - odd], axis=-1)


def fft2d(m) -> np.ndarray:
    """2D DFT of a mask (or any power-of-two square array); rows then columns"""
    a = m.pixels if isinstance(m, Mask) else np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"fft2d needs a 2-d array, got shape {a.shape}")
    return _fft_radix2(_fft_radix2(a).T).T


def _abs_frequencies(n: int) -> np.ndarray:
    """|signed frequency| in cycles per pixel; bin k maps to k or k - n, range [-n/2, n/2)"""
    k = np.arange(n)
    return np.abs(np.where(k < n // 2, k, k - n)) / n


def fft_complexity(m: Mask) -> float:
    """
    Power-weighted mean absolute frequency per axis (DC excluded), combined by
    the Euclidean norm and divided by the norm of the Nyquist corner.
    """
    a = m.pixels if isinstance(m, Mask) else np.asarray(m, dtype=np.float64)
    # inverted masks give the exact negated spectrum
    spectrum = fft2d(a - a.mean())
    power = spectrum.real ** 2 + spectrum.imag ** 2
    power[0, 0] = 0.0
    total = power.sum()
    if total == 0.0:
        return 0.0
    fy = float((power * _abs_frequencies(a.shape[0])[:, None]).sum() / total)
    fx = float((power * _abs_frequencies(a.shape[1])[None, :]).sum() / total)
    return min(1.0, float(np.hypot(fx, fy)) / NYQUIST_NORM)


# *** combination ***


def _component_values(scores: ScoreVector, components: Sequence[Measure]) -> np.ndarray:
    values = []
    for c in components:
        value = scores.get(c)
        if value is None:
            raise ContractError(f"shape {scores.shape_id} has no '{Measure(c).value}' score to combine")
        values.append(value)
    return np.asarray(values, dtype=np.float64)


def combine(scores: ScoreVector, components: Sequence[Measure]) -> float:
    """Euclidean magnitude of the chosen components divided by sqrt(n)"""
    if not components:
        raise ContractError("combine needs at least one component")
    values = _component_values(scores, components)
    return float(np.linalg.norm(values) / np.sqrt(len(components)))


def combine_equalized(all_scores: Sequence[ScoreVector], components: Sequence[Measure]) -> List[float]:
    """
    Min/max-rescale each component over the batch, then combine.

    A component with no spread contributes 0 for every shape. Only defined for
    batches, since the rescaling depends on the other shapes.
    """
    if len(all_scores) < 2:
        raise ContractError("equalized combination needs at least two shapes")
    if not components:
        raise ContractError("combine needs at least one component")
    matrix = np.stack([_component_values(s, components) for s in all_scores])
    lo, hi = matrix.min(axis=0), matrix.max(axis=0)
    spread = hi - lo
    safe = np.where(spread > 0, spread, 1.0)
    equalized = np.where(spread > 0, (matrix - lo) / safe, 0.0)
    return (np.linalg.norm(equalized, axis=1) / np.sqrt(len(components))).tolist()


def default_components(measures: Iterable[Measure]) -> List[Measure]:
    """Compression, FFT and (when scored) VAE, in that order"""
    measures = set(measures)
    return [c for c in COMBINED_COMPONENTS if c in measures]


def combined_columns(scores: Sequence[ScoreVector], components: Optional[Sequence[Measure]] = None) -> ScoreTable:
    """Attach the combined and (for two or more shapes) equalized combined values"""
    if components is None:
        present = set(Measure)
        for s in scores:
            present &= set(s.present())
        components = default_components(present)
    combined = {s.shape_id: (combine(s, components) if components else None) for s in scores}
    if len(scores) >= 2 and components:
        combined_eq = dict(zip([s.shape_id for s in scores], combine_equalized(scores, components)))
    else:
        combined_eq = {s.shape_id: None for s in scores}
    return ScoreTable(scores=list(scores), combined=combined, combined_eq=combined_eq)


# *** batch scoring ***


class MeasureService:
    """Service that scores masks with a fixed set of measures and optional VAE pair"""

    def __init__(
        self,
        measures: Sequence[Measure],
        model16: Optional[VaeModel] = None,
        model64: Optional[VaeModel] = None,
        deflate_level: int = DEFLATE_LEVEL,
    ):
        self.measures = [Measure(m) for m in measures]
        if not self.measures:
            raise ContractError("at least one measure must be requested")
        if Measure.VAE in self.measures and (model16 is None or model64 is None):
            raise ContractError("the vae measure needs both the latent-16 and latent-64 checkpoints")
        self.model16 = model16
        self.model64 = model64
        self.deflate_level = deflate_level

    def score(self, m: Mask) -> ScoreVector:
        values = {}
        if Measure.FILL in self.measures:
            values["fill"] = fill_ratio(m)
        if Measure.COMPRESSION in self.measures:
            values["compression"] = compression_complexity(m, self.deflate_level)
        if Measure.FFT in self.measures:
            values["fft"] = fft_complexity(m)
        if Measure.VAE in self.measures:
            values["vae"] = vae_complexity(self.model16, self.model64, m)
        return ScoreVector(shape_id=m.id, **values)

    def score_all(self, masks: Sequence[Mask], jobs: int = 1) -> List[ScoreVector]:
        """Score masks in input order; jobs > 1 spreads masks over a thread pool"""
        if jobs <= 1:
            return [self.score(m) for m in masks]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(self.score, masks))

    def score_or_skip(self, masks: Sequence[Mask], jobs: int = 1) -> List[ScoreVector]:
        """Like score_all, but shapes that cannot be scored are logged and dropped"""
        def _one(m: Mask) -> Optional[ScoreVector]:
            try:
                return self.score(m)
            except ShapeComplexityError as e:
                logger.warning("not scoring %s: %s", m.id, e)
                return None

        if jobs <= 1:
            results = [_one(m) for m in masks]
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_one, masks))
        return [r for r in results if r is not None]
