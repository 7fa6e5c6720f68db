#!/usr/bin/env python3
"""
VAE Service
Builds, trains and applies the two bottlenecked VAEs, and turns the disagreement
of their reconstructions into a complexity score.
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from core import functional as F
from core.layers import Sequential
from core.optim import Adam
from core.tensor import Parameter, Tensor, no_grad
from models.error_models import ContractError, DimensionError, UndefinedScoreError
from models.layer_models import LayerSpec, ModelSection
from models.mask_models import MASK_SIZE, Mask
from models.vae_models import Reconstruction, TrainingMeta
from services.imaging_service import augment

logger = logging.getLogger(__name__)

ENCODER_FEATURES = 64 * 6 * 6


def default_encoder() -> List[LayerSpec]:
    """64x64x1 -> 62 -> 31 -> 29 -> 14 -> 12 -> 6, ending in 6x6x64, flattened"""
    return [
        LayerSpec.conv2d(1, 16), LayerSpec.relu(), LayerSpec.maxpool2d(2),
        LayerSpec.conv2d(16, 32), LayerSpec.relu(), LayerSpec.maxpool2d(2),
        LayerSpec.conv2d(32, 64), LayerSpec.relu(), LayerSpec.maxpool2d(2),
        LayerSpec.flatten(),
    ]


def default_decoder(latent_dim: int) -> List[LayerSpec]:
    """latent -> 2304 -> 64x6x6 -> 13 -> 27 -> 55 -> 57 -> 59 -> 64x64x1"""
    return [
        LayerSpec.linear(latent_dim, ENCODER_FEATURES),
        LayerSpec.reshape(64, 6, 6),
        LayerSpec.tconv2d(64, 64, 3, 2), LayerSpec.relu(),
        LayerSpec.tconv2d(64, 32, 3, 2), LayerSpec.relu(),
        LayerSpec.tconv2d(32, 16, 3, 2), LayerSpec.relu(),
        LayerSpec.tconv2d(16, 16, 3, 1), LayerSpec.relu(),
        LayerSpec.tconv2d(16, 8, 3, 1), LayerSpec.relu(),
        LayerSpec.tconv2d(8, 1, 6, 1), LayerSpec.sigmoid(),
    ]


class VaeModel:
    """Encoder, mean/logvar heads and decoder for one latent size"""

    def __init__(
        self,
        latent_dim: int,
        encoder_specs: Sequence[LayerSpec],
        decoder_specs: Sequence[LayerSpec],
        input_shape: Tuple[int, int, int] = (1, MASK_SIZE, MASK_SIZE),
        rng: Optional[np.random.Generator] = None,
        dtype=np.float32,
        training_meta: Optional[TrainingMeta] = None,
    ):
        if latent_dim < 1:
            raise ContractError(f"latent_dim must be positive, got {latent_dim}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.latent_dim = latent_dim
        self.input_shape = tuple(input_shape)
        self.dtype = np.dtype(dtype)
        self.training_meta = training_meta or TrainingMeta()

        self.encoder = Sequential(encoder_specs, "encoder", rng, dtype)
        (features,) = self.encoder.output_shape(self.input_shape)
        self.mean_head = Sequential([LayerSpec.linear(features, latent_dim)], "mean", rng, dtype)
        self.logvar_head = Sequential([LayerSpec.linear(features, latent_dim)], "logvar", rng, dtype)
        self.decoder = Sequential(decoder_specs, "decoder", rng, dtype)
        out_shape = self.decoder.output_shape((latent_dim,))
        if out_shape != self.input_shape:
            raise DimensionError(f"decoder produces {out_shape}, expected {self.input_shape}")

    @classmethod
    def build(cls, latent_dim: int, seed: int = 0, dtype=np.float32) -> "VaeModel":
        return cls(latent_dim, default_encoder(), default_decoder(latent_dim),
                   rng=np.random.default_rng(seed), dtype=dtype)

    def sections(self) -> Dict[ModelSection, Sequential]:
        return {
            ModelSection.ENCODER: self.encoder,
            ModelSection.MEAN_HEAD: self.mean_head,
            ModelSection.LOGVAR_HEAD: self.logvar_head,
            ModelSection.DECODER: self.decoder,
        }

    def parameters(self) -> List[Parameter]:
        return [p for section in self.sections().values() for p in section.parameters()]

    def named_parameters(self) -> Dict[str, Parameter]:
        return {p.name: p for p in self.parameters()}

    def layer_specs(self) -> List[Tuple[ModelSection, LayerSpec]]:
        return [(section, spec) for section, seq in self.sections().items() for spec in seq.specs]

    # *** batched forward passes on tensors ***

    def encode_tensor(self, x: Tensor) -> Tuple[Tensor, Tensor]:
        features = self.encoder(x)
        return self.mean_head(features), self.logvar_head(features)

    def decode_tensor(self, z: Tensor) -> Tensor:
        return self.decoder(z)

    def as_batch(self, pixels: np.ndarray) -> Tensor:
        pixels = np.asarray(pixels)
        if pixels.shape[-2:] != self.input_shape[1:]:
            raise DimensionError(f"model expects {self.input_shape[1]}x{self.input_shape[2]} input, got {pixels.shape}")
        return Tensor(pixels.reshape((-1,) + self.input_shape).astype(self.dtype))


def _pixels(m: Union[Mask, np.ndarray]) -> np.ndarray:
    return m.pixels if isinstance(m, Mask) else np.asarray(m, dtype=np.float64)


def encode(model: VaeModel, m: Union[Mask, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    with no_grad():
        mean, logvar = model.encode_tensor(model.as_batch(_pixels(m)))
    return mean.data[0].copy(), logvar.data[0].copy()


def reparameterize_tensor(mean: Tensor, logvar: Tensor, eps: np.ndarray) -> Tensor:
    return mean + (logvar * 0.5).exp() * Tensor(eps.astype(mean.dtype))


def reparameterize(
    mean: np.ndarray,
    logvar: np.ndarray,
    rng: Optional[np.random.Generator] = None,
    deterministic: bool = False,
) -> np.ndarray:
    """z = mean + exp(0.5 * logvar) * eps, eps ~ N(0, 1); eps = 0 in deterministic mode"""
    mean = np.asarray(mean)
    if deterministic:
        return mean.copy()
    if rng is None:
        raise ContractError("sampling needs a generator; pass deterministic=True for z = mean")
    eps = rng.standard_normal(mean.shape)
    return mean + np.exp(0.5 * np.asarray(logvar)) * eps


def decode(model: VaeModel, z: np.ndarray) -> Reconstruction:
    z = np.asarray(z, dtype=model.dtype).reshape(1, model.latent_dim)
    with no_grad():
        out = model.decode_tensor(Tensor(z))
    return Reconstruction(pixels=out.data[0, 0].copy())


def reconstruct(model: VaeModel, m: Union[Mask, np.ndarray]) -> Reconstruction:
    """Deterministic reconstruction through z = mean"""
    mean, _ = encode(model, m)
    return decode(model, mean)


def loss_tensor(recon: Tensor, target: np.ndarray, mean: Tensor, logvar: Tensor, beta: float = 1.0) -> Tuple[Tensor, Tensor, Tensor]:
    """Summed BCE and KL over the batch; returns (total, bce, kl)"""
    bce = F.binary_cross_entropy_sum(recon, target)
    kl = F.kl_divergence(mean, logvar)
    return bce + kl * beta, bce, kl


def loss(m: Union[Mask, np.ndarray], recon: Union[Reconstruction, np.ndarray], mean: np.ndarray,
         logvar: np.ndarray, beta: float = 1.0) -> float:
    """Pixel-summed BCE(recon, m) + beta * KL(N(mean, exp(logvar)) || N(0, I))"""
    target = _pixels(m).astype(np.float64)
    pred = recon.pixels if isinstance(recon, Reconstruction) else np.asarray(recon)
    total, _, _ = loss_tensor(Tensor(np.asarray(pred, dtype=np.float64)), target,
                              Tensor(np.asarray(mean, dtype=np.float64)),
                              Tensor(np.asarray(logvar, dtype=np.float64)), beta)
    return total.item()


def train(
    dataset: Sequence[Mask],
    latent_dim: int,
    epochs: int = 50,
    batch_size: int = 32,
    lr: float = 1e-3,
    seed: int = 0,
    beta: float = 1.0,
    beta1: float = 0.9,
    beta2: float = 0.999,
    adam_eps: float = 1e-8,
    model: Optional[VaeModel] = None,
) -> VaeModel:
    """
    Train one VAE with Adam on augmented masks.

    Initialization, shuffling, augmentation and sampling noise draw from
    independent streams spawned from `seed`, so runs are bit-reproducible.
    """
    if not dataset:
        raise ContractError("cannot train on an empty dataset")
    if batch_size < 1:
        raise ContractError(f"batch_size must be positive, got {batch_size}")
    init_seq, data_seq, noise_seq = np.random.SeedSequence(seed).spawn(3)
    if model is None:
        model = VaeModel(latent_dim, default_encoder(), default_decoder(latent_dim),
                         rng=np.random.default_rng(init_seq))
    elif model.latent_dim != latent_dim:
        raise ContractError(f"model has latent_dim {model.latent_dim}, asked to train {latent_dim}")
    data_rng = np.random.default_rng(data_seq)
    noise_rng = np.random.default_rng(noise_seq)
    optimizer = Adam(model.parameters(), lr=lr, beta1=beta1, beta2=beta2, eps=adam_eps)
    meta = TrainingMeta(epochs=epochs, seed=seed, batch_size=batch_size, lr=lr, kl_beta=beta)

    if epochs == 0:
        logger.warning("epochs=0: returning the initial weights of the latent-%d model untrained", latent_dim)

    n = len(dataset)
    for epoch in range(epochs):
        order = data_rng.permutation(n)
        totals = np.zeros(3)
        for start in range(0, n, batch_size):
            batch = [augment(dataset[i], data_rng).pixels for i in order[start:start + batch_size]]
            target = np.stack(batch)[:, None, :, :]
            x = model.as_batch(target)
            mean, logvar = model.encode_tensor(x)
            eps = noise_rng.standard_normal(mean.shape)
            recon = model.decode_tensor(reparameterize_tensor(mean, logvar, eps))
            total, bce, kl = loss_tensor(recon, target, mean, logvar, beta)
            (total / len(batch)).backward()
            optimizer.step()
            totals += (total.item(), bce.item(), kl.item())
        epoch_loss, epoch_bce, epoch_kl = (totals / n).tolist()
        meta.losses.append(epoch_loss)
        meta.bce.append(epoch_bce)
        meta.kl.append(epoch_kl)
        logger.info("latent-%d epoch %d/%d loss=%.4f bce=%.4f kl=%.4f",
                    latent_dim, epoch + 1, epochs, epoch_loss, epoch_bce, epoch_kl)

    model.training_meta = meta
    return model


def vae_complexity(model16: VaeModel, model64: VaeModel, m: Mask) -> float:
    """CS = min(1, sum|recon64 - recon16| / sum(m)) with deterministic (z = mean) reconstructions"""
    white = float(m.pixels.sum())
    if white == 0.0:
        raise UndefinedScoreError(f"mask {m.id or '<unnamed>'} has no white pixels; the VAE score is undefined")
    r16 = reconstruct(model16, m).pixels.astype(np.float64)
    r64 = reconstruct(model64, m).pixels.astype(np.float64)
    return min(1.0, float(np.abs(r64 - r16).sum()) / white)


def mean_reconstruction_bce(model: VaeModel, masks: Sequence[Mask]) -> float:
    """Mean per-mask summed BCE of deterministic reconstructions, no augmentation"""
    if not masks:
        raise ContractError("need at least one mask")
    totals = []
    for m in masks:
        pred = Tensor(reconstruct(model, m).pixels.astype(np.float64))
        totals.append(F.binary_cross_entropy_sum(pred, m.pixels).item())
    return float(np.mean(totals))
