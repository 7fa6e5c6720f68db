#!/usr/bin/env python3
"""
Checkpoint Service
Binary checkpoint format for VaeModel. All integers are little-endian u32.

    magic "SCVX" | version | latent_dim
    layer table: count, then per layer
        section, kind code, kh, kw, sh, sw, in_channels, out_channels, t0, t1, t2
    parameter table: count, then per parameter
        name length, UTF-8 name, rank, dims..., little-endian float32 payload
    training trailer: epochs, seed, batch_size, lr (f64), kl_beta (f64),
        curve length, then (loss, bce, kl) f64 triples
"""

import struct
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from core.layers import Sequential
from models.error_models import CheckpointError, ContractError
from models.layer_models import LAYER_KIND_CODES, LAYER_KINDS_BY_CODE, LayerKind, LayerSpec, ModelSection
from models.vae_models import TrainingMeta
from services.vae_service import VaeModel

MAGIC = b"SCVX"
FORMAT_VERSION = 1
_LAYER_FIELDS = 11


def _u32(value: int) -> bytes:
    return struct.pack("<I", value)


def _encode_layer(section: ModelSection, spec: LayerSpec) -> bytes:
    target = spec.target_shape or (0, 0, 0)
    return struct.pack(
        f"<{_LAYER_FIELDS}I",
        int(section), LAYER_KIND_CODES[spec.kind],
        spec.kernel[0], spec.kernel[1], spec.stride[0], spec.stride[1],
        spec.in_channels, spec.out_channels, *target,
    )


def encode_checkpoint(model: VaeModel) -> bytes:
    parts = [MAGIC, _u32(FORMAT_VERSION), _u32(model.latent_dim)]

    layers = model.layer_specs()
    parts.append(_u32(len(layers)))
    parts.extend(_encode_layer(section, spec) for section, spec in layers)

    params = model.parameters()
    parts.append(_u32(len(params)))
    for p in params:
        name = p.name.encode("utf-8")
        data = p.value.data
        parts.append(_u32(len(name)) + name + _u32(data.ndim))
        parts.append(struct.pack(f"<{data.ndim}I", *data.shape))
        parts.append(np.ascontiguousarray(data, dtype="<f4").tobytes())

    meta = model.training_meta
    parts.append(struct.pack("<3I2d", meta.epochs, meta.seed, meta.batch_size, meta.lr, meta.kl_beta))
    parts.append(_u32(len(meta.losses)))
    for row in zip(meta.losses, meta.bce, meta.kl):
        parts.append(struct.pack("<3d", *row))
    return b"".join(parts)


def save_model(model: VaeModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(model))
    return path


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str) -> Tuple:
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise CheckpointError(f"truncated checkpoint: needed {size} more bytes, file has {len(self.data)}",
                                  offset=self.pos)
        values = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return values

    def raw(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise CheckpointError(f"truncated checkpoint: needed {size} more bytes, file has {len(self.data)}",
                                  offset=self.pos)
        chunk = self.data[self.pos:self.pos + size]
        self.pos += size
        return chunk


def _decode_layer(values: Tuple[int, ...], offset: int) -> Tuple[ModelSection, LayerSpec]:
    section, code, kh, kw, sh, sw, cin, cout, t0, t1, t2 = values
    try:
        kind = LAYER_KINDS_BY_CODE[code]
        spec = LayerSpec(
            kind=kind, kernel=(kh, kw), stride=(sh, sw), in_channels=cin, out_channels=cout,
            target_shape=(t0, t1, t2) if kind == LayerKind.RESHAPE else None,
        )
        return ModelSection(section), spec
    except (KeyError, ValueError) as e:
        raise CheckpointError(f"invalid layer record: {e}", offset=offset)


def decode_checkpoint(data: bytes, expected_latent_dim: Optional[int] = None) -> VaeModel:
    reader = _Reader(data)
    (magic,) = reader.take("<4s")
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    (version,) = reader.take("<I")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (this build reads {FORMAT_VERSION})", offset=4)
    (latent_dim,) = reader.take("<I")
    if expected_latent_dim is not None and latent_dim != expected_latent_dim:
        raise ContractError(f"checkpoint holds a latent-{latent_dim} model, expected latent-{expected_latent_dim}")

    (layer_count,) = reader.take("<I")
    sections = {section: [] for section in ModelSection}
    for _ in range(layer_count):
        offset = reader.pos
        section, spec = _decode_layer(reader.take(f"<{_LAYER_FIELDS}I"), offset)
        sections[section].append(spec)

    (param_count,) = reader.take("<I")
    arrays = {}
    for _ in range(param_count):
        (name_len,) = reader.take("<I")
        offset = reader.pos
        try:
            name = reader.raw(name_len).decode("utf-8")
        except UnicodeDecodeError:
            raise CheckpointError("parameter name is not valid UTF-8", offset=offset)
        (rank,) = reader.take("<I")
        dims = reader.take(f"<{rank}I")
        count = int(np.prod(dims)) if rank else 1
        arrays[name] = np.frombuffer(reader.raw(4 * count), dtype="<f4").astype(np.float32).reshape(dims)

    epochs, seed, batch_size, lr, kl_beta = reader.take("<3I2d")
    (curve_len,) = reader.take("<I")
    curve = [reader.take("<3d") for _ in range(curve_len)]
    if reader.pos != len(data):
        raise CheckpointError(f"{len(data) - reader.pos} unexpected trailing bytes", offset=reader.pos)
    meta = TrainingMeta(
        epochs=epochs, seed=seed, batch_size=batch_size, lr=lr, kl_beta=kl_beta,
        losses=[c[0] for c in curve], bce=[c[1] for c in curve], kl=[c[2] for c in curve],
    )

    decoder_specs = sections[ModelSection.DECODER]
    input_shape = Sequential(decoder_specs, "shape_check", np.random.default_rng(0)).output_shape((latent_dim,))
    model = VaeModel(latent_dim, sections[ModelSection.ENCODER], decoder_specs,
                     input_shape=input_shape, training_meta=meta)
    _check_heads(model, sections)
    _assign_parameters(model, arrays)
    return model


def _check_heads(model: VaeModel, sections) -> None:
    for section in (ModelSection.MEAN_HEAD, ModelSection.LOGVAR_HEAD):
        if sections[section] != model.sections()[section].specs:
            raise CheckpointError(f"{section.name.lower()} layers do not match the encoder/latent size")


def _assign_parameters(model: VaeModel, arrays) -> None:
    params = model.named_parameters()
    missing = sorted(set(params) - set(arrays))
    extra = sorted(set(arrays) - set(params))
    if missing or extra:
        raise CheckpointError(f"parameter set mismatch: missing {missing[:3]}, unexpected {extra[:3]}")
    for name, p in params.items():
        if arrays[name].shape != p.shape:
            raise CheckpointError(f"parameter {name} has shape {arrays[name].shape}, layers need {p.shape}")
        p.value.data = arrays[name].copy()


def load_model(path: Union[str, Path], expected_latent_dim: Optional[int] = None) -> VaeModel:
    """Load a checkpoint; with expected_latent_dim set, a model of any other size is refused"""
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError:
        raise FileNotFoundError(f"Checkpoint file not found: {path}")
    try:
        return decode_checkpoint(data, expected_latent_dim)
    except CheckpointError as e:
        error = CheckpointError(f"{path}: {e}")
        error.offset = e.offset
        raise error from e
