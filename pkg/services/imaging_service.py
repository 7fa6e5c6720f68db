#!/usr/bin/env python3
"""
Imaging Service
Decodes and encodes PGM/PNG files, turns raw images into 64x64 binary masks,
and applies the training augmentation.
"""

import io
import logging
import os
import struct
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import png
from skimage.transform import rotate

from models.error_models import DecodeError, EmptyShapeError
from models.mask_models import MASK_SIZE, AugmentParams, Mask, RawImage

logger = logging.getLogger(__name__)

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
IMAGE_SUFFIXES = (".pgm", ".png")
DEFAULT_THRESHOLD = 128
MAX_ROTATION = 85.0

# *** decoding ***


def _pgm_tokens(data: bytes, count: int) -> Tuple[List[int], int]:
    """Read `count` whitespace separated integers after the magic, skipping # comments"""
    values, pos = [], 2
    while len(values) < count:
        if pos >= len(data):
            raise DecodeError("truncated PGM header", offset=pos)
        ch = data[pos:pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
        else:
            start = pos
            while pos < len(data) and data[pos:pos + 1].isdigit():
                pos += 1
            if pos == start:
                raise DecodeError(f"unexpected byte {ch!r} in PGM header", offset=start)
            values.append(int(data[start:pos]))
    return values, pos


def _rescale(pixels: np.ndarray, maxval: int) -> np.ndarray:
    if maxval == 255:
        return pixels.astype(np.uint8)
    return ((pixels.astype(np.int64) * 255 + maxval // 2) // maxval).astype(np.uint8)


def _decode_pgm(data: bytes) -> RawImage:
    (width, height, maxval), pos = _pgm_tokens(data, 3)
    if width < 1 or height < 1:
        raise DecodeError(f"PGM dimensions must be positive, got {width}x{height}", offset=2)
    if not 1 <= maxval <= 65535:
        raise DecodeError(f"PGM maxval {maxval} out of range", offset=2)
    count = width * height

    if data[:2] == b"P5":
        # exactly one whitespace byte separates the header from the raster
        pos += 1
        sample_size = 1 if maxval < 256 else 2
        expected = count * sample_size
        payload = data[pos:pos + expected]
        if len(payload) < expected:
            raise DecodeError(
                f"truncated PGM raster: expected {expected} bytes, found {len(payload)}",
                offset=pos + len(payload),
            )
        dtype = np.uint8 if sample_size == 1 else np.dtype(">u2")
        pixels = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    else:
        tokens = data[pos:].split()
        if len(tokens) < count:
            raise DecodeError(f"truncated P2 raster: expected {count} samples, found {len(tokens)}", offset=len(data))
        try:
            pixels = np.array([int(t) for t in tokens[:count]], dtype=np.int64).reshape(height, width)
        except ValueError:
            raise DecodeError("non-numeric sample in P2 raster", offset=pos)
        if pixels.max(initial=0) > maxval:
            raise DecodeError(f"P2 sample exceeds maxval {maxval}", offset=pos)
    return RawImage(width=width, height=height, pixels=_rescale(pixels, maxval))


def _check_png_chunks(data: bytes) -> int:
    """Walk the chunk table, reporting truncation by byte offset; returns the offset of the first IDAT chunk"""
    pos = len(PNG_SIGNATURE)
    first_idat = None
    while True:
        if pos + 8 > len(data):
            raise DecodeError("truncated PNG chunk header", offset=pos)
        length, kind = struct.unpack(">I4s", data[pos:pos + 8])
        end = pos + 12 + length
        if end > len(data):
            raise DecodeError(f"truncated PNG {kind.decode('latin-1')} chunk", offset=len(data))
        if kind == b"IDAT" and first_idat is None:
            first_idat = pos
        if kind == b"IEND":
            return pos if first_idat is None else first_idat
        pos = end


def _decode_png(data: bytes) -> RawImage:
    stream_offset = _check_png_chunks(data)
    try:
        width, height, rows, info = png.Reader(bytes=data).asDirect()
        planes = info["planes"]
        array = np.vstack([np.asarray(row, dtype=np.uint32) for row in rows])
    except (png.Error, ValueError) as e:
        raise DecodeError(f"corrupt PNG stream: {e}", offset=stream_offset)
    array = array.reshape(height, width, planes)
    if info["bitdepth"] > 8:
        array = array >> (info["bitdepth"] - 8)
    elif info["bitdepth"] < 8:
        array = array * 255 // ((1 << info["bitdepth"]) - 1)
    if info["greyscale"]:
        gray = array[:, :, 0]
    else:
        r, g, b = array[:, :, 0], array[:, :, 1], array[:, :, 2]
        gray = (299 * r + 587 * g + 114 * b + 500) // 1000
    return RawImage(width=width, height=height, pixels=gray.astype(np.uint8))


def decode_image(data: bytes) -> RawImage:
    if data[:2] in (b"P5", b"P2"):
        return _decode_pgm(data)
    if data[:8] == PNG_SIGNATURE:
        return _decode_png(data)
    if data[:4] == b"GIF8":
        raise DecodeError("GIF images are not supported; convert them to PNG or PGM first", offset=0)
    raise DecodeError("unsupported image format (expected PGM P2/P5 or PNG)", offset=0)


def load_image(path: Union[str, Path]) -> RawImage:
    """Decode a PGM (P2/P5) or PNG file into an 8-bit grayscale RawImage"""
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError:
        raise FileNotFoundError(f"Image file not found: {path}")
    try:
        return decode_image(data)
    except DecodeError as e:
        error = DecodeError(f"{path}: {e}")
        error.offset = e.offset
        raise error from e


# *** encoding ***


def _as_gray_bytes(image: Union[RawImage, Mask, np.ndarray]) -> np.ndarray:
    if isinstance(image, RawImage):
        return image.pixels
    if isinstance(image, Mask):
        return (np.round(image.pixels * 255)).astype(np.uint8)
    return np.asarray(image, dtype=np.uint8)


def encode_pgm(image: Union[RawImage, Mask, np.ndarray]) -> bytes:
    pixels = _as_gray_bytes(image)
    height, width = pixels.shape
    return f"P5\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes()


def encode_png(pixels: np.ndarray) -> bytes:
    """(H, W) uint8 -> grayscale PNG, (H, W, 3) uint8 -> RGB PNG"""
    pixels = np.asarray(pixels, dtype=np.uint8)
    height, width = pixels.shape[:2]
    greyscale = pixels.ndim == 2
    writer = png.Writer(width=width, height=height, greyscale=greyscale, bitdepth=8, compression=9)
    rows = pixels.reshape(height, -1)
    buffer = io.BytesIO()
    writer.write(buffer, rows.tolist())
    return buffer.getvalue()


def save_image(path: Union[str, Path], image: Union[RawImage, Mask, np.ndarray]) -> Path:
    """Write P5 PGM or PNG depending on the file suffix"""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        payload = encode_pgm(image)
    elif suffix == ".png":
        payload = encode_png(_as_gray_bytes(image) if not isinstance(image, np.ndarray) or image.ndim == 2 else image)
    else:
        raise ValueError(f"cannot infer image format from suffix '{path.suffix}' (use .pgm or .png)")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(payload)
    return path


# *** preprocessing ***


def _area_weights(source: int, target: int = MASK_SIZE) -> np.ndarray:
    """(target, source) matrix averaging source pixels over each target bin"""
    edges = np.arange(target + 1) * (source / target)
    lo = np.maximum(edges[:-1, None], np.arange(source)[None, :])
    hi = np.minimum(edges[1:, None], np.arange(source)[None, :] + 1)
    return np.clip(hi - lo, 0.0, None) * (target / source)


def preprocess(img: RawImage, threshold: int = DEFAULT_THRESHOLD, shape_id: str = "") -> Mask:
    """
    Binarize, crop to the minimum centered square around the foreground,
    area-average down (or up) to 64x64 and re-binarize at 0.5.
    """
    fg = img.pixels >= threshold
    rows = np.flatnonzero(fg.any(axis=1))
    cols = np.flatnonzero(fg.any(axis=0))
    if rows.size == 0:
        raise EmptyShapeError(f"image {shape_id or '<unnamed>'} has no foreground pixels at threshold {threshold}")
    r0, r1, c0, c1 = rows[0], rows[-1], cols[0], cols[-1]
    h, w = r1 - r0 + 1, c1 - c0 + 1
    side = max(h, w)
    top = r0 - (side - h) // 2
    left = c0 - (side - w) // 2

    square = np.zeros((side, side), dtype=np.float64)
    src_r0, src_r1 = max(top, 0), min(top + side, img.height)
    src_c0, src_c1 = max(left, 0), min(left + side, img.width)
    square[src_r0 - top:src_r1 - top, src_c0 - left:src_c1 - left] = fg[src_r0:src_r1, src_c0:src_c1]

    weights = _area_weights(side)
    resized = weights @ square @ weights.T
    return Mask(id=shape_id, pixels=(resized >= 0.5).astype(np.float64))


def binarize(img: RawImage, threshold: int = DEFAULT_THRESHOLD, shape_id: str = "") -> Mask:
    """Threshold an image that is already 64x64, without cropping"""
    return Mask(id=shape_id, pixels=(img.pixels >= threshold).astype(np.float64))


def fill_ratio(m: Mask) -> float:
    return float(m.pixels.sum() / (MASK_SIZE * MASK_SIZE))


# *** augmentation ***


def draw_augment_params(rng: np.random.Generator) -> AugmentParams:
    """Each transform applies with p=0.5; the angle is always drawn to keep the stream aligned"""
    hflip = bool(rng.random() < 0.5)
    vflip = bool(rng.random() < 0.5)
    rotate_it = bool(rng.random() < 0.5)
    angle = float(rng.uniform(-MAX_ROTATION, MAX_ROTATION))
    return AugmentParams(hflip=hflip, vflip=vflip, angle=angle if rotate_it else None)


def apply_augmentation(m: Mask, params: AugmentParams) -> Mask:
    pixels = m.pixels
    if params.hflip:
        pixels = pixels[:, ::-1]
    if params.vflip:
        pixels = pixels[::-1, :]
    if params.angle:
        rotated = rotate(np.array(pixels), params.angle, resize=False, order=1, mode="constant", cval=0.0,
                         preserve_range=True)
        pixels = (rotated >= 0.5).astype(np.float64)
    return m.with_pixels(pixels)


def augment(m: Mask, rng: np.random.Generator) -> Mask:
    return apply_augmentation(m, draw_augment_params(rng))


# *** datasets ***


class MaskDatasetService:
    """Service for reading and writing directories of mask images"""

    def __init__(self, threshold: int = DEFAULT_THRESHOLD):
        self.threshold = threshold

    @staticmethod
    def list_image_files(directory: Union[str, Path]) -> List[Path]:
        """Image files in lexicographic filename order"""
        directory = Path(directory)
        if not directory.is_dir():
            raise FileNotFoundError(f"Dataset directory not found: {directory}")
        return sorted(
            (p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES),
            key=lambda p: p.name,
        )

    def to_mask(self, img: RawImage, shape_id: str) -> Mask:
        """64x64 images are thresholded only; anything else runs the full preprocess"""
        if img.width == MASK_SIZE and img.height == MASK_SIZE:
            return binarize(img, self.threshold, shape_id)
        return preprocess(img, self.threshold, shape_id)

    def load_mask(self, path: Union[str, Path]) -> Mask:
        path = Path(path)
        return self.to_mask(load_image(path), path.stem)

    def load_dataset(self, directory: Union[str, Path], skipped: Optional[List[Tuple[Path, str]]] = None) -> List[Mask]:
        """Load every decodable image; undecodable files are logged and reported through `skipped`"""
        masks, seen = [], {}
        for path in self.list_image_files(directory):
            if path.stem in seen:
                reason = f"duplicate id '{path.stem}' (already loaded from {seen[path.stem].name})"
                logger.warning("skipping %s: %s", path.name, reason)
                if skipped is not None:
                    skipped.append((path, reason))
                continue
            try:
                masks.append(self.load_mask(path))
                seen[path.stem] = path
            except (DecodeError, EmptyShapeError) as e:
                logger.warning("skipping %s: %s", path.name, e)
                if skipped is not None:
                    skipped.append((path, str(e)))
        return masks

    def preprocess_directory(self, in_dir: Union[str, Path], out_dir: Union[str, Path]) -> Tuple[List[Path], List[Tuple[Path, str]]]:
        """Preprocess every image into `<out_dir>/<stem>.pgm`"""
        out_dir = Path(out_dir)
        os.makedirs(out_dir, exist_ok=True)
        written, skipped = [], []
        for path in self.list_image_files(in_dir):
            try:
                mask = preprocess(load_image(path), self.threshold, path.stem)
            except (DecodeError, EmptyShapeError) as e:
                logger.warning("skipping %s: %s", path.name, e)
                skipped.append((path, str(e)))
                continue
            written.append(save_image(out_dir / f"{path.stem}.pgm", mask))
        return written, skipped
