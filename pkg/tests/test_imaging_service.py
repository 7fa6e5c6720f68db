import io

import numpy as np
import png
import pytest

from models.error_models import DecodeError, EmptyShapeError
from models.mask_models import AugmentParams, RawImage
from services.imaging_service import (
    MaskDatasetService,
    apply_augmentation,
    augment,
    decode_image,
    encode_pgm,
    fill_ratio,
    load_image,
    preprocess,
    save_image,
)
from tests.conftest import make_mask


def _raw(pixels) -> RawImage:
    pixels = np.asarray(pixels, dtype=np.uint8)
    return RawImage(width=pixels.shape[1], height=pixels.shape[0], pixels=pixels)


def _png_bytes(rows, **kwargs) -> bytes:
    buffer = io.BytesIO()
    png.Writer(**kwargs).write(buffer, rows)
    return buffer.getvalue()


# *** decoding ***


def test_decode_binary_pgm():
    img = decode_image(b"P5 2 2 255\n\x00\xff\x00\xff")
    assert (img.width, img.height) == (2, 2)
    np.testing.assert_array_equal(img.pixels, [[0, 255], [0, 255]])


def test_decode_ascii_pgm_with_comments_and_rescale():
    img = decode_image(b"P2\n# made by hand\n3 1\n# max\n15\n0 15 5\n")
    np.testing.assert_array_equal(img.pixels, [[0, 255, 85]])


def test_decode_16_bit_pgm_is_rescaled():
    img = decode_image(b"P5\n2 1\n65535\n\xff\xff\x80\x00")
    np.testing.assert_array_equal(img.pixels, [[255, 128]])


def test_truncated_pgm_names_the_offset():
    with pytest.raises(DecodeError) as err:
        decode_image(b"P5\n4 4\n255\n" + b"\x00" * 10)
    assert err.value.offset == 21
    assert "offset 21" in str(err.value)


def test_decode_rgb_png_uses_integer_luma():
    data = _png_bytes([[255, 0, 0, 0, 255, 0, 255, 255, 255]], width=3, height=1, greyscale=False)
    np.testing.assert_array_equal(decode_image(data).pixels, [[76, 150, 255]])


def test_decode_16_bit_png_keeps_high_byte():
    data = _png_bytes([[0xABCD, 0x00FF]], width=2, height=1, greyscale=True, bitdepth=16)
    np.testing.assert_array_equal(decode_image(data).pixels, [[0xAB, 0x00]])


def test_decode_png_with_alpha_drops_it():
    data = _png_bytes([[200, 0, 100, 255]], width=2, height=1, greyscale=True, alpha=True)
    np.testing.assert_array_equal(decode_image(data).pixels, [[200, 100]])


def test_truncated_png_is_a_decode_error():
    data = _png_bytes([[1, 2], [3, 4]], width=2, height=2, greyscale=True)
    with pytest.raises(DecodeError, match="truncated"):
        decode_image(data[:-20])


def test_corrupt_png_stream_names_the_idat_offset():
    data = bytearray(_png_bytes([[1, 2], [3, 4]], width=2, height=2, greyscale=True))
    idat = data.index(b"IDAT") - 4
    data[idat + 8] ^= 0xFF
    with pytest.raises(DecodeError, match="corrupt") as err:
        decode_image(bytes(data))
    assert err.value.offset == idat


def test_gif_is_refused_with_advice():
    with pytest.raises(DecodeError, match="convert"):
        decode_image(b"GIF89a\x01\x00\x01\x00")


def test_unknown_format_is_refused():
    with pytest.raises(DecodeError):
        decode_image(b"BM\x00\x00")


@pytest.mark.parametrize("suffix", [".pgm", ".png"])
def test_save_load_round_trip_is_pixel_exact(tmp_path, suffix):
    pixels = np.random.default_rng(0).integers(0, 256, size=(5, 7), dtype=np.uint8)
    path = save_image(tmp_path / f"img{suffix}", _raw(pixels))
    np.testing.assert_array_equal(load_image(path).pixels, pixels)


def test_encode_pgm_header():
    assert encode_pgm(_raw([[1, 2, 3]])) == b"P5\n3 1\n255\n\x01\x02\x03"


def test_load_image_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "nope.pgm")


def test_load_image_decode_error_keeps_offset_and_path(tmp_path):
    path = tmp_path / "short.pgm"
    path.write_bytes(b"P5\n4 4\n255\n" + b"\x00" * 10)
    with pytest.raises(DecodeError, match="short.pgm") as err:
        load_image(path)
    assert err.value.offset == 21


# *** preprocessing ***


def test_full_frame_white_square_is_unchanged():
    m = preprocess(_raw(np.full((64, 64), 255)))
    assert m.pixels.min() == 1.0


def test_rectangle_is_centered_in_a_square_crop():
    field = np.zeros((100, 100), dtype=np.uint8)
    field[40:50, 30:50] = 255  # 10 rows by 20 columns
    m = preprocess(_raw(field), shape_id="rect")
    rows = np.flatnonzero(m.pixels.any(axis=1))
    cols = np.flatnonzero(m.pixels.any(axis=0))
    assert cols[0] == 0 and cols[-1] == 63
    assert abs(len(rows) - 32) <= 1
    assert abs(rows[0] - (63 - rows[-1])) <= 1
    assert m.is_binary()
    assert m.id == "rect"


def test_tiny_shape_is_upscaled_to_fill_the_frame():
    field = np.zeros((10, 10), dtype=np.uint8)
    field[4:7, 4:7] = 200
    assert preprocess(_raw(field)).pixels.min() == 1.0


def test_threshold_decides_foreground():
    field = np.zeros((8, 8), dtype=np.uint8)
    field[2:4, 2:4] = 100
    with pytest.raises(EmptyShapeError):
        preprocess(_raw(field), threshold=128)
    assert preprocess(_raw(field), threshold=100).pixels.min() == 1.0


def test_all_black_is_an_empty_shape():
    with pytest.raises(EmptyShapeError):
        preprocess(_raw(np.zeros((20, 30))))


def test_preprocess_is_idempotent_on_full_square_masks(disc):
    once = preprocess(_raw(disc.pixels * 255))
    twice = preprocess(_raw(once.pixels * 255))
    np.testing.assert_array_equal(once.pixels, twice.pixels)


# *** augmentation ***


def _l_shape():
    pixels = np.zeros((64, 64))
    pixels[10:50, 10:20] = 1.0
    pixels[40:50, 10:40] = 1.0
    return make_mask(pixels, "L")


def test_both_flips_equal_hand_flipped_array():
    m = _l_shape()
    out = apply_augmentation(m, AugmentParams(hflip=True, vflip=True))
    np.testing.assert_array_equal(out.pixels, m.pixels[::-1, ::-1])
    assert out.id == "L"


def test_zero_angle_leaves_mask_unchanged():
    m = _l_shape()
    np.testing.assert_array_equal(apply_augmentation(m, AugmentParams(angle=0.0)).pixels, m.pixels)


def test_rotation_angle_is_limited():
    with pytest.raises(ValueError):
        AugmentParams(angle=90.0)


def test_augmentation_keeps_binary_alphabet_and_disc_area(disc):
    rng = np.random.default_rng(0)
    original = disc.pixels.sum()
    for _ in range(1000):
        out = augment(disc, rng)
        assert out.is_binary()
        assert abs(out.pixels.sum() - original) <= 0.05 * original


def test_rotation_of_read_only_mask_pixels(star):
    assert not star.pixels.flags.writeable
    out = apply_augmentation(star, AugmentParams(hflip=True, vflip=True, angle=30.0))
    assert out.is_binary()
    assert out.pixels.sum() > 0
    assert not star.pixels.flags.writeable


def test_flips_keep_fill_ratio_exactly(star):
    flipped = apply_augmentation(star, AugmentParams(hflip=True))
    assert fill_ratio(flipped) == fill_ratio(star)


def test_fill_ratio_examples(all_black, all_white):
    assert fill_ratio(all_black) == 0.0
    assert fill_ratio(all_white) == 1.0
    half = np.zeros((64, 64))
    half[:32] = 1.0
    assert fill_ratio(make_mask(half)) == 0.5


# *** datasets ***


def test_dataset_loading_orders_skips_and_deduplicates(tmp_path, disc):
    save_image(tmp_path / "b.pgm", disc)
    save_image(tmp_path / "a.png", disc)
    save_image(tmp_path / "a.pgm", disc)
    (tmp_path / "broken.pgm").write_bytes(b"P5\n64 64\n255\n\x00")
    (tmp_path / "notes.txt").write_text("ignored")
    skipped = []
    masks = MaskDatasetService().load_dataset(tmp_path, skipped)
    assert [m.id for m in masks] == ["a", "b"]
    assert sorted(p.name for p, _ in skipped) == ["a.png", "broken.pgm"]


def test_full_size_images_are_thresholded_only(tmp_path):
    pixels = np.zeros((64, 64), dtype=np.uint8)
    pixels[0:4, 0:4] = 255
    save_image(tmp_path / "corner.pgm", _raw(pixels))
    m = MaskDatasetService().load_mask(tmp_path / "corner.pgm")
    assert m.pixels.sum() == 16


def test_preprocess_directory_is_idempotent(tmp_path):
    src, out1, out2 = tmp_path / "src", tmp_path / "out1", tmp_path / "out2"
    field = np.zeros((80, 120), dtype=np.uint8)
    field[10:70, 30:60] = 255
    save_image(src / "bar.png", _raw(field))
    save_image(src / "blank.pgm", _raw(np.zeros((5, 5))))
    written, skipped = MaskDatasetService().preprocess_directory(src, out1)
    assert [p.name for p in written] == ["bar.pgm"]
    assert [p.name for p in skipped] == ["blank.pgm"]
    MaskDatasetService().preprocess_directory(out1, out2)
    assert (out1 / "bar.pgm").read_bytes() == (out2 / "bar.pgm").read_bytes()
