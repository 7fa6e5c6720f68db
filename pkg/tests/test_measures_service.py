import numpy as np
import pytest

from models.error_models import ContractError
from models.mask_models import AugmentParams
from models.score_models import Measure, ScoreVector
from services.imaging_service import apply_augmentation
from services.measures_service import (
    MeasureService,
    combine,
    combine_equalized,
    combined_columns,
    compression_complexity,
    deflate,
    fft2d,
    fft_complexity,
    inflate,
    serialize_mask,
)
from services.shape_service import generate_shape
from services.vae_service import VaeModel
from tasks.desk_corpus_task import sample_desk_specs
from tests.conftest import make_mask

rows, cols = np.indices((64, 64))
TWO = [Measure.COMPRESSION, Measure.FFT]
THREE = [Measure.COMPRESSION, Measure.FFT, Measure.VAE]


# *** Fourier ***


def test_constant_masks_have_zero_frequency(all_black, all_white):
    assert fft_complexity(all_black) == 0.0
    assert fft_complexity(all_white) == 0.0


def test_checkerboard_reaches_the_nyquist_corner():
    assert fft_complexity(make_mask((rows + cols) % 2)) == pytest.approx(1.0, abs=1e-9)


def test_single_axis_stripes():
    assert fft_complexity(make_mask(cols % 2)) == pytest.approx(1 / np.sqrt(2), abs=1e-6)


def test_fft2d_matches_direct_dft():
    a = np.random.default_rng(0).random((8, 8))
    k = np.arange(8)
    w = np.exp(-2j * np.pi * np.outer(k, k) / 8)
    np.testing.assert_allclose(fft2d(a), w @ a @ w, atol=1e-10)


def test_fft2d_of_impulse_and_constant():
    impulse = np.zeros((64, 64))
    impulse[0, 0] = 1.0
    np.testing.assert_allclose(fft2d(impulse), np.ones((64, 64)), atol=1e-12)
    spectrum = fft2d(np.ones((64, 64)))
    assert spectrum[0, 0] == pytest.approx(4096)
    spectrum[0, 0] = 0
    assert np.abs(spectrum).max() < 1e-9


def test_inverted_mask_has_identical_fft_score(noise, star):
    for m in (noise, star):
        assert fft_complexity(make_mask(1.0 - m.pixels)) == fft_complexity(m)


def test_flips_leave_fft_score_unchanged(star):
    flipped = apply_augmentation(star, AugmentParams(hflip=True, vflip=True))
    assert fft_complexity(flipped) == pytest.approx(fft_complexity(star), abs=1e-9)


def test_noise_is_more_frequent_than_a_disc(noise, disc):
    assert fft_complexity(noise) > fft_complexity(disc)


# *** compression ***


def test_white_mask_has_zero_compression_score(all_white):
    assert compression_complexity(all_white) == 0.0


def test_black_mask_compresses_almost_completely(all_black):
    assert compression_complexity(all_black) <= 0.01


def test_noise_beats_disc(noise, disc):
    assert compression_complexity(noise) > compression_complexity(disc)


def test_flips_barely_move_compression_score(disc, star, noise):
    rng = np.random.default_rng(5)
    corpus = [disc, star, noise] + [generate_shape(spec, rng, shape_id) for shape_id, spec in sample_desk_specs(25, rng)]
    for m in corpus:
        for params in (AugmentParams(hflip=True), AugmentParams(vflip=True)):
            delta = compression_complexity(apply_augmentation(m, params)) - compression_complexity(m)
            assert abs(delta) < 0.05, m.id


def test_serialization_and_raw_deflate(star):
    raw = serialize_mask(star)
    assert len(raw) == 4096
    assert set(raw) <= {0x00, 0xFF}
    assert inflate(deflate(raw)) == raw
    assert len(deflate(raw, 0)) > len(deflate(raw, 9))


# *** combination ***


def test_combine_examples():
    assert combine(ScoreVector(shape_id="a", compression=0, fft=0, vae=0), THREE) == 0.0
    assert combine(ScoreVector(shape_id="a", compression=1, fft=1, vae=1), THREE) == pytest.approx(1.0)
    assert combine(ScoreVector(shape_id="a", compression=0.3, fft=0.4, vae=0.0), THREE) == pytest.approx(0.2887, abs=1e-4)


def test_combine_is_monotone_in_each_component():
    base = combine(ScoreVector(shape_id="a", compression=0.3, fft=0.4), TWO)
    assert combine(ScoreVector(shape_id="a", compression=0.35, fft=0.4), TWO) > base
    assert combine(ScoreVector(shape_id="a", compression=0.3, fft=0.45), TWO) > base


def test_combine_needs_every_component():
    with pytest.raises(ContractError, match="vae"):
        combine(ScoreVector(shape_id="a", compression=0.1, fft=0.1), THREE)


def test_equalized_extremes_map_to_zero_and_one():
    scores = [ScoreVector(shape_id="lo", compression=0.1, fft=0.2), ScoreVector(shape_id="hi", compression=0.9, fft=0.7)]
    assert combine_equalized(scores, TWO) == pytest.approx([0.0, 1.0])


def test_equalized_constant_component_contributes_nothing():
    scores = [ScoreVector(shape_id="a", compression=0.5, fft=0.1), ScoreVector(shape_id="b", compression=0.5, fft=0.3)]
    assert combine_equalized(scores, TWO) == pytest.approx([0.0, 1 / np.sqrt(2)])


def test_equalized_three_shapes_by_hand():
    scores = [
        ScoreVector(shape_id="a", compression=0.2, fft=0.1),
        ScoreVector(shape_id="b", compression=0.4, fft=0.5),
        ScoreVector(shape_id="c", compression=0.6, fft=0.3),
    ]
    assert combine_equalized(scores, TWO) == pytest.approx([0.0, np.sqrt(0.625), np.sqrt(0.625)])


def test_equalized_needs_a_batch():
    with pytest.raises(ContractError):
        combine_equalized([ScoreVector(shape_id="a", compression=0.1, fft=0.1)], TWO)


def test_combined_columns_use_the_measures_every_row_has():
    scores = [ScoreVector(shape_id="a", fill=0.2, compression=0.0, fft=0.0),
              ScoreVector(shape_id="b", fill=0.9, compression=1.0, fft=1.0)]
    table = combined_columns(scores)
    assert table.combined == pytest.approx({"a": 0.0, "b": 1.0})
    assert table.combined_eq == pytest.approx({"a": 0.0, "b": 1.0})
    single = combined_columns(scores[:1])
    assert single.combined_eq == {"a": None}


# *** batch scoring ***


def test_vae_measure_needs_both_models():
    with pytest.raises(ContractError):
        MeasureService([Measure.VAE], model16=VaeModel.build(16))
    with pytest.raises(ContractError):
        MeasureService([])


def test_all_black_mask_is_skipped_only_for_the_vae_measure(disc, all_black):
    plain = MeasureService([Measure.FILL, Measure.COMPRESSION, Measure.FFT])
    assert [s.shape_id for s in plain.score_or_skip([disc, all_black])] == ["disc", "black"]
    with_vae = MeasureService([Measure.VAE], VaeModel.build(16, seed=1), VaeModel.build(64, seed=2))
    kept = with_vae.score_or_skip([disc, all_black])
    assert [s.shape_id for s in kept] == ["disc"]
    assert kept[0].present() == [Measure.VAE]


def test_threaded_scoring_keeps_input_order(disc, star, noise, all_white):
    service = MeasureService([Measure.FILL, Measure.COMPRESSION, Measure.FFT])
    masks = [disc, star, noise, all_white]
    assert service.score_all(masks, jobs=3) == service.score_all(masks)


def test_random_masks_score_inside_unit_interval():
    rng = np.random.default_rng(0)
    service = MeasureService([Measure.FILL, Measure.COMPRESSION, Measure.FFT])
    for i in range(25):
        pixels = (rng.random((64, 64)) < rng.random()).astype(np.float64)
        scores = service.score(make_mask(pixels, f"r{i}"))
        for measure in scores.present():
            assert 0.0 <= scores.get(measure) <= 1.0


def test_fft2d_matches_direct_dft_on_random_masks():
    rng = np.random.default_rng(11)
    k = np.arange(64)
    w = np.exp(-2j * np.pi * np.outer(k, k) / 64)
    for _ in range(100):
        a = (rng.random((64, 64)) < rng.random()).astype(np.float64)
        np.testing.assert_allclose(fft2d(a), w @ a @ w, rtol=0, atol=1e-6)


def test_deflate_round_trip_on_random_masks():
    rng = np.random.default_rng(12)
    for i in range(100):
        raw = serialize_mask(make_mask((rng.random((64, 64)) < rng.random()).astype(np.float64), f"r{i}"))
        assert inflate(deflate(raw)) == raw


def test_simple_to_complex_ordering_for_compression_and_fft(disc, star, noise):
    for measure in (compression_complexity, fft_complexity):
        assert measure(disc) < measure(star) < measure(noise)
