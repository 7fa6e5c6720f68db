import csv
import logging

import pytest
from click.testing import CliRunner

from controllers.cli_controller import cli
from services.checkpoint_service import load_model
from services.reporting_service import metadata_path, read_scores_csv


@pytest.fixture(autouse=True)
def detach_cli_logging(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("SHAPECX_SEED", raising=False)
    monkeypatch.delenv("SHAPECX_MEASURES", raising=False)
    yield
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_shapecx", False):
            root.removeHandler(handler)


def run(*args):
    return CliRunner(mix_stderr=False).invoke(cli, [str(a) for a in args])


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk")
    result = run("generate", out, "--count", 10, "--seed", 3)
    assert result.exit_code == 0, result.stderr
    return out


@pytest.fixture(scope="module")
def scores_csv(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("scores") / "scores.csv"
    result = run("score", corpus, out, "--measures", "fill,compression,fft")
    assert result.exit_code == 0, result.stderr
    return out


def _ranked_ids(stdout):
    return [row["id"] for row in csv.DictReader(stdout.splitlines())]


# *** preprocess / generate ***


def test_preprocess_of_an_empty_directory_exits_2(tmp_path):
    (tmp_path / "empty").mkdir()
    result = run("preprocess", tmp_path / "empty", tmp_path / "out")
    assert result.exit_code == 2
    assert "no images found" in result.stderr


def test_missing_input_directory_exits_2(tmp_path):
    result = run("preprocess", tmp_path / "nowhere", tmp_path / "out")
    assert result.exit_code == 2


def test_generate_writes_named_pgm_files_reproducibly(corpus, tmp_path):
    names = sorted(p.name for p in corpus.iterdir())
    assert len(names) == 10
    assert "disc_0000.pgm" in names and "noise_0009.pgm" in names
    again = tmp_path / "again"
    result = run("generate", again, "--count", 10, "--seed", 3)
    assert "seed=3" in result.stderr
    assert (again / "star_0003.pgm").read_bytes() == (corpus / "star_0003.pgm").read_bytes()


# *** score ***


def test_score_without_vae_writes_one_row_per_shape(scores_csv):
    table = read_scores_csv(scores_csv)
    assert len(table.scores) == 10
    assert all(s.vae is None and s.fft is not None for s in table.scores)
    assert metadata_path(scores_csv).exists()


def test_vae_measure_without_checkpoints_exits_2(corpus, tmp_path):
    result = run("score", corpus, tmp_path / "s.csv")
    assert result.exit_code == 2
    assert "--vae16" in result.stderr


def test_invalid_measure_name_exits_2(corpus, tmp_path):
    result = run("score", corpus, tmp_path / "s.csv", "--measures", "fft,entropy")
    assert result.exit_code == 2


# *** rank ***


def test_rank_by_fill_sorts_ascending(scores_csv):
    result = run("rank", scores_csv, "--by", "fill")
    assert result.exit_code == 0, result.stderr
    table = read_scores_csv(scores_csv)
    expected = [s.shape_id for s in sorted(table.scores, key=lambda s: (s.fill, s.shape_id))]
    assert _ranked_ids(result.stdout) == expected


def test_equalized_ranking_of_a_single_shape_exits_2(tmp_path):
    path = tmp_path / "one.csv"
    path.write_text("id,fill,compression,fft,vae,combined,combined_eq\na,0.1,0.2,0.3,,,\n")
    assert run("rank", path, "--by", "combined_eq").exit_code == 2


def test_montage_only_when_asked(scores_csv, corpus, tmp_path):
    assert run("rank", scores_csv, "--montage", tmp_path / "m.png").exit_code == 2
    assert not (tmp_path / "m.png").exists()
    result = run("rank", scores_csv, "--by", "fft", "--montage", tmp_path / "m.png", "--masks-dir", corpus)
    assert result.exit_code == 0, result.stderr
    assert (tmp_path / "m.png").stat().st_size > 0


# *** eval ***


def test_reference_with_unscored_id_exits_2(scores_csv, tmp_path):
    table = read_scores_csv(scores_csv)
    reference = tmp_path / "ref.txt"
    reference.write_text("\n".join([s.shape_id for s in table.scores] + ["ghost"]) + "\n")
    result = run("eval", scores_csv, "--out", tmp_path / "r.csv", "--reference", reference)
    assert result.exit_code == 2
    assert "ghost" in result.stderr


def test_reference_report_and_scatter(scores_csv, tmp_path):
    table = read_scores_csv(scores_csv)
    reference = tmp_path / "ref.txt"
    reference.write_text("\n".join(s.shape_id for s in table.scores) + "\n")
    result = run("eval", scores_csv, "--out", tmp_path / "r.csv", "--reference", reference,
                 "--keys", "fill,fft", "--scatter", tmp_path / "s.svg")
    assert result.exit_code == 0, result.stderr
    rows = list(csv.DictReader((tmp_path / "r.csv").read_text().splitlines()))
    assert [r["measure"] for r in rows] == ["fill", "fft"]
    assert (tmp_path / "s.svg").read_text().count("<circle") == 20


def test_subset_experiment_writes_the_matrix(scores_csv, tmp_path):
    result = run("eval", scores_csv, "--out", tmp_path / "subset.csv", "--subset-trials", 20, "--seed", 1)
    assert result.exit_code == 0, result.stderr
    header = (tmp_path / "subset.csv").read_text().splitlines()[0]
    assert header == "measure,fft,combined"


def test_subset_larger_than_corpus_exits_2(scores_csv, tmp_path):
    result = run("eval", scores_csv, "--out", tmp_path / "subset.csv", "--subset-k", 11)
    assert result.exit_code == 2


# *** train / vae scoring / reconstruct ***


@pytest.fixture(scope="module")
def checkpoints(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("models")
    for latent in (16, 64):
        result = run("train", corpus, out / f"vae{latent}.scvx", "--latent", latent, "--epochs", 0, "--seed", 5)
        assert result.exit_code == 0, result.stderr
    return out


def test_zero_epoch_training_writes_initial_weights(checkpoints):
    model = load_model(checkpoints / "vae16.scvx", expected_latent_dim=16)
    assert model.training_meta.losses == []
    assert (checkpoints / "vae16.scvx.loss.csv").read_text() == "epoch,loss,bce,kl\n"


def test_zero_epoch_training_warns(corpus, tmp_path):
    result = run("train", corpus, tmp_path / "v.scvx", "--latent", 4, "--epochs", 0)
    assert result.exit_code == 0
    assert "epochs=0" in result.stderr


def test_vae_scoring_with_checkpoints(corpus, checkpoints, tmp_path):
    out = tmp_path / "vae.csv"
    result = run("score", corpus, out, "--measures", "vae", "--vae16", checkpoints / "vae16.scvx",
                 "--vae64", checkpoints / "vae64.scvx", "--jobs", 2)
    assert result.exit_code == 0, result.stderr
    table = read_scores_csv(out)
    assert len(table.scores) == 10
    assert all(0.0 <= s.vae <= 1.0 for s in table.scores)


def test_swapped_checkpoints_exit_2(corpus, checkpoints, tmp_path):
    result = run("score", corpus, tmp_path / "vae.csv", "--measures", "vae", "--vae16", checkpoints / "vae64.scvx",
                 "--vae64", checkpoints / "vae16.scvx")
    assert result.exit_code == 2
    assert "latent" in result.stderr


def test_reconstruction_grid(corpus, checkpoints, tmp_path):
    result = run("reconstruct", corpus, "--vae16", checkpoints / "vae16.scvx", "--vae64", checkpoints / "vae64.scvx",
                 "--out", tmp_path / "grid.png", "--limit", 4)
    assert result.exit_code == 0, result.stderr
    assert (tmp_path / "grid.png").stat().st_size > 0


def test_train_and_score_reruns_are_byte_identical(corpus, tmp_path):
    for name in ("a", "b"):
        assert run("train", corpus, tmp_path / f"{name}.scvx", "--latent", 4, "--epochs", 1, "--batch-size", 4,
                   "--seed", 9).exit_code == 0
        assert run("score", corpus, tmp_path / f"{name}.csv", "--measures", "fill,compression,fft").exit_code == 0
    assert (tmp_path / "a.scvx").read_bytes() == (tmp_path / "b.scvx").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
