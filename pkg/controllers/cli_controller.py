"""Command-line surface: preprocess, generate, train, score, rank, eval and reconstruct."""

import functools
import logging
from pathlib import Path
from typing import List, Optional

import click
import numpy as np

from models.config_models import RunConfig, RunMetadata
from models.error_models import ParameterError, ShapeComplexityError
from models.score_models import COMBINED_COMPONENTS, Measure, RankKey
from services.checkpoint_service import load_model, save_model
from services.evaluation_service import (
    DEFAULT_SUBSET_K,
    DEFAULT_SUBSET_TRIALS,
    compare_to_reference,
    load_reference_ranking,
    measure_values,
    rank,
    scores_by_key,
    subset_experiment,
)
from services.imaging_service import MaskDatasetService, save_image
from services.measures_service import MeasureService
from services.reporting_service import (
    format_ranking,
    read_scores_csv,
    render_montage,
    render_reconstructions,
    render_scatter,
    score_labels,
    scores_by_id,
    write_loss_csv,
    write_metadata,
    write_reference_report,
    write_scores_csv,
    write_subset_matrix,
)
from services.shape_service import generate_shape
from services.vae_service import reconstruct, train, vae_complexity
from tasks.desk_corpus_task import DESK_CORPUS_SIZE, sample_desk_specs
from utils.config_helper import resolve_config
from utils.logging_helper import LOG_LEVELS, configure_logging
from utils.report_helper import (
    echo_config,
    print_preprocess_summary,
    print_reference_report,
    print_score_summary,
    print_subset_report,
    print_training_summary,
)

logger = logging.getLogger(__name__)


class DataUsageError(click.ClickException):
    """Bad input data or arguments; exits with status 2"""
    exit_code = 2


def exits_on_data_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (ShapeComplexityError, FileNotFoundError) as e:
            raise DataUsageError(str(e)) from e
    return wrapper


def _config(ctx: click.Context, command: str, **flags) -> RunConfig:
    config = resolve_config(ctx.obj.get("config_file"), **flags)
    echo_config(command, config)
    return config


def _vae_dims(config: RunConfig):
    if len(config.latent_dims) != 2:
        raise ParameterError(f"scoring needs exactly two latent dims, got {config.latent_dims}")
    return min(config.latent_dims), max(config.latent_dims)


def _load_masks(config: RunConfig, data_dir: Path):
    dataset = MaskDatasetService(config.threshold)
    if not dataset.list_image_files(data_dir):
        raise DataUsageError(f"no images found in {data_dir}")
    masks = dataset.load_dataset(data_dir)
    if not masks:
        raise DataUsageError(f"no decodable images in {data_dir}")
    return masks


def _metadata(command: str, config: RunConfig, **options) -> RunMetadata:
    return RunMetadata(
        command=command,
        seed=config.seed,
        measures=[m.value for m in config.measures],
        deflate_level=config.deflate_level,
        threshold=config.threshold,
        latent_dims=list(config.latent_dims),
        options={k: str(v) for k, v in options.items() if v is not None},
    )


def _keys(text: Optional[str], available: List[Measure]) -> List[RankKey]:
    if text:
        try:
            return [RankKey(part.strip()) for part in text.split(",") if part.strip()]
        except ValueError as e:
            raise ParameterError(f"unknown rank key in '{text}': {e}")
    singles = [RankKey(m.value) for m in [Measure.VAE, Measure.COMPRESSION, Measure.FFT] if m in available]
    if any(m in available for m in COMBINED_COMPONENTS):
        singles.append(RankKey.COMBINED)
    return singles


@click.group()
@click.option("--config", "config_file", type=click.Path(dir_okay=False), default=None,
              help="key=value file of run settings; explicit flags take precedence")
@click.option("--log-level", type=click.Choice(LOG_LEVELS, case_sensitive=False), default=None,
              help="Logging level (default INFO or SHAPECX_LOG_LEVEL)")
@click.pass_context
def cli(ctx: click.Context, config_file: Optional[str], log_level: Optional[str]):
    """Shape complexity toolkit: VAE, compression and FFT measures for 64x64 masks."""
    configure_logging(log_level)
    ctx.ensure_object(dict)
    ctx.obj["config_file"] = config_file


@cli.command()
@click.argument("in_dir", type=click.Path(file_okay=False, path_type=Path))
@click.argument("out_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--threshold", type=int, default=None, help="Foreground threshold 0-255 (default 128)")
@click.pass_context
@exits_on_data_errors
def preprocess(ctx: click.Context, in_dir: Path, out_dir: Path, threshold: Optional[int]):
    """Crop, square, resize and binarize every image in IN_DIR into 64x64 PGM masks."""
    config = _config(ctx, "preprocess", dataset_dir=in_dir, output_dir=out_dir, threshold=threshold)
    dataset = MaskDatasetService(config.threshold)
    if not dataset.list_image_files(in_dir):
        raise DataUsageError(f"no images found in {in_dir}")
    written, skipped = dataset.preprocess_directory(in_dir, out_dir)
    print_preprocess_summary(written, skipped)
    if not written:
        raise DataUsageError(f"no images in {in_dir} could be preprocessed")


@cli.command()
@click.argument("out_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--count", type=int, default=DESK_CORPUS_SIZE, show_default=True, help="Number of shapes")
@click.option("--seed", type=int, default=None, help="Generator seed")
@click.pass_context
@exits_on_data_errors
def generate(ctx: click.Context, out_dir: Path, count: int, seed: Optional[int]):
    """Write the synthetic desk corpus (discs, rectangles, polygons, stars, noise) as PGM files."""
    config = _config(ctx, "generate", output_dir=out_dir, seed=seed)
    if count < 1:
        raise ParameterError(f"--count must be positive, got {count}")
    rng = np.random.default_rng(config.seed)
    for shape_id, spec in sample_desk_specs(count, rng):
        save_image(out_dir / f"{shape_id}.pgm", generate_shape(spec, rng, shape_id))
    logger.info("wrote %d synthetic shapes to %s", count, out_dir)


@cli.command("train")
@click.argument("data_dir", type=click.Path(file_okay=False, path_type=Path))
@click.argument("out_checkpoint", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--latent", type=int, required=True, help="Latent dimension (16 or 64 in the standard pair)")
@click.option("--epochs", type=int, default=None, help="Training epochs (default 50)")
@click.option("--seed", type=int, default=None, help="Training seed")
@click.option("--batch-size", type=int, default=None, help="Minibatch size (default 32)")
@click.option("--lr", type=float, default=None, help="Adam learning rate (default 1e-3)")
@click.option("--kl-beta", type=float, default=None, help="Weight of the KL term (default 1)")
@click.option("--threshold", type=int, default=None, help="Foreground threshold for non-64x64 inputs")
@click.pass_context
@exits_on_data_errors
def train_command(ctx: click.Context, data_dir: Path, out_checkpoint: Path, latent: int, epochs: Optional[int],
                  seed: Optional[int], batch_size: Optional[int], lr: Optional[float], kl_beta: Optional[float],
                  threshold: Optional[int]):
    """Train one VAE on DATA_DIR and write its checkpoint plus a loss-curve CSV."""
    config = _config(ctx, "train", dataset_dir=data_dir, latent_dims=[latent], epochs=epochs, seed=seed,
                     batch_size=batch_size, lr=lr, kl_beta=kl_beta, threshold=threshold)
    masks = _load_masks(config, data_dir)
    model = train(masks, latent, epochs=config.epochs, batch_size=config.batch_size, lr=config.lr,
                  seed=config.seed, beta=config.kl_beta, beta1=config.beta1, beta2=config.beta2,
                  adam_eps=config.adam_eps)
    save_model(model, out_checkpoint)
    loss_csv = out_checkpoint.with_name(out_checkpoint.name + ".loss.csv")
    write_loss_csv(model.training_meta, loss_csv)
    write_metadata(loss_csv, _metadata("train", config, epochs=config.epochs, batch_size=config.batch_size,
                                       lr=config.lr, kl_beta=config.kl_beta, shapes=len(masks)))
    print_training_summary(latent, model.training_meta, out_checkpoint)


@cli.command()
@click.argument("data_dir", type=click.Path(file_okay=False, path_type=Path))
@click.argument("out_csv", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--vae16", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Small-latent checkpoint")
@click.option("--vae64", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Large-latent checkpoint")
@click.option("--measures", default=None, help="Comma list of fill,compression,fft,vae (default all)")
@click.option("--jobs", type=int, default=None, help="Worker threads for scoring (default 1)")
@click.option("--threshold", type=int, default=None, help="Foreground threshold for non-64x64 inputs")
@click.option("--deflate-level", type=int, default=None, help="DEFLATE level 0-9 (default 9)")
@click.pass_context
@exits_on_data_errors
def score(ctx: click.Context, data_dir: Path, out_csv: Path, vae16: Optional[Path], vae64: Optional[Path],
          measures: Optional[str], jobs: Optional[int], threshold: Optional[int], deflate_level: Optional[int]):
    """Score every mask in DATA_DIR and write the scores CSV."""
    config = _config(ctx, "score", dataset_dir=data_dir, measures=measures, jobs=jobs, threshold=threshold,
                     deflate_level=deflate_level)
    model16 = model64 = None
    checkpoint_dims = []
    if Measure.VAE in config.measures:
        if vae16 is None or vae64 is None:
            raise DataUsageError("the vae measure needs both --vae16 and --vae64 checkpoints")
        small, large = _vae_dims(config)
        model16 = load_model(vae16, expected_latent_dim=small)
        model64 = load_model(vae64, expected_latent_dim=large)
        checkpoint_dims = [small, large]
    masks = _load_masks(config, data_dir)
    service = MeasureService(config.measures, model16, model64, config.deflate_level)
    scores = service.score_or_skip(masks, config.jobs)
    write_scores_csv(scores, out_csv)
    metadata = _metadata("score", config, vae16=vae16, vae64=vae64)
    metadata.checkpoint_latent_dims = checkpoint_dims
    write_metadata(out_csv, metadata)
    print_score_summary(len(scores), len(masks), out_csv)


@cli.command("rank")
@click.argument("scores_csv", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--by", "key", type=click.Choice([k.value for k in RankKey]), default=RankKey.COMBINED.value,
              show_default=True, help="Measure to sort by")
@click.option("--montage", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Write a sorted montage PNG here")
@click.option("--masks-dir", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Directory holding the scored masks (needed for --montage)")
@click.pass_context
@exits_on_data_errors
def rank_command(ctx: click.Context, scores_csv: Path, key: str, montage: Optional[Path], masks_dir: Optional[Path]):
    """Print shapes in ascending complexity; optionally render the sorted montage."""
    config = _config(ctx, "rank")
    if montage is not None and masks_dir is None:
        raise DataUsageError("--montage needs --masks-dir to find the mask images")
    table = read_scores_csv(scores_csv)
    if not table.scores:
        raise DataUsageError(f"{scores_csv} holds no scores")
    key = RankKey(key)
    values = dict(zip([s.shape_id for s in table.scores], measure_values(table.scores, key).tolist()))
    ranking = rank(list(values.items()))
    click.echo(format_ranking(ranking, values), nl=False)
    if montage is not None:
        masks = {m.id: m for m in _load_masks(config, masks_dir)}
        by_id = scores_by_id(table)
        labels = {i: score_labels(by_id[i], key, values[i]) for i in ranking.ordered_ids}
        render_montage(ranking, masks, labels, montage)


@cli.command("eval")
@click.argument("scores_csv", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True, help="Report CSV path")
@click.option("--reference", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Reference ranking, one id per line, least complex first")
@click.option("--subset-trials", type=int, default=DEFAULT_SUBSET_TRIALS, show_default=True)
@click.option("--subset-k", type=int, default=DEFAULT_SUBSET_K, show_default=True)
@click.option("--keys", default=None, help="Comma list of rank keys to compare (default vae,compression,fft,combined)")
@click.option("--scatter", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Rank scatter SVG (reference mode)")
@click.option("--seed", type=int, default=None, help="Subset sampling seed")
@click.pass_context
@exits_on_data_errors
def eval_command(ctx: click.Context, scores_csv: Path, out: Path, reference: Optional[Path], subset_trials: int,
                 subset_k: int, keys: Optional[str], scatter: Optional[Path], seed: Optional[int]):
    """Correlate rankings with a reference ranking, or run the random-subset agreement experiment."""
    config = _config(ctx, "eval", seed=seed)
    table = read_scores_csv(scores_csv)
    available = [m for m in Measure if table.scores and all(s.get(m) is not None for s in table.scores)]
    rank_keys = _keys(keys, available)
    if not rank_keys:
        raise DataUsageError(f"{scores_csv} has no measure present for every shape")

    if reference is not None:
        comparison = compare_to_reference(scores_by_key(table.scores, rank_keys), load_reference_ranking(reference))
        write_reference_report(comparison, out)
        if scatter is not None:
            render_scatter(comparison.scatter(), scatter)
        print_reference_report(comparison)
        options = {"reference": reference, "keys": ",".join(k.value for k in rank_keys)}
    else:
        result = subset_experiment(table.scores, rank_keys, k=subset_k, trials=subset_trials, seed=config.seed)
        write_subset_matrix(result, out)
        print_subset_report(result)
        options = {"subset_trials": subset_trials, "subset_k": subset_k, "keys": ",".join(k.value for k in rank_keys)}
    write_metadata(out, _metadata("eval", config, **options))


@cli.command("reconstruct")
@click.argument("data_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--vae16", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--vae64", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True, help="Grid PNG path")
@click.option("--by", "order", type=click.Choice(["vae", "name"]), default="vae", show_default=True,
              help="Column order: ascending CS or file name")
@click.option("--limit", type=int, default=None, help="Render at most this many shapes")
@click.pass_context
@exits_on_data_errors
def reconstruct_command(ctx: click.Context, data_dir: Path, vae16: Path, vae64: Path, out: Path, order: str,
                        limit: Optional[int]):
    """Render ground truth and both reconstructions per shape, labelled with the complexity score."""
    config = _config(ctx, "reconstruct", dataset_dir=data_dir)
    small, large = _vae_dims(config)
    model16 = load_model(vae16, expected_latent_dim=small)
    model64 = load_model(vae64, expected_latent_dim=large)
    scored = []
    for m in _load_masks(config, data_dir):
        if m.pixels.sum() == 0:
            logger.warning("not reconstructing %s: mask has no foreground", m.id)
            continue
        scored.append((vae_complexity(model16, model64, m), m))
    if order == "vae":
        scored.sort(key=lambda item: (item[0], item[1].id))
    if limit is not None:
        scored = scored[:limit]
    masks = [m for _, m in scored]
    render_reconstructions(
        masks,
        [reconstruct(model64, m) for m in masks],
        [reconstruct(model16, m) for m in masks],
        [[f"{cs:.3f}"] for cs, _ in scored],
        out,
    )
