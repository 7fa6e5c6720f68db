#!/usr/bin/env python3
"""
Standalone script that runs the whole desk experiment: synthetic corpus,
both VAEs, every measure, a sorted montage and the subset agreement matrix.
Settings come from SHAPECX_* variables (or .env); outputs go to SHAPECX_OUTPUT_DIR.
"""

import os
import sys

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Add the project root to the path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from pathlib import Path

import numpy as np

from models.score_models import Measure, RankKey
from services.checkpoint_service import save_model
from services.evaluation_service import DEFAULT_SUBSET_K, DEFAULT_SUBSET_TRIALS, rank, rank_by, subset_experiment
from services.imaging_service import save_image
from services.measures_service import MeasureService, combined_columns
from services.reporting_service import (
    render_montage,
    render_reconstructions,
    score_labels,
    scores_by_id,
    write_loss_csv,
    write_scores_csv,
    write_subset_matrix,
)
from services.shape_service import generate_shape
from services.vae_service import reconstruct, train
from tasks.desk_corpus_task import DESK_CORPUS_SIZE, sample_desk_specs
from utils.config_helper import resolve_config
from utils.logging_helper import configure_logging
from utils.report_helper import echo_config, print_score_summary, print_subset_report, print_training_summary

MONTAGE_SHAPES = 12


def main():
    """Run every stage of the desk experiment in order"""
    configure_logging()
    config = resolve_config()
    echo_config("experiment", config)
    out = Path(config.output_dir or "results/desk")
    print("🧪 Desk Shape Complexity Experiment")
    print("=" * 50)

    print(f"\n🎨 Generating {DESK_CORPUS_SIZE} synthetic shapes...")
    rng = np.random.default_rng(config.seed)
    corpus = []
    for shape_id, spec in sample_desk_specs(DESK_CORPUS_SIZE, rng):
        mask = generate_shape(spec, rng, shape_id)
        save_image(out / "masks" / f"{shape_id}.pgm", mask)
        corpus.append(mask)

    models = {}
    for latent in sorted(config.latent_dims):
        print(f"\n🧠 Training latent-{latent} VAE for {config.epochs} epochs...")
        model = train(corpus, latent, epochs=config.epochs, batch_size=config.batch_size, lr=config.lr,
                      seed=config.seed, beta=config.kl_beta, beta1=config.beta1, beta2=config.beta2,
                      adam_eps=config.adam_eps)
        checkpoint = save_model(model, out / f"vae{latent}.scvx")
        write_loss_csv(model.training_meta, out / f"vae{latent}.scvx.loss.csv")
        print_training_summary(latent, model.training_meta, checkpoint)
        models[latent] = model
    model16, model64 = models[min(models)], models[max(models)]

    print("\n📊 Scoring...")
    service = MeasureService(config.measures, model16, model64, config.deflate_level)
    scores = service.score_or_skip(corpus, config.jobs)
    table = combined_columns(scores)
    write_scores_csv(table, out / "scores.csv")
    print_score_summary(len(scores), len(corpus), out / "scores.csv")

    by_id = {m.id: m for m in corpus}
    vectors = scores_by_id(table)
    # every n-th shape of the full ranking, so the montage spans the whole range
    picked = rank_by(scores, RankKey.COMBINED).ordered_ids[::max(1, len(scores) // MONTAGE_SHAPES)]
    shown = rank([(i, table.combined[i]) for i in picked])
    labels = {i: score_labels(vectors[i], RankKey.COMBINED, table.combined[i]) for i in picked}
    montage = render_montage(shown, by_id, labels, out / "montage_combined.png")
    print(f"\n🖼️  Montage: {montage}")

    masks = [by_id[i] for i in shown.ordered_ids]
    grid = render_reconstructions(masks, [reconstruct(model64, m) for m in masks],
                                  [reconstruct(model16, m) for m in masks], path=out / "reconstructions.png")
    print(f"🖼️  Reconstructions: {grid}")

    keys = [RankKey(m.value) for m in config.measures if m != Measure.FILL] + [RankKey.COMBINED]
    result = subset_experiment(scores, keys, k=DEFAULT_SUBSET_K, trials=DEFAULT_SUBSET_TRIALS, seed=config.seed)
    write_subset_matrix(result, out / "subset_agreement.csv")
    print_subset_report(result)

    print(f"\n✅ Experiment complete, outputs in {out}")


if __name__ == "__main__":
    main()
