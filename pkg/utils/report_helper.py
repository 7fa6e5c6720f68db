import sys
from pathlib import Path
from typing import List, Sequence, Tuple

from models.config_models import RunConfig
from models.ranking_models import ReferenceComparison, SubsetExperimentResult
from models.vae_models import TrainingMeta


def _err(text: str = "") -> None:
    print(text, file=sys.stderr)


def _banner(title: str) -> None:
    _err("\n" + "=" * 50)
    _err(title)
    _err("=" * 50)


def echo_config(command: str, config: RunConfig) -> None:
    """Every command states its seed and resolved config before doing work"""
    _err(f"seed={config.seed}")
    _err(f"config {command}: {config.echo()}")


def print_preprocess_summary(written: Sequence[Path], skipped: Sequence[Tuple[Path, str]]) -> None:
    _banner("🖼️  PREPROCESS SUMMARY")
    _err(f"Masks written: {len(written)}")
    if skipped:
        _err(f"\n⚠️  Skipped {len(skipped)} file(s):")
        for path, reason in skipped:
            _err(f"  • {path.name}: {reason}")


def print_training_summary(latent_dim: int, meta: TrainingMeta, checkpoint: Path) -> None:
    _banner(f"🧠 TRAINING SUMMARY (latent {latent_dim})")
    _err(f"Epochs: {meta.epochs}")
    _err(f"Seed: {meta.seed}")
    if meta.losses:
        _err(f"Final loss: {meta.losses[-1]:.4f} (bce {meta.bce[-1]:.4f}, kl {meta.kl[-1]:.4f})")
    else:
        _err("⚠️  Warning: no training performed, checkpoint holds the initial weights")
    _err(f"Checkpoint: {checkpoint}")


def print_score_summary(scored: int, total: int, out: Path) -> None:
    _banner("📊 SCORING SUMMARY")
    _err(f"Shapes scored: {scored}/{total}")
    if scored < total:
        _err(f"⚠️  Warning: {total - scored} shape(s) could not be scored, see the log")
    _err(f"Scores: {out}")


def print_reference_report(comparison: ReferenceComparison) -> None:
    _banner("📊 REFERENCE COMPARISON")
    for c in comparison.comparisons:
        _err(f"{c.measure:>12}: spearman {c.spearman:+.3f}  trend y = {c.slope:.3f}x + {c.intercept:.3f}")
    best = max(comparison.comparisons, key=lambda c: c.spearman)
    _err(f"\n🎯 Closest to the reference: {best.measure} ({best.spearman:+.3f})")


def print_subset_report(result: SubsetExperimentResult) -> None:
    _banner(f"📊 SUBSET AGREEMENT ({result.trials} sets of {result.k} shapes, seed {result.seed})")
    width = max(len(m) for m in result.measures) + 2
    _err(" " * width + "".join(f"{m:>{width}}" for m in result.measures[1:]))
    for i, a in enumerate(result.measures[:-1]):
        cells: List[str] = []
        for j in range(1, len(result.measures)):
            cells.append(f"{result.matrix[i][j]:>{width}.3f}" if j > i else " " * width)
        _err(f"{a:<{width}}" + "".join(cells))
    negative = [
        (a, b) for i, a in enumerate(result.measures) for j, b in enumerate(result.measures)
        if j > i and result.matrix[i][j] < 0
    ]
    if negative:
        _err(f"\n⚠️  Warning: negative agreement for {', '.join(f'{a}/{b}' for a, b in negative)}")
