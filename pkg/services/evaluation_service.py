#!/usr/bin/env python3
"""
Evaluation Service
Ranks shapes by score, compares rankings with Spearman correlation, and runs
the random-subset agreement experiment.
"""

import logging
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np
from scipy.stats import rankdata

from models.error_models import ContractError, DataError
from models.ranking_models import MeasureComparison, Ranking, ReferenceComparison, ReferenceRanking, SubsetExperimentResult
from models.score_models import COMBINED_COMPONENTS, Measure, RankKey, ScoreVector
from services.measures_service import combine, combine_equalized, default_components

logger = logging.getLogger(__name__)

DEFAULT_SUBSET_K = 9
DEFAULT_SUBSET_TRIALS = 2000


def rank(scores: Sequence[Tuple[str, float]]) -> Ranking:
    """Ascending ranks, ties averaged; display order breaks ties by id"""
    ids = [shape_id for shape_id, _ in scores]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate shape ids in scores")
    values = np.asarray([value for _, value in scores], dtype=np.float64)
    ranks = rankdata(values, method="average") if len(values) else np.zeros(0)
    ordered = [shape_id for shape_id, _ in sorted(scores, key=lambda item: (item[1], item[0]))]
    return Ranking(ordered_ids=ordered, ranks={i: float(r) for i, r in zip(ids, ranks)})


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    sxx, syy = float(xc @ xc), float(yc @ yc)
    if sxx == 0.0 or syy == 0.0:
        # a fully tied ranking carries no order information
        return 0.0
    return float(np.clip((xc @ yc) / np.sqrt(sxx * syy), -1.0, 1.0))


def spearman(r1: Ranking, r2: Ranking) -> float:
    """Pearson correlation of the two tie-adjusted rank vectors"""
    if set(r1.ranks) != set(r2.ranks):
        only = sorted(set(r1.ranks) ^ set(r2.ranks))
        raise DataError(f"rankings cover different shapes (e.g. '{only[0]}')")
    if len(r1) < 2:
        raise ContractError("spearman needs at least two shapes")
    ids = r1.ordered_ids
    return _pearson(np.asarray(r1.rank_vector(ids)), np.asarray(r2.rank_vector(ids)))


def measure_values(scores: Sequence[ScoreVector], key: RankKey) -> np.ndarray:
    """Values of one rank key over a batch; combined_eq is equalized over this batch"""
    key = RankKey(key)
    if key == RankKey.COMBINED:
        components = _combined_components(scores)
        return np.asarray([combine(s, components) for s in scores])
    if key == RankKey.COMBINED_EQ:
        return np.asarray(combine_equalized(scores, _combined_components(scores)))
    measure = Measure(key.value)
    values = []
    for s in scores:
        value = s.get(measure)
        if value is None:
            raise ContractError(f"shape {s.shape_id} has no '{measure.value}' score")
        values.append(value)
    return np.asarray(values, dtype=np.float64)


def _combined_components(scores: Sequence[ScoreVector]) -> List[Measure]:
    present = set(COMBINED_COMPONENTS)
    for s in scores:
        present &= set(s.present())
    components = default_components(present)
    if not components:
        raise ContractError("no combinable measures (compression, fft, vae) present in every shape")
    return components


def rank_by(scores: Sequence[ScoreVector], key: RankKey) -> Ranking:
    values = measure_values(scores, key)
    return rank(list(zip([s.shape_id for s in scores], values.tolist())))


def subset_experiment(
    corpus: Sequence[ScoreVector],
    measures: Sequence[RankKey],
    k: int = DEFAULT_SUBSET_K,
    trials: int = DEFAULT_SUBSET_TRIALS,
    seed: int = 0,
) -> SubsetExperimentResult:
    """
    Average pairwise Spearman correlation between measures over random k-shape
    subsets. Trial t samples with its own generator seeded by seed + t.
    """
    if k < 2:
        raise ContractError(f"subset size must be at least 2, got {k}")
    if len(corpus) < k:
        raise DataError(f"corpus has {len(corpus)} shapes, fewer than the subset size {k}")
    if trials < 1:
        raise ContractError(f"need at least one trial, got {trials}")
    keys = [RankKey(m) for m in measures]
    # per-shape values are fixed up front; the equalized combination depends on the subset
    fixed = {key: measure_values(corpus, key) for key in keys if key != RankKey.COMBINED_EQ}

    sums = np.zeros((len(keys), len(keys)))
    for t in range(trials):
        idx = np.sort(np.random.default_rng(seed + t).choice(len(corpus), size=k, replace=False))
        ranks = []
        for key in keys:
            if key == RankKey.COMBINED_EQ:
                values = measure_values([corpus[i] for i in idx], key)
            else:
                values = fixed[key][idx]
            ranks.append(rankdata(values, method="average"))
        for a in range(len(keys)):
            for b in range(a + 1, len(keys)):
                sums[a, b] += _pearson(ranks[a], ranks[b])

    matrix = sums / trials
    matrix = matrix + matrix.T
    np.fill_diagonal(matrix, 1.0)
    logger.info("subset experiment: %d trials of %d shapes over %s", trials, k, [key.value for key in keys])
    return SubsetExperimentResult(measures=[key.value for key in keys], matrix=matrix.tolist(),
                                  k=k, trials=trials, seed=seed)


def _ols(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def compare_to_reference(
    scores_by_measure: Mapping[str, Sequence[Tuple[str, float]]],
    reference: ReferenceRanking,
) -> ReferenceComparison:
    """Spearman correlation and (reference rank, measure rank) trendline per measure"""
    if len(reference.ids) < 2:
        raise ContractError("a reference ranking needs at least two shapes")
    ref_ranking = reference.as_ranking()
    comparisons = []
    for measure, scores in scores_by_measure.items():
        scored_ids = {shape_id for shape_id, _ in scores}
        missing = [i for i in reference.ids if i not in scored_ids]
        if missing:
            raise DataError(f"reference id '{missing[0]}' has no {measure} score")
        extra = sorted(scored_ids - set(reference.ids))
        if extra:
            raise DataError(f"scored shape '{extra[0]}' is missing from the reference ranking")
        measure_ranking = rank(scores)
        x = np.asarray(ref_ranking.rank_vector(reference.ids))
        y = np.asarray(measure_ranking.rank_vector(reference.ids))
        slope, intercept = _ols(x, y)
        comparisons.append(MeasureComparison(
            measure=measure,
            spearman=spearman(ref_ranking, measure_ranking),
            slope=slope,
            intercept=intercept,
            pairs=list(zip(x.tolist(), y.tolist())),
        ))
    return ReferenceComparison(comparisons=comparisons)


def scores_by_key(scores: Sequence[ScoreVector], keys: Sequence[RankKey]) -> Dict[str, List[Tuple[str, float]]]:
    ids = [s.shape_id for s in scores]
    return {RankKey(key).value: list(zip(ids, measure_values(scores, key).tolist())) for key in keys}


def load_reference_ranking(path: Union[str, Path]) -> ReferenceRanking:
    """One shape id per line, least complex first; blank lines are ignored"""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise FileNotFoundError(f"Reference ranking file not found: {path}")
    ids = [line.strip() for line in lines if line.strip()]
    if not ids:
        raise DataError(f"reference ranking {path} lists no shapes")
    try:
        return ReferenceRanking(ids=ids)
    except ValueError as e:
        raise DataError(f"invalid reference ranking {path}: {e}")
