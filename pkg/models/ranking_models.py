from typing import Dict, List, Tuple

from pydantic import BaseModel, Field, model_validator


class Ranking(BaseModel):
    """Shape ids in ascending complexity, with tie-aware average ranks"""
    ordered_ids: List[str]
    ranks: Dict[str, float]

    @model_validator(mode="after")
    def _check_ranks(self):
        if set(self.ordered_ids) != set(self.ranks) or len(self.ordered_ids) != len(self.ranks):
            raise ValueError("ranking ids and rank table disagree")
        n = len(self.ordered_ids)
        if abs(sum(self.ranks.values()) - n * (n + 1) / 2) > 1e-9 * max(n, 1) ** 2:
            raise ValueError("ranks must sum to n(n+1)/2")
        return self

    def __len__(self) -> int:
        return len(self.ordered_ids)

    def rank_vector(self, ids: List[str]) -> List[float]:
        return [self.ranks[i] for i in ids]


class ReferenceRanking(BaseModel):
    """Human-judged order, least complex first"""
    ids: List[str] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_unique(self):
        seen = set()
        for shape_id in self.ids:
            if shape_id in seen:
                raise ValueError(f"duplicate id '{shape_id}' in reference ranking")
            seen.add(shape_id)
        return self

    def as_ranking(self) -> Ranking:
        return Ranking(ordered_ids=list(self.ids), ranks={i: float(k + 1) for k, i in enumerate(self.ids)})


class ScatterSeries(BaseModel):
    measure: str
    points: List[Tuple[float, float]]
    slope: float
    intercept: float


class RankScatter(BaseModel):
    """(reference rank, measure rank) pairs per measure, axes spanning 1..n"""
    n: int = Field(ge=1)
    series: List[ScatterSeries]


class MeasureComparison(BaseModel):
    measure: str
    spearman: float = Field(ge=-1.0, le=1.0)
    slope: float
    intercept: float
    pairs: List[Tuple[float, float]]


class ReferenceComparison(BaseModel):
    comparisons: List[MeasureComparison]

    def scatter(self) -> RankScatter:
        n = max(len(c.pairs) for c in self.comparisons)
        return RankScatter(n=n, series=[
            ScatterSeries(measure=c.measure, points=c.pairs, slope=c.slope, intercept=c.intercept)
            for c in self.comparisons
        ])


class SubsetExperimentResult(BaseModel):
    """Mean pairwise Spearman correlation over random k-shape subsets"""
    measures: List[str]
    matrix: List[List[float]]
    k: int
    trials: int
    seed: int

    def value(self, a: str, b: str) -> float:
        return self.matrix[self.measures.index(a)][self.measures.index(b)]
