"""Per-model compression-rate search.

Every combination of candidate dims whose sum equals the budget is scored by

    sum over models of (silhouette_compressed - silhouette_baseline)
                       - mse_weight * normalized_mse

where normalized_mse is the reconstruction MSE divided by the model's mean
per-column input variance. The full score table is always returned so the
choice can be overruled by hand.
"""
import itertools
import logging
from typing import Dict, List, Mapping, Sequence

from pydantic import BaseModel, Field, model_validator

from geoembed_common.errors import GeoEmbedError
from geoembed_common.store import EmbeddingMatrix
from clustering import compression_quality
from clustering.cluster_models import QualityReport

from .composer import MissingSlotError

logger = logging.getLogger(__name__)


class InfeasiblePlanError(GeoEmbedError):
    code = "infeasible_plan"


class CombinationScore(BaseModel):
    dims: Dict[str, int]
    score: float
    model_terms: Dict[str, float]


class CompressionPlan(BaseModel):
    targets: Dict[str, int]
    total_budget: int = Field(..., ge=1)
    mse_weight: float
    score: float
    table: List[CombinationScore]
    quality: Dict[str, QualityReport] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _budget_respected(self) -> "CompressionPlan":
        if any(d < 1 for d in self.targets.values()):
            raise ValueError(f"Plan target dims must be positive: {self.targets}")
        if sum(self.targets.values()) != self.total_budget:
            raise ValueError(
                f"Plan dims sum to {sum(self.targets.values())}, budget is {self.total_budget}"
            )
        return self

    def to_json_dict(self) -> dict:
        return {
            "targets": self.targets,
            "total_budget": self.total_budget,
            "mse_weight": self.mse_weight,
            "score": self.score,
            "table": [row.model_dump() for row in self.table],
            "quality": {k: v.to_json_dict() for k, v in self.quality.items()},
        }


def model_term(report: QualityReport, dim: int, mse_weight: float) -> float:
    row = report.row_for(dim)
    return row.silhouette_delta - mse_weight * row.normalized_mse


def feasible_combinations(
    candidates: Sequence[Sequence[int]],
    total_budget: int,
) -> List[tuple]:
    """Lexicographic order over the per-model sorted candidate lists."""
    return [
        combo
        for combo in itertools.product(*[sorted(set(c)) for c in candidates])
        if sum(combo) == total_budget
    ]


def search_rates(
    embeddings: Mapping[str, EmbeddingMatrix],
    candidate_dims: Mapping[str, Sequence[int]],
    total_budget: int,
    k_clusters: int,
    seed: int,
    mse_weight: float = 1.0,
    metric: str = "euclidean",
    center: bool = False,
) -> CompressionPlan:
    """Model order is the iteration order of `candidate_dims`."""
    model_ids = list(candidate_dims)
    if not model_ids:
        raise InfeasiblePlanError("No models to search over")
    for model_id in model_ids:
        if model_id not in embeddings:
            raise MissingSlotError(
                f"No embeddings for model '{model_id}'",
                code=f"missing_slot:{model_id}",
            )
        if not candidate_dims[model_id]:
            raise InfeasiblePlanError(f"Model '{model_id}' has no candidate dims")

    combos = feasible_combinations([candidate_dims[m] for m in model_ids], total_budget)
    if not combos:
        raise InfeasiblePlanError(
            f"No combination of candidate dims sums to {total_budget}: "
            f"{ {m: sorted(candidate_dims[m]) for m in model_ids} }"
        )

    needed: Dict[str, set] = {m: set() for m in model_ids}
    for combo in combos:
        for model_id, dim in zip(model_ids, combo):
            needed[model_id].add(dim)

    quality = {
        model_id: compression_quality(
            embeddings[model_id], sorted(needed[model_id]), k_clusters, seed,
            metric=metric, center=center,
        )
        for model_id in model_ids
    }

    table: List[CombinationScore] = []
    best = None
    for combo in combos:
        terms = {
            model_id: model_term(quality[model_id], dim, mse_weight)
            for model_id, dim in zip(model_ids, combo)
        }
        score = sum(terms[m] for m in model_ids)
        row = CombinationScore(dims=dict(zip(model_ids, combo)), score=score, model_terms=terms)
        table.append(row)
        # strict comparison keeps the lexicographically smallest on ties
        if best is None or score > best.score:
            best = row

    logger.info(f"Rate search over {len(combos)} combinations chose {best.dims} (score {best.score:.4f})")
    return CompressionPlan(
        targets=best.dims,
        total_budget=total_budget,
        mse_weight=mse_weight,
        score=best.score,
        table=table,
        quality=quality,
    )
