from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from geoembed_common.errors import GeoEmbedError
from geoembed_common.store import EmbeddingMatrix

TaskKind = Literal["classification", "regression"]
Metric = Literal["accuracy", "r2"]

DEFAULT_METRIC = {"classification": "accuracy", "regression": "r2"}


class EvaluationError(GeoEmbedError):
    code = "evaluation_error"


class SingularSystemError(EvaluationError):
    code = "singular_system"


@dataclass(frozen=True, eq=False)
class Task:
    name: str
    kind: TaskKind
    features: EmbeddingMatrix
    targets: np.ndarray
    metric: Metric
    ridge: float = 1e-3
    holdout_fraction: float = 0.25
    seed: int = 0
    iters: int = 500
    learning_rate: float = 0.1
    class_names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        if self.kind not in DEFAULT_METRIC:
            raise EvaluationError(f"Task '{self.name}': unknown kind {self.kind!r}")
        if self.metric not in ("accuracy", "r2"):
            raise EvaluationError(f"Task '{self.name}': unknown metric {self.metric!r}")
        if len(self.targets) != self.features.n_rows:
            raise EvaluationError(
                f"Task '{self.name}': {self.features.n_rows} feature rows "
                f"but {len(self.targets)} targets",
                code="misaligned_targets",
            )


class TaskDescriptor(BaseModel):
    name: str = Field(..., min_length=1)
    kind: TaskKind
    features: str
    targets: str
    target_column: str = "target"
    metric: Optional[Metric] = None
    ridge: float = Field(1e-3, ge=0.0)
    holdout_fraction: float = Field(0.25, ge=0.0, lt=1.0)
    seed: int = Field(0, ge=0)
    iters: int = Field(500, ge=1)
    learning_rate: float = Field(0.1, gt=0.0)


class LeaderboardMatrix(BaseModel):
    teams: List[str]
    tasks: List[str]
    scores: List[List[float]]

    @model_validator(mode="after")
    def _rectangular(self) -> "LeaderboardMatrix":
        if len(self.scores) != len(self.teams):
            raise ValueError(f"{len(self.teams)} teams but {len(self.scores)} score rows")
        for team, row in zip(self.teams, self.scores):
            if len(row) != len(self.tasks):
                raise ValueError(f"Team '{team}' has {len(row)} scores for {len(self.tasks)} tasks")
        if not np.all(np.isfinite(np.asarray(self.scores, dtype=float))):
            raise ValueError("Leaderboard scores must be finite")
        return self

    def as_array(self) -> np.ndarray:
        return np.asarray(self.scores, dtype=np.float64).reshape(len(self.teams), len(self.tasks))

    def with_team(self, team: str, task_scores: Dict[str, float]) -> "LeaderboardMatrix":
        """Adds the team's row, or replaces it when the team is already listed."""
        missing = [t for t in self.tasks if t not in task_scores]
        if missing:
            raise EvaluationError(f"No score for leaderboard tasks {missing}")
        row = [task_scores[t] for t in self.tasks]
        if team in self.teams:
            i = self.teams.index(team)
            return LeaderboardMatrix(
                teams=list(self.teams),
                tasks=self.tasks,
                scores=self.scores[:i] + [row] + self.scores[i + 1:],
            )
        return LeaderboardMatrix(teams=self.teams + [team], tasks=self.tasks, scores=self.scores + [row])


class TaskResult(BaseModel):
    name: str
    kind: TaskKind
    metric: Metric
    score: float
    n_train: int
    n_eval: int


class EvaluationReport(BaseModel):
    task_scores: Dict[str, float]
    results: List[TaskResult] = Field(default_factory=list)
    q_mean: float
    task_balanced_q_mean: Optional[float] = None
    weights: Optional[Dict[str, float]] = None
    team_scores: Optional[Dict[str, float]] = None
    team_unweighted_scores: Optional[Dict[str, float]] = None

    @model_validator(mode="after")
    def _weights_valid(self) -> "EvaluationReport":
        if self.weights is not None:
            values = np.asarray(list(self.weights.values()), dtype=float)
            if np.any(values < 0) or not np.isclose(values.sum(), 1.0):
                raise ValueError(f"Task weights must be non-negative and sum to 1: {self.weights}")
        return self
