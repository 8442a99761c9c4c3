import json
import logging
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError

from geoembed_common.store import load_embeddings

from .evaluation_models import (
    DEFAULT_METRIC,
    EvaluationError,
    EvaluationReport,
    LeaderboardMatrix,
    Task,
    TaskDescriptor,
    TaskResult,
)
from .probes import (
    fit_linear_probe_no_bias,
    fit_logistic_probe_no_bias,
    predict_classes,
    predict_linear,
)
from .scoring import q_mean, score_predictions, task_balanced_q_mean

logger = logging.getLogger(__name__)


def _resolve(base_dir: Path, path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else base_dir / p


def load_task(descriptor_path: Path) -> Task:
    descriptor_path = Path(descriptor_path)
    try:
        descriptor = TaskDescriptor.model_validate(
            json.loads(descriptor_path.read_text(encoding="utf-8"))
        )
    except (json.JSONDecodeError, ValidationError) as e:
        raise EvaluationError(f"{descriptor_path}: invalid task descriptor: {e}") from e

    base_dir = descriptor_path.parent
    features = load_embeddings(_resolve(base_dir, descriptor.features))
    frame = pd.read_csv(
        _resolve(base_dir, descriptor.targets),
        dtype={"sample_id": str},
        float_precision="round_trip",
    )
    if descriptor.target_column not in frame.columns:
        raise EvaluationError(
            f"Task '{descriptor.name}': targets CSV has no column '{descriptor.target_column}'"
        )

    if features.row_ids is not None and "sample_id" in frame.columns:
        indexed = frame.set_index("sample_id")
        missing = [r for r in features.row_ids if r not in indexed.index]
        if missing:
            raise EvaluationError(
                f"Task '{descriptor.name}': {len(missing)} feature rows have no target "
                f"(first: {missing[0]})",
                code="misaligned_targets",
            )
        raw_targets = indexed.loc[list(features.row_ids), descriptor.target_column].to_numpy()
    else:
        raw_targets = frame[descriptor.target_column].to_numpy()

    class_names = None
    if descriptor.kind == "classification":
        classes, targets = np.unique(raw_targets.astype(str), return_inverse=True)
        class_names = tuple(str(c) for c in classes)
    else:
        targets = raw_targets.astype(np.float64)

    return Task(
        name=descriptor.name,
        kind=descriptor.kind,
        features=features,
        targets=targets,
        metric=descriptor.metric or DEFAULT_METRIC[descriptor.kind],
        ridge=descriptor.ridge,
        holdout_fraction=descriptor.holdout_fraction,
        seed=descriptor.seed,
        iters=descriptor.iters,
        learning_rate=descriptor.learning_rate,
        class_names=class_names,
    )


def split_indices(n: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded train/eval split; with fraction 0 both sides are all rows."""
    if fraction <= 0.0:
        idx = np.arange(n)
        return idx, idx
    order = np.random.default_rng(seed).permutation(n)
    n_eval = max(1, int(round(fraction * n)))
    return np.sort(order[n_eval:]), np.sort(order[:n_eval])


def run_task(task: Task) -> TaskResult:
    x = task.features.as_float64()
    train, held_out = split_indices(len(task.targets), task.holdout_fraction, task.seed)

    if task.kind == "regression":
        w = fit_linear_probe_no_bias(x[train], task.targets[train], task.ridge)
        predictions = predict_linear(x[held_out], w)
    else:
        fit = fit_logistic_probe_no_bias(
            x[train],
            task.targets[train],
            ridge=task.ridge,
            iters=task.iters,
            learning_rate=task.learning_rate,
            seed=task.seed,
            n_classes=int(task.targets.max()) + 1,
        )
        predictions = predict_classes(x[held_out], fit.weights)

    score = score_predictions(task.metric, task.targets[held_out], predictions)
    logger.info(f"Task '{task.name}' ({task.kind}): {task.metric}={score:.4f} on {len(held_out)} rows")
    return TaskResult(
        name=task.name,
        kind=task.kind,
        metric=task.metric,
        score=score,
        n_train=len(train),
        n_eval=len(held_out),
    )


def load_leaderboard(path: Path) -> LeaderboardMatrix:
    """CSV with a `team` column followed by one column per task."""
    frame = pd.read_csv(path, dtype={"team": str})
    if frame.columns[0] != "team":
        raise EvaluationError(f"{path}: first leaderboard column must be 'team'")
    tasks = [str(c) for c in frame.columns[1:]]
    try:
        return LeaderboardMatrix(
            teams=frame["team"].tolist(),
            tasks=tasks,
            scores=frame[tasks].astype(float).to_numpy().tolist(),
        )
    except (ValidationError, ValueError) as e:
        raise EvaluationError(f"{path}: invalid leaderboard: {e}") from e


def build_report(
    results: List[TaskResult],
    leaderboard: Optional[LeaderboardMatrix] = None,
    team: str = "ours",
) -> EvaluationReport:
    task_scores = {r.name: r.score for r in results}
    report = EvaluationReport(
        task_scores=task_scores,
        results=results,
        q_mean=q_mean(task_scores.values()),
    )
    if leaderboard is None:
        return report

    # freshly computed scores win over any row the board already holds for the team
    board = leaderboard.with_team(team, task_scores)
    team_scores, weights = task_balanced_q_mean(board)
    unweighted = {t: float(row.mean()) for t, row in zip(board.teams, board.as_array())}
    return report.model_copy(update={
        "task_balanced_q_mean": team_scores[team],
        "weights": weights,
        "team_scores": team_scores,
        "team_unweighted_scores": unweighted,
    })


def evaluate(
    tasks: List[Task],
    leaderboard: Optional[LeaderboardMatrix] = None,
    team: str = "ours",
) -> EvaluationReport:
    if not tasks:
        raise EvaluationError("No tasks to evaluate", code="empty_scores")
    return build_report([run_task(t) for t in tasks], leaderboard, team)
