import logging
from typing import Callable, Dict, Sequence, Tuple

import numpy as np

from .evaluation_models import EvaluationError, LeaderboardMatrix, Task

logger = logging.getLogger(__name__)

TaskWeighting = Callable[[np.ndarray], np.ndarray]


def accuracy(targets, predictions) -> float:
    targets, predictions = np.asarray(targets), np.asarray(predictions)
    return float(np.mean(targets == predictions))


def r2_score(targets, predictions) -> float:
    """Coefficient of determination against the mean of `targets`.

    Constant targets score 1.0 when predicted exactly and 0.0 otherwise.
    """
    y = np.asarray(targets, dtype=np.float64)
    y_hat = np.asarray(predictions, dtype=np.float64)
    ss_res = float(np.sum((y - y_hat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def score_predictions(metric: str, targets, predictions) -> float:
    targets, predictions = np.asarray(targets), np.asarray(predictions)
    if targets.shape[0] != predictions.shape[0]:
        raise EvaluationError(
            f"{predictions.shape[0]} predictions for {targets.shape[0]} targets",
            code="misaligned_predictions",
        )
    if metric == "accuracy":
        return accuracy(targets, predictions)
    if metric == "r2":
        return r2_score(targets, predictions)
    raise EvaluationError(f"Unknown metric {metric!r}")


def score_task(task: Task, predictions) -> float:
    return score_predictions(task.metric, task.targets, predictions)


def q_mean(scores: Sequence[float]) -> float:
    values = np.asarray(list(scores), dtype=np.float64)
    if values.size == 0:
        raise EvaluationError("q_mean of no tasks", code="empty_scores")
    if not np.all(np.isfinite(values)):
        raise EvaluationError("q_mean needs finite scores")
    return float(values.mean())


def std_proportional_weights(scores: np.ndarray) -> np.ndarray:
    """w_t = sigma_t / sum(sigma), population std across teams; uniform if all zero."""
    sigma = scores.std(axis=0, ddof=0)
    # identical columns are exactly zero even when the mean rounds
    sigma[np.ptp(scores, axis=0) == 0.0] = 0.0
    total = sigma.sum()
    # equal spreads give exactly uniform weights, not 1/T plus rounding noise
    if total == 0.0 or np.allclose(sigma, sigma[0], rtol=1e-9, atol=0.0):
        return np.full(scores.shape[1], 1.0 / scores.shape[1])
    return sigma / total


def task_balanced_q_mean(
    board: LeaderboardMatrix,
    weighting: TaskWeighting = std_proportional_weights,
) -> Tuple[Dict[str, float], Dict[str, float]]:
    """Per-team weighted scores and the per-task weights used."""
    if len(board.teams) < 2 or len(board.tasks) < 1:
        raise EvaluationError(
            f"Task balancing needs >= 2 teams and >= 1 task, got "
            f"{len(board.teams)} teams, {len(board.tasks)} tasks",
            code="empty_board",
        )
    scores = board.as_array()
    weights = weighting(scores)
    if np.all(weights == weights[0]):
        team_scores = scores.mean(axis=1)
    else:
        team_scores = scores @ weights

    logger.debug(f"Task weights: {dict(zip(board.tasks, np.round(weights, 4)))}")
    return (
        {team: float(s) for team, s in zip(board.teams, team_scores)},
        {task: float(w) for task, w in zip(board.tasks, weights)},
    )


def rank_teams(team_scores: Dict[str, float]) -> Dict[str, int]:
    """1-based ranks, ties broken by team name."""
    ordered = sorted(team_scores, key=lambda t: (-team_scores[t], t))
    return {team: i for i, team in enumerate(ordered, start=1)}
