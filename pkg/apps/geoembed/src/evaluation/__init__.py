from .evaluation_models import (
    EvaluationError,
    EvaluationReport,
    LeaderboardMatrix,
    SingularSystemError,
    Task,
    TaskResult,
)
from .probes import (
    fit_linear_probe_gd,
    fit_linear_probe_no_bias,
    fit_logistic_probe_no_bias,
    predict_classes,
    predict_linear,
)
from .scoring import q_mean, rank_teams, score_task, task_balanced_q_mean
from .tasks import build_report, evaluate, load_leaderboard, load_task, run_task
