from .cameras import CameraPose, ProjectionSingular, project
from .lm import DenseNLLSProblem, LMState, joint_hq_step, solve_weighted_nlls
from .problem import BAProblem
from .strategies import (
    STRATEGIES,
    SigmaSelection,
    graduated_round,
    irls_round,
    run_ba_benchmark,
    run_strategy,
    select_sigma_regemm,
)

__all__ = [
    "BAProblem", "CameraPose", "DenseNLLSProblem", "LMState",
    "ProjectionSingular", "STRATEGIES", "SigmaSelection", "graduated_round",
    "irls_round", "joint_hq_step", "project", "run_ba_benchmark",
    "run_strategy", "select_sigma_regemm", "solve_weighted_nlls",
]
