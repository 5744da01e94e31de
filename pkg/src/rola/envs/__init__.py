from .base import Env, EnvSpec, StepResult
from .box_pushing import BoxPushing, BoxPushingState, box_pushing_optimal_return, initial_layout
from .capture_target import CaptureTarget, CaptureTargetState
from .matrix_game import MatrixGame
from .trace import dump_trajectory, record_trace

ENV_NAMES = ("capture_target", "box_pushing", "matrix_game")


def make_env(name: str, grid_size: int = 6, payoff=None):
    if name == "capture_target":
        return CaptureTarget(grid_size)
    if name == "box_pushing":
        return BoxPushing(grid_size)
    if name == "matrix_game":
        if payoff is None:
            raise ValueError("matrix_game needs a payoff matrix")
        return MatrixGame(payoff)
    raise ValueError(f"unknown environment {name!r}; choose from {', '.join(ENV_NAMES)}")


__all__ = [
    "Env", "EnvSpec", "StepResult", "BoxPushing", "BoxPushingState", "CaptureTarget",
    "CaptureTargetState", "MatrixGame", "box_pushing_optimal_return", "initial_layout",
    "dump_trajectory", "record_trace", "make_env", "ENV_NAMES",
]
