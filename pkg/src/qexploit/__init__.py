"""Strategic agents exploiting independent Q-learners in repeated normal-form games."""

__version__ = "0.1.0"

from .errors import (
    BudgetExceededError,
    ConfigError,
    InvalidInputError,
    NotConvergedError,
    ParameterError,
    ProvenanceError,
    QExploitError,
)
from .game import LearnerParams, NormalFormGame, game_from_players
from .sgmodel import FiniteSG, QuantGrid, build_finite_sg, build_grid
from .sim import PlaySetup, run_episode, run_trials
from .solvers import extract_stationary_policy, solve_matrix_game, solve_sg

__all__ = [
    "BudgetExceededError",
    "ConfigError",
    "FiniteSG",
    "InvalidInputError",
    "LearnerParams",
    "NormalFormGame",
    "NotConvergedError",
    "ParameterError",
    "PlaySetup",
    "ProvenanceError",
    "QExploitError",
    "QuantGrid",
    "build_finite_sg",
    "build_grid",
    "extract_stationary_policy",
    "game_from_players",
    "run_episode",
    "run_trials",
    "solve_matrix_game",
    "solve_sg",
]
