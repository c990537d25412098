"""Game generators and the experiment families used by ``qexploit reproduce``."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, NotConvergedError
from .game import A_TYPE, LearnerParams, NormalFormGame, game_from_players
from .sgmodel import QuantGrid, build_finite_sg, build_grid
from .sim import PlaySetup, TrialSummary, run_trials
from .solvers import DEFAULT_MAX_ITERS, DEFAULT_STOP, SolveResult, extract_stationary_policy, solve_sg

logger = logging.getLogger(__name__)

FAMILIES = ("pd-1v1", "zerosum-1v1", "potential-aligned", "potential-misaligned", "table2")

# Row player's payoff; the column player's is the transpose.  0 = C, 1 = D.
PD_ROW = np.array([[2 / 3, 0.0], [1.0, 1 / 3]])


def prisoners_dilemma() -> tuple[np.ndarray, np.ndarray]:
    return PD_ROW.copy(), PD_ROW.T.copy()


def random_zero_sum(seed: int, n_actions: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Row payoff uniform on [0, 1]; the column player receives its negation."""
    U = np.random.default_rng(seed).uniform(0.0, 1.0, size=(n_actions, n_actions))
    return U, -U


def random_tensor(seed: int, shape) -> np.ndarray:
    return np.random.default_rng(seed).uniform(0.0, 1.0, size=tuple(shape))


@dataclass
class Scenario:
    """Players of one experiment: payoff tensors plus a type per player."""

    name: str
    actions: list[int]
    payoffs: list[np.ndarray]
    kinds: list[str]
    player_names: list[str]
    payoff_labels: list[str]
    zero_sum: list[tuple[int, int]] = field(default_factory=list)
    action_names: list[list[str]] | None = None
    q_init: list[float] | None = None

    def game(self) -> NormalFormGame:
        return game_from_players(self.actions, self.payoffs, self.kinds, self.zero_sum, self.q_init)

    def with_kinds(self, name: str, kinds: list[str], zero_sum=()) -> "Scenario":
        return replace(self, name=name, kinds=list(kinds), zero_sum=list(zero_sum))

    def dynamics(self) -> list[str]:
        n_a = sum(k == A_TYPE for k in self.kinds)
        label = "Minimax-DP" if n_a == 2 else "DP"
        return [label if k == A_TYPE else "IQL" for k in self.kinds]


@dataclass
class RunSettings:
    tau: float = 0.01
    alpha: float = 0.05
    gamma: float = 0.8
    intervals: int | None = None
    intervals_one_n: int = 100
    intervals_multi_dim: int = 20
    stop: float = DEFAULT_STOP
    max_iters: int = DEFAULT_MAX_ITERS
    stages: int = 1000
    trials: int = 100
    base_seed: int = 0
    window: int | None = None

    @property
    def params(self) -> LearnerParams:
        return LearnerParams(self.tau, self.alpha)

    def intervals_for(self, game: NormalFormGame) -> int:
        """Default resolution: 100 intervals for a 2-dimensional q-state, 20 otherwise."""
        if self.intervals is not None:
            return self.intervals
        return self.intervals_one_n if game.dim <= 2 else self.intervals_multi_dim


@dataclass
class ScenarioRun:
    scenario: Scenario
    game: NormalFormGame
    summary: TrialSummary
    grid: QuantGrid | None = None
    result: SolveResult | None = None


def solve_scenario(scenario: Scenario, settings: RunSettings, grid_bounds=None):
    """Build and solve the quantized SG for a scenario with A-types."""
    game = scenario.game()
    grid = build_grid(game, settings.intervals_for(game), grid_bounds)
    sg = build_finite_sg(game, grid, settings.params, settings.gamma)
    logger.info("%s: solving SG with %d states", scenario.name, sg.n_states)
    result = solve_sg(sg, settings.stop, settings.max_iters)
    return game, grid, sg, result


def run_scenario(scenario: Scenario, settings: RunSettings, grid_bounds=None) -> ScenarioRun:
    """Solve (when needed) and simulate one scenario."""
    game = scenario.game()
    grid = result = None
    if game.n_a_types:
        game, grid, _, result = solve_scenario(scenario, settings, grid_bounds)
        if not result.converged:
            raise NotConvergedError(f"{scenario.name}: solver residual {result.residual:.3e}")
        setup = PlaySetup(game, settings.params, settings.gamma, grid, extract_stationary_policy(result))
    else:
        setup = PlaySetup(game, settings.params, settings.gamma)
    summary = run_trials(setup, settings.stages, settings.trials, settings.base_seed, settings.window)
    return ScenarioRun(scenario, game, summary, grid, result)


def family_scenarios(name: str, seed: int = 0) -> list[Scenario]:
    """Baseline and strategic scenarios of a named family (baseline first)."""
    if name == "pd-1v1":
        row, col = prisoners_dilemma()
        base = Scenario(
            "NxN", [2, 2], [row, col], ["N", "N"], ["row", "col"], ["U_row", "U_col"],
            action_names=[["C", "D"], ["C", "D"]],
        )
        return [base, base.with_kinds("AxN", ["A", "N"])]
    if name == "zerosum-1v1":
        U, V = random_zero_sum(seed)
        base = Scenario("NxN", [4, 4], [U, V], ["N", "N"], ["row", "col"], ["U", "-U"])
        return [base, base.with_kinds("AxN", ["A", "N"])]
    if name in ("potential-aligned", "potential-misaligned"):
        phi = random_tensor(seed, (2, 2, 2))
        a_pay = phi if name == "potential-aligned" else -phi
        base = Scenario(
            "NxNxN", [2, 2, 2], [a_pay, phi, phi], ["N", "N", "N"],
            ["agent0", "agent1", "agent2"], ["phi" if a_pay is phi else "-phi", "phi", "phi"],
        )
        return [base, base.with_kinds("NxNxA", ["A", "N", "N"])]
    if name == "table2":
        U_tilde = random_tensor(seed, (2, 2, 2))
        U = random_tensor(seed + 1, (2, 2, 2))
        base = Scenario(
            "NxNxN", [2, 2, 2], [U_tilde, U, -U], ["N", "N", "N"],
            ["agent0", "agent1", "agent2"], ["U~", "U", "-U"],
        )
        return [
            base,
            base.with_kinds("NxAxN", ["N", "A", "N"]),
            base.with_kinds("AxAxN", ["N", "A", "A"], zero_sum=[(1, 2)]),
        ]
    raise ConfigError(f"unknown family {name!r}; choose one of: {', '.join(FAMILIES)}")


def comparison_rows(runs: list[ScenarioRun]) -> list[dict]:
    """One row per (scenario, player): type, payoff label, dynamics, mean utility."""
    rows = []
    for run in runs:
        sc = run.scenario
        mean, se = run.summary.mean_utility, run.summary.stderr_utility
        for p, dyn in enumerate(sc.dynamics()):
            rows.append(
                {
                    "scenario": sc.name,
                    "player": sc.player_names[p],
                    "type": f"{sc.kinds[p]}-type",
                    "payoff": sc.payoff_labels[p],
                    "dynamics": dyn,
                    "mean_utility": float(mean[p]),
                    "stderr": float(se[p]),
                }
            )
    return rows


def format_table(rows: list[dict]) -> str:
    cols = ["scenario", "player", "type", "payoff", "dynamics", "mean_utility", "stderr"]
    cells = [[f"{r[c]:.4f}" if isinstance(r[c], float) else str(r[c]) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    line = "  ".join(c.ljust(w) for c, w in zip(cols, widths))
    out = [line, "-" * len(line)]
    out += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(out)
