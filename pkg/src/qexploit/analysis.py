"""Value bounds, Lipschitz constants and numerical checks of the approximation theory."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import BudgetExceededError, InvalidInputError, ParameterError
from .game import LearnerParams, NormalFormGame, joint_policy, next_states, reward_table
from .sgmodel import FiniteSG, QuantGrid
from .solvers import solve_matrix_games

DEFAULT_BUDGET = 10**7


def lipschitz_constants(kappa: int, gamma: float, tau: float, b_total: int, max_abs_u: float) -> tuple[float, float]:
    """``(M_kappa, L_kappa)``: bound and Lipschitz constant of the horizon-kappa value.

    ``L_kappa`` follows the recursion ``L_k = gamma L_{k-1} + L_0 (1 - gamma^{k+1}) / (1 - gamma)``
    from ``L_0 = sqrt(|B|) max|u| / tau``.
    """
    if kappa < 0:
        raise ParameterError(f"kappa must be >= 0, got {kappa}")
    L0 = np.sqrt(b_total) * max_abs_u / tau
    L = L0
    for k in range(1, kappa + 1):
        L = gamma * L + L0 * (1 - gamma ** (k + 1)) / (1 - gamma)
    M = (1 - gamma ** (kappa + 1)) / (1 - gamma) * max_abs_u
    return float(M), float(L)


def lipschitz_closed_form(kappa: int, gamma: float, tau: float, b_total: int, max_abs_u: float) -> float:
    """``L_kappa = L_0 * sum_{l<=kappa} (l + 1) gamma^l``."""
    L0 = np.sqrt(b_total) * max_abs_u / tau
    ell = np.arange(kappa + 1)
    return float(L0 * np.sum((ell + 1) * gamma**ell))


def reward_lipschitz(tau: float, b_total: int, max_abs_u: float) -> float:
    return float(np.sqrt(b_total) * max_abs_u / tau)


def quantization_error_bound(delta: float, gamma: float, tau: float, b_total: int, max_abs_u: float) -> float:
    """Sup-norm gap between exact and quantized values for any horizon."""
    return float(delta * np.sqrt(b_total) / (tau * (1 - gamma) ** 3) * max_abs_u)


@dataclass(frozen=True)
class ContinuumModel:
    """The un-quantized q-state game, for brute-force evaluation."""

    game: NormalFormGame
    params: LearnerParams
    gamma: float


@dataclass(frozen=True)
class TreeValue:
    """Root value of a finite-horizon game tree.

    ``value`` is for A-type ``maximizer``; ``strategies[j]`` is A-type ``j``'s
    root strategy.
    """

    value: float
    strategies: tuple[np.ndarray, ...]
    maximizer: int
    nodes: int


def _stage(q: np.ndarray, a_actions, zero_sum_pairs):
    """Stage-game value for A-type j1 and each A-type's strategy; ``q`` is ``(n_types, N, |A|)``."""
    n = q.shape[1]
    if len(a_actions) == 1:
        best = q[0].argmax(axis=1)
        strat = np.zeros((n, a_actions[0]))
        strat[np.arange(n), best] = 1.0
        return q[0].max(axis=1), (strat,), 0
    j1, j2 = zero_sum_pairs[0]
    stage = q[j1].reshape(n, *a_actions)
    if j1 == 1:
        stage = np.swapaxes(stage, 1, 2)
    v, x, y = solve_matrix_games(stage)
    strategies = [None, None]
    strategies[j1], strategies[j2] = x, y
    return v, tuple(strategies), j1


def brute_force_finite_horizon_value(model, z0, horizon: int, budget: int = DEFAULT_BUDGET) -> TreeValue:
    """Horizon-``horizon`` value at ``z0`` by full game-tree enumeration.

    ``model`` is either a ``FiniteSG`` (``z0`` a state index; the tree follows
    its quantized transitions) or a ``ContinuumModel`` (``z0`` a q-state; no
    quantization anywhere).  Every node expands all ``|A| * |B|`` joint-action
    branches; nothing is memoized.  Stage games are solved exactly.
    """
    if horizon < 0:
        raise ParameterError("horizon must be >= 0")
    if isinstance(model, FiniteSG):
        a_actions, pairs, gamma = model.a_actions, model.zero_sum_pairs, model.gamma
        n_a, n_b = model.next_index.shape[1:]
        nodes = [np.array([int(z0)])]

        def rewards(x):
            return model.rewards[:, x]

        def probs(x):
            return model.probs[x]

        def children(x):
            return model.next_index[x].reshape(-1)

    elif isinstance(model, ContinuumModel):
        game, params, gamma = model.game, model.params, model.gamma
        a_actions, pairs = game.a_actions, game.zero_sum_pairs
        n_a, n_b = game.n_joint_a, game.n_joint_b
        nodes = [np.asarray(z0, dtype=float).reshape(1, game.dim)]

        def rewards(x):
            return reward_table(x, game, params.tau)

        def probs(x):
            return joint_policy(x, game, params.tau)

        def children(x):
            out = np.empty((len(x), n_a, n_b, game.dim))
            for a in range(n_a):
                for b in range(n_b):
                    out[:, a, b] = next_states(x, a, b, game, params.alpha)
            return out.reshape(-1, game.dim)

    else:
        raise InvalidInputError(f"unsupported model type {type(model).__name__}")
    if len(a_actions) not in (1, 2) or (len(a_actions) == 2 and not pairs):
        raise InvalidInputError("brute force needs one A-type or a zero-sum pair")

    leaves = (n_a * n_b) ** horizon
    if leaves > budget:
        raise BudgetExceededError(
            f"tree has {leaves} leaves at horizon {horizon}, budget is {budget}", estimate=leaves
        )
    for _ in range(horizon):
        nodes.append(children(nodes[-1]))

    v, strategies, j1 = _stage(rewards(nodes[horizon]), a_actions, pairs)
    for t in range(horizon - 1, -1, -1):
        x = nodes[t]
        cont = v.reshape(len(x), n_a, n_b)
        sign = np.ones(len(a_actions))
        if len(a_actions) == 2:
            sign[pairs[0][1]] = -1.0
        # continuation value is tracked for the maximizer; the opponent's is its negation
        q = rewards(x) + gamma * sign[:, None, None] * np.einsum("nab,nb->na", cont, probs(x))[None]
        v, strategies, j1 = _stage(q, a_actions, pairs)
    total = sum(len(x) for x in nodes)
    return TreeValue(float(v[0]), tuple(s[0] for s in strategies), j1, total)


@dataclass(frozen=True)
class LipschitzReport:
    lipschitz: float
    slack: float
    max_ratio: float
    violations: int
    pairs: int

    @property
    def satisfied(self) -> bool:
        return self.violations == 0


def verify_value_lipschitz(values, grid: QuantGrid, lipschitz: float, slack: float = 0.0) -> LipschitzReport:
    """Check ``|v(d) - v(d')| <= L ||c(d) - c(d')||_1 + slack`` on axis-adjacent cells."""
    v = np.asarray(values, dtype=float).reshape(tuple(grid.intervals))
    max_ratio = 0.0
    violations = 0
    pairs = 0
    for c in range(grid.dim):
        if grid.intervals[c] < 2:
            continue
        diff = np.abs(np.diff(v, axis=c))
        h = grid.widths[c]
        pairs += diff.size
        max_ratio = max(max_ratio, float(diff.max() / h))
        violations += int(np.sum(diff > lipschitz * h + slack + 1e-12))
    return LipschitzReport(float(lipschitz), float(slack), max_ratio, violations, pairs)


@dataclass(frozen=True)
class BoundReport:
    kappa: int | None
    M_kappa: float
    L_kappa: float
    L_0: float
    delta: float
    theoretical_gap: float
    empirical_gap: float
    label: str = ""
    informational: bool = False

    @property
    def satisfied(self) -> bool:
        return self.empirical_gap <= self.theoretical_gap + 1e-9

    def to_dict(self) -> dict:
        d = asdict(self)
        d["satisfied"] = self.satisfied
        return d


def bound_report(
    empirical_gap: float,
    delta: float,
    gamma: float,
    tau: float,
    b_total: int,
    max_abs_u: float,
    kappa: int | None = None,
    label: str = "",
    informational: bool = False,
) -> BoundReport:
    """Package a measured gap with the matching theoretical constants.

    ``kappa=None`` denotes the infinite-horizon limits of ``M`` and ``L``.
    """
    L0 = reward_lipschitz(tau, b_total, max_abs_u)
    if kappa is None:
        M, L = max_abs_u / (1 - gamma), L0 / (1 - gamma) ** 2
    else:
        M, L = lipschitz_constants(kappa, gamma, tau, b_total, max_abs_u)
    return BoundReport(
        kappa=kappa,
        M_kappa=M,
        L_kappa=L,
        L_0=L0,
        delta=delta,
        theoretical_gap=quantization_error_bound(delta, gamma, tau, b_total, max_abs_u),
        empirical_gap=float(empirical_gap),
        label=label,
        informational=informational,
    )


def grid_value_gap(coarse: QuantGrid, coarse_values, fine: QuantGrid, fine_values) -> float:
    """``max_c |v_fine(c) - v_coarse(Phi_coarse(c))|`` over the fine grid's centers."""
    centers = fine.all_centers()
    mapped = np.asarray(coarse_values)[coarse.quantize(centers)]
    return float(np.max(np.abs(np.asarray(fine_values) - mapped)))


# Pairwise checks of the lemmas; each returns (lhs, rhs) arrays over the sample.


def sample_states(game: NormalFormGame, n: int, rng: np.random.Generator, bounds=None) -> np.ndarray:
    lo, hi = game.q_bounds() if bounds is None else bounds
    return rng.uniform(lo, hi, size=(n, game.dim))


def joint_policy_pairs(game: NormalFormGame, tau: float, z, zbar):
    lhs = np.abs(joint_policy(z, game, tau) - joint_policy(zbar, game, tau)).sum(axis=-1)
    rhs = np.sqrt(game.n_joint_b) / tau * np.abs(z - zbar).sum(axis=-1)
    return lhs, rhs


def reward_pairs(game: NormalFormGame, tau: float, z, zbar):
    L0 = reward_lipschitz(tau, game.n_joint_b, game.max_abs_payoff)
    lhs = np.abs(reward_table(z, game, tau) - reward_table(zbar, game, tau)).max(axis=(0, 2))
    rhs = L0 * np.abs(z - zbar).sum(axis=-1)
    return lhs, rhs


def contraction_pairs(game: NormalFormGame, alpha: float, z, zbar):
    """Next-state distance under identical ``(a, b)``, worst case over joint actions."""
    lhs = np.zeros(len(z))
    for a in range(game.n_joint_a):
        for b in range(game.n_joint_b):
            d = np.abs(next_states(z, a, b, game, alpha) - next_states(zbar, a, b, game, alpha)).sum(axis=-1)
            lhs = np.maximum(lhs, d)
    return lhs, np.abs(z - zbar).sum(axis=-1)


def kernel_pairs(game: NormalFormGame, params: LearnerParams, z, zbar, anchor, slope: float, bounds=None):
    """Expected next-state value of ``eta(x) = slope * ||x - anchor||_1``, at z vs zbar."""
    lo, hi = game.q_bounds() if bounds is None else bounds
    bound = slope * float(np.sum(np.maximum(np.abs(lo - anchor), np.abs(hi - anchor))))

    def expected_eta(x):
        pi = joint_policy(x, game, params.tau)
        out = np.zeros((len(x), game.n_joint_a))
        for a in range(game.n_joint_a):
            for b in range(game.n_joint_b):
                eta = slope * np.abs(next_states(x, a, b, game, params.alpha) - anchor).sum(axis=-1)
                out[:, a] += pi[:, b] * eta
        return out

    lhs = np.abs(expected_eta(z) - expected_eta(zbar)).max(axis=1)
    rhs = (slope + np.sqrt(game.n_joint_b) / params.tau * bound) * np.abs(z - zbar).sum(axis=-1)
    return lhs, rhs
