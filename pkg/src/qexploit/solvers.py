"""Exact zero-sum matrix games and tabular value iteration on a finite SG.

Matrix games are solved by enumerating the vertices of the maximin linear
program: every vertex fixes a row support ``S`` and an equally sized set of
tight columns ``T`` and solves the square system ``M[S, T]^T x_S = v 1,
sum(x_S) = 1``.  Action sets here have at most a handful of actions, so the
enumeration is cheap, exact up to floating point, and vectorizes over
thousands of states at once.  Among optimal vertices the first one in
(support size, lexicographic) order wins, which makes the returned strategy
reproducible.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvalidInputError, NotConvergedError
from .sgmodel import FiniteSG

logger = logging.getLogger(__name__)

DEFAULT_STOP = 1e-8
DEFAULT_MAX_ITERS = 10_000


@dataclass(frozen=True)
class MatrixGameSolution:
    value: float
    row_strategy: np.ndarray
    col_strategy: np.ndarray


@lru_cache(maxsize=None)
def _supports(m: int, n: int) -> tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]:
    pairs = []
    for k in range(1, min(m, n) + 1):
        for rows in itertools.combinations(range(m), k):
            for cols in itertools.combinations(range(n), k):
                pairs.append((rows, cols))
    return tuple(pairs)


def _maximin(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row player's maximin value and strategy for a batch ``(N, m, n)``."""
    N, m, n = M.shape
    scale = 1.0 + np.abs(M).max(axis=(1, 2))
    tie_tol = 1e-12 * scale
    best_val = np.full(N, -np.inf)
    best_x = np.zeros((N, m))
    for rows, cols in _supports(m, n):
        k = len(rows)
        if k == 1:
            x = np.zeros((N, m))
            x[:, rows[0]] = 1.0
            ok = np.ones(N, dtype=bool)
        else:
            sub = M[:, rows][:, :, cols]
            A = np.zeros((N, k + 1, k + 1))
            A[:, :k, :k] = np.swapaxes(sub, 1, 2)
            A[:, :k, k] = -1.0
            A[:, k, :k] = 1.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            det = np.linalg.det(A)
            ok = np.abs(det) > 1e-13 * scale**k
            if not ok.any():
                continue
            sol = np.linalg.solve(A[ok], np.broadcast_to(rhs, (int(ok.sum()), k + 1))[..., None])[..., 0]
            xs = sol[:, :k]
            feasible = np.all(xs >= -1e-12, axis=1)
            xs = np.clip(xs, 0.0, None)
            xs /= xs.sum(axis=1, keepdims=True)
            x = np.zeros((N, m))
            x[np.ix_(np.flatnonzero(ok), rows)] = xs
            ok[np.flatnonzero(ok)[~feasible]] = False
        guarantee = np.min(np.einsum("Nm,Nmn->Nn", x, M), axis=1)
        better = ok & (guarantee > best_val + tie_tol)
        best_val = np.where(better, guarantee, best_val)
        best_x[better] = x[better]
    return best_val, best_x


def solve_matrix_games(M) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched zero-sum solve; the row player maximizes ``M``.

    Args:
        M: payoff array of shape ``(..., m, n)``.

    Returns:
        ``(values, row_strategies, col_strategies)`` with leading batch shape.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim < 2 or M.shape[-1] < 1 or M.shape[-2] < 1:
        raise InvalidInputError(f"expected a (..., m, n) payoff array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("payoff matrix contains non-finite entries")
    batch, (m, n) = M.shape[:-2], M.shape[-2:]
    flat = M.reshape(-1, m, n)
    value, x = _maximin(flat)
    _, y = _maximin(-np.swapaxes(flat, 1, 2))
    return value.reshape(batch), x.reshape(batch + (m,)), y.reshape(batch + (n,))


def solve_matrix_game(M) -> MatrixGameSolution:
    """Value and optimal mixed strategies of the zero-sum game ``M`` (row maximizes)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise InvalidInputError(f"expected a matrix, got shape {M.shape}")
    v, x, y = solve_matrix_games(M[None])
    return MatrixGameSolution(float(v[0]), x[0], y[0])


@dataclass
class SolveResult:
    """Outcome of value iteration on a finite SG.

    ``values`` holds the value of A-type ``maximizer`` at every grid state; in
    a zero-sum pair the opponent's value is its negation (see ``value_of``).
    ``policies[j]`` is an ``(|D|, |A^j|)`` table of mixed strategies.
    ``residuals[k]`` is ``||v_k - v_{k-1}||_inf`` with ``v_{-1} = 0``.
    """

    values: np.ndarray
    policies: list[np.ndarray]
    iterations: int
    residual: float
    converged: bool
    stop: float
    gamma: float
    maximizer: int = 0
    minimizer: int | None = None
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    horizon_values: np.ndarray | None = None
    provenance: str = ""

    def value_of(self, j: int) -> np.ndarray:
        if j == self.maximizer:
            return self.values
        if j == self.minimizer:
            return -self.values
        raise InvalidInputError(f"no value recorded for A-type {j}")


@dataclass(frozen=True)
class PolicyTable:
    """Per-state mixed strategies of every A-type, tied to an SG provenance hash."""

    policies: tuple[np.ndarray, ...]
    provenance: str


def _iterate(sg: FiniteSG, rewards: np.ndarray, backup, stop: float, max_iters: int, snapshots: int):
    v = np.zeros(sg.n_states)
    residuals = []
    history = []
    extra = None
    converged = False
    for _ in range(max_iters):
        q = rewards + sg.gamma * sg.expected_next(v)
        v_new, extra = backup(q)
        residuals.append(float(np.max(np.abs(v_new - v))))
        v = v_new
        if len(history) < snapshots:
            history.append(v.copy())
        if residuals[-1] <= stop:
            converged = True
            break
    return v, extra, np.array(residuals), history, converged


def mdp_value_iteration(
    sg: FiniteSG, stop: float = DEFAULT_STOP, max_iters: int = DEFAULT_MAX_ITERS, snapshots: int = 0
) -> SolveResult:
    """Bellman iteration for a single A-type; greedy policy with lowest-index ties.

    ``snapshots`` keeps the first that many iterates ``v_0, v_1, ...`` as
    finite-horizon values.
    """
    if sg.n_a_types != 1:
        raise InvalidInputError(f"MDP solve needs exactly one A-type, got {sg.n_a_types}")

    def backup(q):
        return q.max(axis=1), q.argmax(axis=1)

    v, greedy, residuals, history, converged = _iterate(sg, sg.rewards[0], backup, stop, max_iters, snapshots)
    policy = np.zeros((sg.n_states, sg.n_joint_a))
    if greedy is not None:
        policy[np.arange(sg.n_states), greedy] = 1.0
    return _result(sg, v, [policy], residuals, history, converged, stop, 0, None)


def minimax_value_iteration(
    sg: FiniteSG, stop: float = DEFAULT_STOP, max_iters: int = DEFAULT_MAX_ITERS, snapshots: int = 0
) -> SolveResult:
    """Shapley iteration for two zero-sum A-types.

    Each sweep solves the stage matrix game ``Q(d, a^j1, a^j2)`` exactly at
    every state from the previous iterate (Jacobi order).  Strategies come
    from the stage games of the last sweep.
    """
    if sg.n_a_types != 2 or not sg.zero_sum_pairs:
        raise InvalidInputError("minimax iteration needs two A-types declared zero-sum")
    j1, j2 = sg.zero_sum_pairs[0]
    n1, n2 = sg.a_actions

    def backup(q):
        stage = q.reshape(sg.n_states, n1, n2)
        if j1 == 1:
            stage = np.swapaxes(stage, 1, 2)
        values, x, y = solve_matrix_games(stage)
        return values, (x, y)

    v, strategies, residuals, history, converged = _iterate(sg, sg.rewards[j1], backup, stop, max_iters, snapshots)
    policies = [np.zeros((sg.n_states, n1)), np.zeros((sg.n_states, n2))]
    if strategies is not None:
        policies[j1], policies[j2] = strategies
    return _result(sg, v, policies, residuals, history, converged, stop, j1, j2)


def _result(sg, v, policies, residuals, history, converged, stop, j1, j2) -> SolveResult:
    residual = float(residuals[-1]) if len(residuals) else np.inf
    if not converged:
        logger.warning("value iteration stopped after %d sweeps, residual %.3e", len(residuals), residual)
    return SolveResult(
        values=v,
        policies=policies,
        iterations=len(residuals),
        residual=residual,
        converged=converged,
        stop=stop,
        gamma=sg.gamma,
        maximizer=j1,
        minimizer=j2,
        residuals=residuals,
        horizon_values=np.array(history) if history else None,
        provenance=sg.digest(),
    )


def solve_sg(sg: FiniteSG, stop: float = DEFAULT_STOP, max_iters: int = DEFAULT_MAX_ITERS, snapshots: int = 0) -> SolveResult:
    """Dispatch to the MDP or minimax solver by A-type count."""
    if sg.n_a_types == 1:
        return mdp_value_iteration(sg, stop, max_iters, snapshots)
    return minimax_value_iteration(sg, stop, max_iters, snapshots)


def extract_stationary_policy(result: SolveResult) -> PolicyTable:
    """Stationary strategy table for simulation; refuses unconverged results."""
    if not result.converged:
        raise NotConvergedError(
            f"solve did not converge: residual {result.residual:.3e} > stop {result.stop:.3e} "
            f"after {result.iterations} sweeps"
        )
    return PolicyTable(tuple(np.array(p) for p in result.policies), result.provenance)
