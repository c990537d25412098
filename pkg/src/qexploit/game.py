"""Normal-form games, softmax learners and the independent Q-learning update.

Joint actions are flattened row-major in agent index order: the A-type joint
action ``a`` indexes ``A = A^0 x A^1 x ...`` and the N-type joint action ``b``
indexes ``B = B^0 x B^1 x ...``.  Payoff tensors are stored as ``(|A|, |B|)``
matrices per agent.  A q-state ``z`` is the concatenation of every N-type's
q-vector, in N-type order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, InvalidInputError, ParameterError

A_TYPE = "A"
N_TYPE = "N"


@dataclass(frozen=True)
class LearnerParams:
    """Softmax temperature and step size of an N-type learner."""

    tau: float
    alpha: float

    def __post_init__(self):
        if not np.isfinite(self.tau) or self.tau <= 0:
            raise ParameterError(f"tau must be positive, got {self.tau}")
        if not 0 < self.alpha < 1:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True, eq=False)
class NormalFormGame:
    """Payoff tensors for A-types and N-types over joint actions ``A x B``.

    Attributes:
        a_actions: action-set size of each A-type.
        n_actions: action-set size of each N-type.
        a_payoffs: array ``(n_a_types, |A|, |B|)``.
        n_payoffs: array ``(n_n_types, |A|, |B|)``.
        zero_sum_pairs: declared pairs ``(j1, j2)`` of A-types with
            ``u^j1 + u^j2 == 0``.
        roles: for each original player, ``("A", j)`` or ``("N", i)``.  Used to
            report results in the order players were declared.
        q_init: initial q-state (length ``dim``); zeros unless overridden.
    """

    a_actions: tuple[int, ...]
    n_actions: tuple[int, ...]
    a_payoffs: np.ndarray
    n_payoffs: np.ndarray
    zero_sum_pairs: tuple[tuple[int, int], ...] = ()
    roles: tuple[tuple[str, int], ...] = ()
    q_init: np.ndarray | None = field(default=None)

    def __post_init__(self):
        a_actions = tuple(int(k) for k in self.a_actions)
        n_actions = tuple(int(k) for k in self.n_actions)
        if any(k < 1 for k in a_actions + n_actions):
            raise InvalidInputError("every action set needs at least one action")
        n_a = int(np.prod(a_actions)) if a_actions else 1
        n_b = int(np.prod(n_actions)) if n_actions else 1
        a_pay = np.array(self.a_payoffs, dtype=float).reshape(len(a_actions), n_a, n_b)
        n_pay = np.array(self.n_payoffs, dtype=float).reshape(len(n_actions), n_a, n_b)
        if not (np.all(np.isfinite(a_pay)) and np.all(np.isfinite(n_pay))):
            raise InvalidInputError("payoff tensors must contain only finite reals")
        pairs = tuple((int(j1), int(j2)) for j1, j2 in self.zero_sum_pairs)
        for j1, j2 in pairs:
            if not (0 <= j1 < len(a_actions) and 0 <= j2 < len(a_actions)) or j1 == j2:
                raise ConfigError(f"invalid zero-sum pair {(j1, j2)}")
            if not np.array_equal(a_pay[j1], -a_pay[j2]):
                raise ConfigError(
                    f"A-types {j1} and {j2} are declared zero-sum but u^{j1} + u^{j2} != 0"
                )
        roles = tuple((str(k), int(i)) for k, i in self.roles) or tuple(
            [(A_TYPE, j) for j in range(len(a_actions))]
            + [(N_TYPE, i) for i in range(len(n_actions))]
        )
        dim = sum(n_actions)
        q_init = np.zeros(dim) if self.q_init is None else np.array(self.q_init, float)
        if q_init.shape != (dim,) or not np.all(np.isfinite(q_init)):
            raise InvalidInputError(f"q_init must be a finite vector of length {dim}")
        a_pay.setflags(write=False)
        n_pay.setflags(write=False)
        q_init.setflags(write=False)
        object.__setattr__(self, "a_actions", a_actions)
        object.__setattr__(self, "n_actions", n_actions)
        object.__setattr__(self, "a_payoffs", a_pay)
        object.__setattr__(self, "n_payoffs", n_pay)
        object.__setattr__(self, "zero_sum_pairs", pairs)
        object.__setattr__(self, "roles", roles)
        object.__setattr__(self, "q_init", q_init)

    @property
    def n_a_types(self) -> int:
        return len(self.a_actions)

    @property
    def n_n_types(self) -> int:
        return len(self.n_actions)

    @property
    def n_joint_a(self) -> int:
        return self.a_payoffs.shape[1]

    @property
    def n_joint_b(self) -> int:
        return self.a_payoffs.shape[2] if self.n_a_types else self.n_payoffs.shape[2]

    @property
    def dim(self) -> int:
        """Length of the concatenated q-state."""
        return sum(self.n_actions)

    @property
    def blocks(self) -> list[slice]:
        """Slice of each N-type's q-vector inside a q-state."""
        offsets = np.concatenate([[0], np.cumsum(self.n_actions)]).astype(int)
        return [slice(offsets[i], offsets[i + 1]) for i in range(self.n_n_types)]

    @property
    def max_abs_payoff(self) -> float:
        """``max |u^j(a, b)|`` over A-types, the scale in the value bounds."""
        if self.n_a_types == 0:
            return 0.0
        return float(np.max(np.abs(self.a_payoffs)))

    def q_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-coordinate box that contains every reachable q-state.

        The IQL update is a convex combination of the current estimate and a
        realized payoff, so from ``q_init`` each entry of ``q^i`` stays inside
        the hull of ``q_init`` and the range of ``u_bar^i``.
        """
        lo = np.empty(self.dim)
        hi = np.empty(self.dim)
        for i, blk in enumerate(self.blocks):
            lo[blk] = min(0.0, float(self.n_payoffs[i].min()), float(self.q_init[blk].min()))
            hi[blk] = max(0.0, float(self.n_payoffs[i].max()), float(self.q_init[blk].max()))
        return lo, hi

    def decode_a(self, a: int) -> tuple[int, ...]:
        return tuple(int(x) for x in np.unravel_index(a, self.a_actions)) if self.a_actions else ()

    def decode_b(self, b: int) -> tuple[int, ...]:
        return tuple(int(x) for x in np.unravel_index(b, self.n_actions)) if self.n_actions else ()

    @property
    def player_actions(self) -> tuple[int, ...]:
        """Action-set sizes in declared player order."""
        return tuple(
            self.a_actions[i] if kind == A_TYPE else self.n_actions[i] for kind, i in self.roles
        )

    def player_profile(self, a: int, b: int) -> int:
        """Flat joint-action index over all players in declared order."""
        a_parts = self.decode_a(a)
        b_parts = self.decode_b(b)
        acts = [a_parts[i] if kind == A_TYPE else b_parts[i] for kind, i in self.roles]
        return int(np.ravel_multi_index(acts, self.player_actions))

    def player_payoffs(self, a: int, b: int) -> np.ndarray:
        """Realized payoff of every player, in declared order."""
        return np.array(
            [
                self.a_payoffs[i, a, b] if kind == A_TYPE else self.n_payoffs[i, a, b]
                for kind, i in self.roles
            ]
        )

    def digest(self) -> str:
        """Stable hash of the game definition."""
        h = hashlib.sha256()
        h.update(repr((self.a_actions, self.n_actions, self.zero_sum_pairs, self.roles)).encode())
        for arr in (self.a_payoffs, self.n_payoffs, self.q_init):
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return h.hexdigest()


def game_from_players(
    actions: Sequence[int],
    payoffs: Sequence[np.ndarray],
    kinds: Sequence[str],
    zero_sum: Sequence[tuple[int, int]] = (),
    q_init: Sequence[float] | None = None,
) -> NormalFormGame:
    """Build a game from a per-player description.

    Args:
        actions: action count of each player.
        payoffs: one tensor of shape ``actions`` per player.
        kinds: ``"A"`` or ``"N"`` per player.
        zero_sum: pairs of *player* indices (both A-types) declared zero-sum.
        q_init: optional initial q-state over the N-types' actions, in player order.
    """
    actions = [int(k) for k in actions]
    if not (len(actions) == len(payoffs) == len(kinds)):
        raise ConfigError("actions, payoffs and kinds must have one entry per player")
    kinds = [str(k).upper() for k in kinds]
    if any(k not in (A_TYPE, N_TYPE) for k in kinds):
        raise ConfigError(f"player kinds must be 'A' or 'N', got {kinds}")
    a_players = [p for p, k in enumerate(kinds) if k == A_TYPE]
    n_players = [p for p, k in enumerate(kinds) if k == N_TYPE]
    order = a_players + n_players
    n_a = int(np.prod([actions[p] for p in a_players])) if a_players else 1
    n_b = int(np.prod([actions[p] for p in n_players])) if n_players else 1

    def to_matrix(tensor) -> np.ndarray:
        t = np.asarray(tensor, dtype=float)
        if t.shape != tuple(actions):
            raise ConfigError(f"payoff tensor has shape {t.shape}, expected {tuple(actions)}")
        return np.transpose(t, order).reshape(n_a, n_b)

    a_pay = np.stack([to_matrix(payoffs[p]) for p in a_players]) if a_players else np.zeros((0, n_a, n_b))
    n_pay = np.stack([to_matrix(payoffs[p]) for p in n_players]) if n_players else np.zeros((0, n_a, n_b))
    roles = []
    for p, k in enumerate(kinds):
        roles.append((A_TYPE, a_players.index(p)) if k == A_TYPE else (N_TYPE, n_players.index(p)))
    pairs = []
    for p1, p2 in zero_sum:
        if kinds[p1] != A_TYPE or kinds[p2] != A_TYPE:
            raise ConfigError(f"zero-sum pair {(p1, p2)} must name two A-type players")
        pairs.append((a_players.index(p1), a_players.index(p2)))
    return NormalFormGame(
        a_actions=tuple(actions[p] for p in a_players),
        n_actions=tuple(actions[p] for p in n_players),
        a_payoffs=a_pay,
        n_payoffs=n_pay,
        zero_sum_pairs=tuple(pairs),
        roles=tuple(roles),
        q_init=None if q_init is None else np.asarray(q_init, float),
    )


def softmax_policy(q, tau: float) -> np.ndarray:
    """Boltzmann distribution ``exp(q/tau) / sum exp(q/tau)`` along the last axis.

    Uses max-subtraction, so it is safe for ``tau`` far below the payoff scale.
    """
    if not np.isfinite(tau) or tau <= 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    q = np.asarray(q, dtype=float)
    if not np.all(np.isfinite(q)):
        raise InvalidInputError("q contains non-finite entries")
    x = (q - q.max(axis=-1, keepdims=True)) / tau
    e = np.exp(x)
    return e / e.sum(axis=-1, keepdims=True)


def iql_update(q, chosen: int, payoff: float, alpha: float) -> np.ndarray:
    """One stateless Q-learning step on the entry of the chosen action."""
    q = np.array(q, dtype=float)
    if not 0 <= chosen < q.shape[-1]:
        raise InvalidInputError(f"action {chosen} out of range for {q.shape[-1]} actions")
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    q[chosen] = q[chosen] + alpha * (payoff - q[chosen])
    return q


def joint_policy(z, game: NormalFormGame, tau: float) -> np.ndarray:
    """Product of the N-types' softmax policies over ``B``.

    ``z`` may be a single q-state ``(dim,)`` or a batch ``(..., dim)``; the
    result has shape ``(..., |B|)`` flattened row-major in N-type order.
    """
    z = np.asarray(z, dtype=float)
    batch = z.shape[:-1]
    out = np.ones(batch + (1,))
    for blk in game.blocks:
        p = softmax_policy(z[..., blk], tau)
        out = (out[..., :, None] * p[..., None, :]).reshape(batch + (-1,))
    return out


def expected_reward(z, a: int, j: int, game: NormalFormGame, tau: float) -> float:
    """``E_{b ~ pi_bar(z)} u^j(a, b)`` computed as an exact finite sum."""
    return float(joint_policy(z, game, tau) @ game.a_payoffs[j, a])


def reward_table(z, game: NormalFormGame, tau: float) -> np.ndarray:
    """Expected rewards for a batch of states: shape ``(n_a_types, ..., |A|)``."""
    pi = joint_policy(z, game, tau)
    return np.einsum("...b,jab->j...a", pi, game.a_payoffs)


def tracker_step(tracker, a: int, b: int, game: NormalFormGame, alpha: float) -> np.ndarray:
    """Advance a q-tracker with the observed joint actions ``(a, b)``.

    Applies the learners' own update to every N-type block, so starting from
    the learners' initial estimates the tracker reproduces them exactly.
    """
    z = np.array(tracker, dtype=float)
    b_parts = game.decode_b(b)
    for i, blk in enumerate(game.blocks):
        z[blk] = iql_update(z[blk], b_parts[i], game.n_payoffs[i, a, b], alpha)
    return z


def next_states(z: np.ndarray, a: int, b: int, game: NormalFormGame, alpha: float) -> np.ndarray:
    """Vectorized ``tracker_step`` over a batch of states ``(M, dim)``."""
    z = np.array(z, dtype=float)
    b_parts = game.decode_b(b)
    for i, blk in enumerate(game.blocks):
        col = blk.start + b_parts[i]
        z[..., col] = z[..., col] + alpha * (game.n_payoffs[i, a, b] - z[..., col])
    return z
