"""Uniform quantization of the q-state box and the induced finite stochastic game."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, ParameterError
from .game import LearnerParams, NormalFormGame, joint_policy, next_states, reward_table

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class QuantGrid:
    """Product grid of uniform cells over a box in q-space.

    States are numbered row-major over coordinates.  Each state is represented
    by the center of its cell; ``quantize`` maps a point to the nearest center
    per coordinate, breaking ties toward the lower index.
    """

    lower: np.ndarray
    upper: np.ndarray
    intervals: np.ndarray

    def __post_init__(self):
        for name in ("lower", "upper"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = np.array(self.intervals, dtype=np.int64)
        n.setflags(write=False)
        object.__setattr__(self, "intervals", n)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def widths(self) -> np.ndarray:
        return (self.upper - self.lower) / self.intervals

    @property
    def n_states(self) -> int:
        return int(np.prod(self.intervals))

    @property
    def delta(self) -> float:
        """Certified bound on ``||z - center(quantize(z))||_1`` over the box."""
        return float(np.sum(self.widths / 2))

    def axis_centers(self, c: int) -> np.ndarray:
        k = np.arange(self.intervals[c])
        return self.lower[c] + (k + 0.5) * self.widths[c]

    def unravel(self, index) -> np.ndarray:
        """Per-coordinate cell indices of flat state indices, shape ``(..., dim)``."""
        return np.stack(np.unravel_index(np.asarray(index), tuple(self.intervals)), axis=-1)

    def center(self, index) -> np.ndarray:
        return self.lower + (self.unravel(index) + 0.5) * self.widths

    def all_centers(self) -> np.ndarray:
        return self.center(np.arange(self.n_states))

    def quantize(self, z) -> np.ndarray | int:
        """Index of the cell containing ``z`` (a point or a batch ``(..., dim)``)."""
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.dim:
            raise InvalidInputError(f"state has {z.shape[-1]} coordinates, grid has {self.dim}")
        scale = np.maximum(np.abs(self.upper - self.lower), 1.0)
        outside = (z < self.lower - 1e-9 * scale) | (z > self.upper + 1e-9 * scale)
        if np.any(outside):
            logger.warning("clipping %d coordinate(s) outside the grid box", int(outside.sum()))
        w = self.widths
        safe_w = np.where(w > 0, w, 1.0)
        k = np.ceil((z - self.lower) / safe_w).astype(np.int64) - 1
        k = np.where(w > 0, k, 0)
        k = np.clip(k, 0, self.intervals - 1)
        idx = np.ravel_multi_index(tuple(np.moveaxis(k, -1, 0)), tuple(self.intervals))
        return int(idx) if np.ndim(idx) == 0 else idx

    def to_dict(self) -> dict:
        return {
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "intervals": self.intervals.tolist(),
        }


def build_grid(game: NormalFormGame, intervals: int, bounds=None) -> QuantGrid:
    """Uniform grid with ``intervals`` cells per coordinate over the q-state box.

    ``bounds`` overrides the payoff-derived box; it is either a ``(lo, hi)``
    pair applied to every coordinate or two per-coordinate arrays.
    Coordinates whose box has zero width collapse to a single cell.
    """
    if int(intervals) < 1:
        raise ParameterError(f"intervals must be >= 1, got {intervals}")
    if bounds is None:
        lo, hi = game.q_bounds()
    else:
        lo = np.broadcast_to(np.asarray(bounds[0], float), (game.dim,)).copy()
        hi = np.broadcast_to(np.asarray(bounds[1], float), (game.dim,)).copy()
        if np.any(hi < lo):
            raise ParameterError("grid bounds must satisfy lower <= upper")
    n = np.full(game.dim, int(intervals), dtype=np.int64)
    flat = hi - lo <= 0
    if np.any(flat):
        logger.warning("degenerate grid: collapsing %d zero-width coordinate(s)", int(flat.sum()))
        n[flat] = 1
    return QuantGrid(lo, hi, n)


@dataclass(frozen=True, eq=False)
class FiniteSG:
    """Finite stochastic game over grid states.

    Transitions are stored unmerged: from state ``d`` under joint A-action
    ``a`` the game moves to ``next_index[d, a, b]`` with probability
    ``probs[d, b]`` for each joint N-action ``b``.  ``transition_row`` returns
    the merged sparse row.

    Attributes:
        rewards: ``(n_a_types, |D|, |A|)`` expected stage rewards.
        next_index: ``(|D|, |A|, |B|)`` successor indices.
        probs: ``(|D|, |B|)`` N-type joint-action probabilities.
        gamma: discount factor.
        a_actions: action-set size per A-type.
        zero_sum_pairs: declared zero-sum A-type pairs.
        provenance: description of the inputs the tables were built from.
    """

    rewards: np.ndarray
    next_index: np.ndarray
    probs: np.ndarray
    gamma: float
    a_actions: tuple[int, ...]
    zero_sum_pairs: tuple[tuple[int, int], ...] = ()
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ParameterError(f"gamma must lie in (0, 1), got {self.gamma}")
        for name in ("rewards", "next_index", "probs"):
            getattr(self, name).setflags(write=False)

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def n_a_types(self) -> int:
        return len(self.a_actions)

    @property
    def n_joint_a(self) -> int:
        return self.next_index.shape[1]

    def transition_row(self, d: int, a: int) -> tuple[np.ndarray, np.ndarray]:
        """Merged successor indices (ascending) and their positive probabilities."""
        idx = self.next_index[d, a]
        p = self.probs[d]
        uniq, inv = np.unique(idx, return_inverse=True)
        merged = np.zeros(len(uniq))
        np.add.at(merged, inv, p)
        keep = merged > 0
        return uniq[keep], merged[keep]

    def expected_next(self, v: np.ndarray) -> np.ndarray:
        """``sum_d' p(d' | d, a) v(d')`` for every ``(d, a)``."""
        return np.einsum("dab,db->da", v[self.next_index], self.probs)

    def digest(self) -> str:
        return provenance_hash(self.provenance)


def provenance_hash(provenance: dict) -> str:
    blob = json.dumps(provenance, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def sg_provenance(game: NormalFormGame, grid: QuantGrid, params: LearnerParams, gamma: float) -> dict:
    """Inputs that determine a finite SG; its hash keys every derived artifact."""
    return {
        "game": game.digest(),
        "tau": float(params.tau),
        "alpha": float(params.alpha),
        "gamma": float(gamma),
        "grid": grid.to_dict(),
    }


def build_finite_sg(
    game: NormalFormGame, grid: QuantGrid, params: LearnerParams, gamma: float
) -> FiniteSG:
    """Quantized surrogate of the q-state stochastic game.

    Rewards and transitions are evaluated at cell centers; successor states
    are obtained by applying the IQL update to the center and re-quantizing.
    """
    if grid.dim != game.dim:
        raise InvalidInputError(f"grid has {grid.dim} coordinates, game state has {game.dim}")
    centers = grid.all_centers()
    probs = joint_policy(centers, game, params.tau)
    rewards = reward_table(centers, game, params.tau)
    n_a, n_b = game.n_joint_a, game.n_joint_b
    next_index = np.empty((grid.n_states, n_a, n_b), dtype=np.int64)
    for a in range(n_a):
        for b in range(n_b):
            next_index[:, a, b] = grid.quantize(next_states(centers, a, b, game, params.alpha))
    return FiniteSG(
        rewards=rewards,
        next_index=next_index,
        probs=probs,
        gamma=float(gamma),
        a_actions=game.a_actions,
        zero_sum_pairs=game.zero_sum_pairs,
        provenance=sg_provenance(game, grid, params, gamma),
    )
