"""Repeated play of A-types (solved policies + q-trackers) against IQL N-types."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, ProvenanceError
from .game import A_TYPE, LearnerParams, NormalFormGame, iql_update, tracker_step
from .sgmodel import QuantGrid, provenance_hash, sg_provenance
from .solvers import PolicyTable


@dataclass(frozen=True)
class PlaySetup:
    """Everything an episode needs.

    ``grid`` and ``policy`` are required when the game has A-types; the
    policy's provenance must match the SG implied by ``(game, grid, params,
    gamma)``.
    """

    game: NormalFormGame
    params: LearnerParams
    gamma: float
    grid: QuantGrid | None = None
    policy: PolicyTable | None = None

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise InvalidInputError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.game.n_a_types == 0:
            return
        if self.grid is None or self.policy is None:
            raise InvalidInputError("A-types need a grid and a policy table")
        expected = provenance_hash(sg_provenance(self.game, self.grid, self.params, self.gamma))
        if self.policy.provenance != expected:
            raise ProvenanceError(
                f"policy was solved for SG {self.policy.provenance[:12]}, "
                f"this setup implies SG {expected[:12]}"
            )
        if len(self.policy.policies) != self.game.n_a_types:
            raise ProvenanceError("policy table does not cover every A-type")


@dataclass
class Trajectory:
    """One episode of ``K`` stages.

    ``a``/``b`` are flat joint actions, ``payoffs`` is ``(K, n_players)`` in
    declared player order.  ``learner_q`` holds the N-types' own estimates
    and ``tracked`` the A-types' tracker (``None`` without A-types); both have
    ``K + 1`` rows, row ``k`` being the state before stage ``k``.
    """

    a: np.ndarray
    b: np.ndarray
    profiles: np.ndarray
    payoffs: np.ndarray
    learner_q: np.ndarray
    tracked: np.ndarray | None
    seed: int

    @property
    def stages(self) -> int:
        return len(self.a)


def agent_streams(seed: int, n_agents: int, stages: int) -> np.ndarray:
    """Uniform draws ``(n_agents, stages)``; agent ``p`` uses stream ``(seed, p)``."""
    out = np.empty((n_agents, stages))
    for p in range(n_agents):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), p])))
        out[p] = rng.random(stages)
    return out


def _sample(p, u: float) -> int:
    """Inverse-CDF draw from a short probability list."""
    acc = 0.0
    for k, pk in enumerate(p):
        acc += pk
        if u < acc:
            return k
    return len(p) - 1


def _boltzmann(q: np.ndarray, tau: float) -> list[float]:
    e = np.exp((q - q.max()) / tau)
    return (e / e.sum()).tolist()


class _CellIndexer:
    """Scalar fast path of ``QuantGrid.quantize`` for the stage loop."""

    def __init__(self, grid: QuantGrid):
        w = grid.widths
        self.lower = grid.lower
        self.safe_w = np.where(w > 0, w, 1.0)
        self.flat = w <= 0
        self.top = grid.intervals - 1
        self.strides = np.cumprod(np.concatenate([[1], grid.intervals[::-1]]))[-2::-1]

    def __call__(self, z: np.ndarray) -> int:
        k = np.ceil((z - self.lower) / self.safe_w) - 1
        k[self.flat] = 0
        k = np.clip(k, 0, self.top)
        return int(k @ self.strides)


def run_episode(setup: PlaySetup, stages: int, seed: int) -> Trajectory:
    """Simulate ``stages`` rounds of the repeated game.

    A-types quantize their tracked state and sample from their policy at that
    cell; N-types sample from the softmax of their estimates.  After every
    stage the N-types apply the IQL update and the A-types advance their
    trackers with the observed actions.
    """
    if stages < 0:
        raise InvalidInputError("stages must be >= 0")
    game, params = setup.game, setup.params
    n_players = len(game.roles)
    n_a, n_b = game.n_joint_a, game.n_joint_b
    u = agent_streams(seed, n_players, stages)
    profile_of = np.array([[game.player_profile(a, b) for b in range(n_b)] for a in range(n_a)])
    payoff_of = np.array([[game.player_payoffs(a, b) for b in range(n_b)] for a in range(n_a)])
    a_hist = np.zeros(stages, dtype=np.int64)
    b_hist = np.zeros(stages, dtype=np.int64)
    learner = [np.array(game.q_init[blk]) for blk in game.blocks]
    learner_hist = np.zeros((stages + 1, game.dim))
    learner_hist[0] = game.q_init
    has_a = game.n_a_types > 0
    tracker = np.array(game.q_init) if has_a else None
    tracked = np.zeros((stages + 1, game.dim)) if has_a else None
    if has_a:
        tracked[0] = tracker
    a_player = [p for _, p in sorted((i, p) for p, (kind, i) in enumerate(game.roles) if kind == A_TYPE)]
    n_player = [p for _, p in sorted((i, p) for p, (kind, i) in enumerate(game.roles) if kind != A_TYPE)]
    a_strides = np.cumprod((1,) + game.a_actions[::-1])[-2::-1] if has_a else ()
    b_strides = np.cumprod((1,) + game.n_actions[::-1])[-2::-1] if game.n_n_types else ()

    cell_of = _CellIndexer(setup.grid) if has_a else None
    for k in range(stages):
        a = 0
        if has_a:
            cell = cell_of(tracker)
            for j in range(game.n_a_types):
                a += a_strides[j] * _sample(setup.policy.policies[j][cell].tolist(), u[a_player[j], k])
        b_parts = [_sample(_boltzmann(q, params.tau), u[n_player[i], k]) for i, q in enumerate(learner)]
        b = int(sum(s * x for s, x in zip(b_strides, b_parts)))
        a = int(a)
        a_hist[k], b_hist[k] = a, b
        for i in range(game.n_n_types):
            learner[i] = iql_update(learner[i], b_parts[i], game.n_payoffs[i, a, b], params.alpha)
        learner_hist[k + 1] = np.concatenate(learner) if learner else []
        if has_a:
            tracker = tracker_step(tracker, a, b, game, params.alpha)
            tracked[k + 1] = tracker
    profiles = profile_of[a_hist, b_hist] if stages else np.zeros(0, dtype=np.int64)
    payoffs = payoff_of[a_hist, b_hist] if stages else np.zeros((0, n_players))
    return Trajectory(a_hist, b_hist, profiles, payoffs, learner_hist, tracked, int(seed))


def normalized_utility(trajectory: Trajectory, player: int, gamma: float) -> float:
    """``(1 - gamma) * sum_k gamma^k * payoff_k`` for one player."""
    if not 0 < gamma < 1:
        raise InvalidInputError(f"gamma must lie in (0, 1), got {gamma}")
    disc = gamma ** np.arange(trajectory.stages)
    return float((1 - gamma) * np.sum(disc * trajectory.payoffs[:, player]))


@dataclass
class TrialSummary:
    """Statistics over independent episodes.

    ``frequencies`` is ``(K, n_profiles)``: the empirical frequency of each
    joint profile over stages ``0..k`` (or over a trailing window),
    averaged over trials.  ``running_payoff`` is the analogous mean payoff
    ``(K, n_players)``.  ``utilities`` holds the normalized discounted utility
    of every trial and player.
    """

    frequencies: np.ndarray
    running_payoff: np.ndarray
    utilities: np.ndarray
    seeds: list[int]
    window: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_trials(self) -> int:
        return len(self.seeds)

    @property
    def mean_utility(self) -> np.ndarray:
        return self.utilities.mean(axis=0)

    @property
    def stderr_utility(self) -> np.ndarray:
        n = self.n_trials
        if n < 2:
            return np.zeros(self.utilities.shape[1])
        return self.utilities.std(axis=0, ddof=1) / np.sqrt(n)


def _running_mean(x: np.ndarray, window: int | None) -> np.ndarray:
    c = np.cumsum(x, axis=0)
    k = np.arange(1, len(x) + 1)[:, None]
    if window is None:
        return c / k
    w = int(window)
    shifted = np.zeros_like(c)
    shifted[w:] = c[:-w]
    return (c - shifted) / np.minimum(k, w)


def trajectory_statistics(traj: Trajectory, n_profiles: int, window: int | None = None):
    onehot = np.zeros((traj.stages, n_profiles))
    onehot[np.arange(traj.stages), traj.profiles] = 1.0
    return _running_mean(onehot, window), _running_mean(traj.payoffs, window)


def run_trials(
    setup: PlaySetup, stages: int, n_trials: int, base_seed: int, window: int | None = None
) -> TrialSummary:
    """Run episodes with seeds ``base_seed + t`` and aggregate them in trial order."""
    if n_trials < 1:
        raise InvalidInputError("n_trials must be >= 1")
    n_profiles = int(np.prod(setup.game.player_actions))
    n_players = len(setup.game.roles)
    freq = np.zeros((stages, n_profiles))
    pay = np.zeros((stages, n_players))
    utils = np.zeros((n_trials, n_players))
    seeds = []
    for t in range(n_trials):
        seed = int(base_seed) + t
        traj = run_episode(setup, stages, seed)
        f, p = trajectory_statistics(traj, n_profiles, window)
        freq += f
        pay += p
        utils[t] = [normalized_utility(traj, q, setup.gamma) for q in range(n_players)]
        seeds.append(seed)
    return TrialSummary(freq / n_trials, pay / n_trials, utils, seeds, window)


def profile_labels(game: NormalFormGame, action_names=None) -> list[str]:
    """Labels like ``"C-D"`` for every joint profile in declared player order."""
    labels = []
    for idx in range(int(np.prod(game.player_actions))):
        parts = np.unravel_index(idx, game.player_actions)
        names = [
            action_names[p][k] if action_names else str(int(k)) for p, k in enumerate(parts)
        ]
        labels.append("-".join(names))
    return labels


def summary_csv(
    summary: TrialSummary,
    game: NormalFormGame,
    player_names: list[str],
    meta: dict,
    action_names=None,
) -> str:
    """CSV text: ``#``-prefixed JSON metadata lines, then one row per stage."""
    buf = io.StringIO()
    header = dict(meta)
    header["seeds"] = summary.seeds
    header["window"] = summary.window
    header["mean_utility"] = dict(zip(player_names, map(float, summary.mean_utility)))
    header["stderr_utility"] = dict(zip(player_names, map(float, summary.stderr_utility)))
    for key in sorted(header):
        buf.write(f"# {key}: {json.dumps(header[key], sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    labels = profile_labels(game, action_names)
    writer.writerow(["stage"] + [f"freq[{lab}]" for lab in labels] + [f"payoff[{n}]" for n in player_names])
    for k in range(summary.frequencies.shape[0]):
        row = [k] + [f"{x:.10g}" for x in summary.frequencies[k]] + [f"{x:.10g}" for x in summary.running_payoff[k]]
        writer.writerow(row)
    return buf.getvalue()
