"""End-to-end numerical verification of the Lipschitz and quantization bounds."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import analysis as an
from .experiments import random_tensor
from .game import LearnerParams, NormalFormGame, game_from_players
from .sgmodel import build_finite_sg, build_grid
from .solvers import solve_sg


@dataclass
class Regime:
    """Parameters of one verification run."""

    tau: float = 1.0
    gamma: float = 0.5
    alpha: float = 0.05
    intervals: int = 200
    horizon: int = 5
    pairs: int = 100_000
    coarse: tuple[int, ...] = (50, 100, 200)
    reference: int = 400
    oracle_horizon: int = 3
    oracle_states: int = 25
    seed: int = 0
    informational: bool = False


def zero_sum_test_game(seed: int = 0) -> NormalFormGame:
    """Two zero-sum A-types and one 2-action N-type, payoffs uniform on [0, 1]."""
    U_tilde = random_tensor(seed, (2, 2, 2))
    U = random_tensor(seed + 1, (2, 2, 2))
    return game_from_players([2, 2, 2], [U, -U, U_tilde], ["A", "A", "N"], zero_sum=[(0, 1)])


def _pair_record(name: str, lhs: np.ndarray, rhs: np.ndarray, informational: bool) -> dict:
    ratio = np.divide(lhs, rhs, out=np.zeros_like(lhs), where=rhs > 0)
    violations = int(np.sum(lhs > rhs + 1e-12))
    return {
        "check": name,
        "samples": int(len(lhs)),
        "max_ratio": float(ratio.max()),
        "violations": violations,
        "satisfied": violations == 0,
        "informational": informational,
    }


def lemma_records(game: NormalFormGame, params: LearnerParams, n_pairs: int, rng, informational=False) -> list[dict]:
    z = an.sample_states(game, n_pairs, rng)
    zbar = an.sample_states(game, n_pairs, rng)
    lo, hi = game.q_bounds()
    anchor = rng.uniform(lo, hi)
    slope = float(rng.uniform(0.5, 2.0))
    return [
        _pair_record("joint-policy-lipschitz", *an.joint_policy_pairs(game, params.tau, z, zbar), informational),
        _pair_record("reward-lipschitz", *an.reward_pairs(game, params.tau, z, zbar), informational),
        _pair_record("next-state-contraction", *an.contraction_pairs(game, params.alpha, z, zbar), informational),
        _pair_record("kernel-bound", *an.kernel_pairs(game, params, z, zbar, anchor, slope), informational),
    ]


def value_records(game: NormalFormGame, regime: Regime) -> list[dict]:
    """Boundedness, contraction and value-Lipschitz checks on one solved grid."""
    params = LearnerParams(regime.tau, regime.alpha)
    grid = build_grid(game, regime.intervals)
    sg = build_finite_sg(game, grid, params, regime.gamma)
    res = solve_sg(sg, snapshots=regime.horizon + 1)
    b, u = game.n_joint_b, game.max_abs_payoff
    bound = an.quantization_error_bound(grid.delta, regime.gamma, regime.tau, b, u)
    info = regime.informational
    out = []
    steps = res.residuals
    excess = steps[1:] - (regime.gamma * steps[:-1] + 1e-12)
    out.append(
        {
            "check": "sweep-contraction",
            "samples": int(len(excess)),
            "max_excess": float(excess.max()) if len(excess) else 0.0,
            "violations": int(np.sum(excess > 0)),
            "satisfied": bool(np.all(excess <= 0)),
            "informational": info,
        }
    )
    m_inf = u / (1 - regime.gamma)
    out.append(
        {
            "check": "value-bound-infinite",
            "max_abs_value": float(np.abs(res.values).max()),
            "bound": m_inf,
            "satisfied": bool(np.abs(res.values).max() <= m_inf + 1e-9),
            "informational": info,
        }
    )
    for kappa, v in enumerate(res.horizon_values):
        M, L = an.lipschitz_constants(kappa, regime.gamma, regime.tau, b, u)
        out.append(
            {
                "check": f"value-bound-k{kappa}",
                "max_abs_value": float(np.abs(v).max()),
                "bound": M,
                "satisfied": bool(np.abs(v).max() <= M + 1e-9),
                "informational": info,
            }
        )
        slack = 0.0 if kappa == 0 else 2 * bound
        rep = an.verify_value_lipschitz(v, grid, L, slack)
        out.append({"check": f"value-lipschitz-k{kappa}", **asdict(rep), "satisfied": rep.satisfied, "informational": info})
    L_inf = an.reward_lipschitz(regime.tau, b, u) / (1 - regime.gamma) ** 2
    rep = an.verify_value_lipschitz(res.values, grid, L_inf, 2 * bound)
    out.append({"check": "value-lipschitz-converged", **asdict(rep), "satisfied": rep.satisfied, "informational": info})
    return out


def refinement_reports(game: NormalFormGame, regime: Regime) -> tuple[list[an.BoundReport], bool]:
    """Gap of each coarse solution to the reference grid, and whether it shrinks with refinement."""
    params = LearnerParams(regime.tau, regime.alpha)
    solved = {}
    for n in sorted(set(regime.coarse) | {regime.reference}):
        grid = build_grid(game, n)
        solved[n] = (grid, solve_sg(build_finite_sg(game, grid, params, regime.gamma)).values)
    fine_grid, fine_v = solved[regime.reference]
    reports = []
    for n in regime.coarse:
        grid, v = solved[n]
        gap = an.grid_value_gap(grid, v, fine_grid, fine_v)
        reports.append(
            an.bound_report(
                gap, grid.delta, regime.gamma, regime.tau, game.n_joint_b, game.max_abs_payoff,
                label=f"grid-{n}-vs-{regime.reference}", informational=regime.informational,
            )
        )
    gaps = [r.empirical_gap for r in reports]
    monotone = all(b < a for a, b in zip(gaps, gaps[1:]))
    return reports, monotone


def oracle_reports(game: NormalFormGame, regime: Regime) -> list[an.BoundReport]:
    """Quantized finite-horizon values vs un-quantized brute-force values at grid centers."""
    params = LearnerParams(regime.tau, regime.alpha)
    grid = build_grid(game, regime.intervals)
    res = solve_sg(build_finite_sg(game, grid, params, regime.gamma), snapshots=regime.oracle_horizon + 1)
    model = an.ContinuumModel(game, params, regime.gamma)
    states = np.unique(np.linspace(0, grid.n_states - 1, regime.oracle_states).astype(int))
    reports = []
    for kappa in range(regime.oracle_horizon + 1):
        exact = np.array([an.brute_force_finite_horizon_value(model, grid.center(d), kappa).value for d in states])
        gap = float(np.max(np.abs(exact - res.horizon_values[kappa][states])))
        reports.append(
            an.bound_report(
                gap, grid.delta, regime.gamma, regime.tau, game.n_joint_b, game.max_abs_payoff,
                kappa=kappa, label=f"oracle-k{kappa}", informational=regime.informational,
            )
        )
    return reports


def run_verification(regime: Regime, game: NormalFormGame | None = None) -> dict:
    """Run every check for one regime and collect the records."""
    game = game if game is not None else zero_sum_test_game(regime.seed)
    rng = np.random.default_rng(regime.seed)
    params = LearnerParams(regime.tau, regime.alpha)
    records = lemma_records(game, params, regime.pairs, rng, regime.informational)
    records += value_records(game, regime)
    refinement, monotone = refinement_reports(game, regime)
    records.append(
        {"check": "refinement-monotone", "satisfied": monotone, "informational": regime.informational,
         "gaps": [r.empirical_gap for r in refinement]}
    )
    return {
        "regime": asdict(regime),
        "records": records,
        "bounds": [r.to_dict() for r in refinement + oracle_reports(game, regime)],
    }


def summary_table(report: dict) -> str:
    lines = [f"regime: {report['regime']}"]
    lines.append(f"{'check':32s} {'ok':5s} detail")
    for rec in report["records"]:
        detail = {k: v for k, v in rec.items() if k not in ("check", "satisfied", "informational")}
        flag = "yes" if rec["satisfied"] else ("info" if rec["informational"] else "NO")
        lines.append(f"{rec['check']:32s} {flag:5s} {detail}")
    for b in report["bounds"]:
        flag = "yes" if b["satisfied"] else ("info" if b["informational"] else "NO")
        lines.append(
            f"{b['label']:32s} {flag:5s} empirical={b['empirical_gap']:.3e} bound={b['theoretical_gap']:.3e}"
        )
    return "\n".join(lines)
