import numpy as np
import pytest

from qexploit import analysis as an
from qexploit.errors import BudgetExceededError, InvalidInputError, ParameterError
from qexploit.experiments import PD_ROW
from qexploit.game import LearnerParams, game_from_players
from qexploit.sgmodel import QuantGrid, build_finite_sg, build_grid
from qexploit.solvers import solve_sg
from qexploit.verify import Regime, run_verification


def test_lipschitz_constants_known_values():
    # |B|=4, max|u|=1, tau=1: L0 = 2; gamma=0.5, kappa=1: L1 = 0.5*2 + 2*1.5 = 4
    M, L = an.lipschitz_constants(1, 0.5, 1.0, 4, 1.0)
    assert M == pytest.approx(1.5)
    assert L == pytest.approx(4.0)
    M0, L0 = an.lipschitz_constants(0, 0.5, 1.0, 4, 1.0)
    assert (M0, L0) == (1.0, 2.0)
    with pytest.raises(ParameterError):
        an.lipschitz_constants(-1, 0.5, 1.0, 4, 1.0)


def test_recursion_equals_closed_form():
    for gamma in (0.1, 0.5, 0.8, 0.99):
        for kappa in range(101):
            _, L = an.lipschitz_constants(kappa, gamma, 0.3, 6, 2.0)
            closed = an.lipschitz_closed_form(kappa, gamma, 0.3, 6, 2.0)
            assert abs(L - closed) <= 1e-12 * closed


def test_constants_monotone_with_limits():
    gamma, tau, b, u = 0.8, 0.5, 2, 1.0
    vals = [an.lipschitz_constants(k, gamma, tau, b, u) for k in range(400)]
    M = np.array([v[0] for v in vals])
    L = np.array([v[1] for v in vals])
    assert np.all(np.diff(M) >= 0) and np.all(np.diff(L) >= 0)
    assert M[-1] == pytest.approx(u / (1 - gamma), rel=1e-12)
    assert L[-1] == pytest.approx(an.reward_lipschitz(tau, b, u) / (1 - gamma) ** 2, rel=1e-12)


def test_quantization_bound_formula():
    assert an.quantization_error_bound(0.01, 0.5, 1.0, 4, 1.0) == pytest.approx(0.01 * 2 / 0.125)


def test_constant_values_are_lipschitz_with_zero_ratio():
    grid = QuantGrid([0.0, 0.0], [1.0, 1.0], [5, 5])
    rep = an.verify_value_lipschitz(np.full(25, 3.0), grid, 0.0)
    assert rep.satisfied and rep.max_ratio == 0.0 and rep.pairs == 40


def test_lipschitz_check_flags_steps():
    grid = QuantGrid([0.0], [1.0], [4])
    rep = an.verify_value_lipschitz([0.0, 0.0, 1.0, 1.0], grid, 1.0)
    assert rep.violations == 1 and rep.max_ratio == pytest.approx(4.0)
    assert an.verify_value_lipschitz([0.0, 0.0, 1.0, 1.0], grid, 1.0, slack=0.8).satisfied


def test_brute_force_constant_rewards():
    zero = np.zeros((2, 2))
    game = game_from_players([2, 2], [zero + 0.25, zero], ["A", "N"])
    model = an.ContinuumModel(game, LearnerParams(1.0, 0.1), 0.5)
    for kappa in range(4):
        tv = an.brute_force_finite_horizon_value(model, [0.0, 0.0], kappa)
        assert tv.value == pytest.approx(0.25 * (1 - 0.5 ** (kappa + 1)) / 0.5, abs=1e-15)


def test_brute_force_horizon_zero_is_stage_game(zero_sum_pair_game, unit_params):
    from qexploit.game import reward_table
    from qexploit.solvers import solve_matrix_game

    z = np.array([0.2, 0.4])
    model = an.ContinuumModel(zero_sum_pair_game, unit_params, 0.5)
    tv = an.brute_force_finite_horizon_value(model, z, 0)
    stage = reward_table(z, zero_sum_pair_game, 1.0)[0].reshape(2, 2)
    assert tv.value == pytest.approx(solve_matrix_game(stage).value, abs=1e-15)


def test_brute_force_budget_and_arity(pd_game, unit_params):
    model = an.ContinuumModel(pd_game, unit_params, 0.5)
    with pytest.raises(BudgetExceededError) as info:
        an.brute_force_finite_horizon_value(model, [0.0, 0.0], 30, budget=1000)
    assert info.value.estimate == 4**30
    with pytest.raises(ParameterError):
        an.brute_force_finite_horizon_value(model, [0.0, 0.0], -1)
    with pytest.raises(InvalidInputError):
        an.brute_force_finite_horizon_value("nope", 0, 1)


def test_quantized_vs_continuum_within_bound(pd_game, unit_params):
    grid = build_grid(pd_game, 100)
    res = solve_sg(build_finite_sg(pd_game, grid, unit_params, 0.5), snapshots=4)
    model = an.ContinuumModel(pd_game, unit_params, 0.5)
    bound = an.quantization_error_bound(grid.delta, 0.5, 1.0, 2, 1.0)
    for d in (0, 1234, 5050, 9999):
        for kappa in range(4):
            exact = an.brute_force_finite_horizon_value(model, grid.center(d), kappa).value
            assert abs(exact - res.horizon_values[kappa][d]) <= bound


def test_lemma_pairs_hold(zero_sum_pair_game, unit_params):
    rng = np.random.default_rng(1)
    g = zero_sum_pair_game
    z, zbar = an.sample_states(g, 2000, rng), an.sample_states(g, 2000, rng)
    for lhs, rhs in (
        an.joint_policy_pairs(g, 1.0, z, zbar),
        an.reward_pairs(g, 1.0, z, zbar),
        an.contraction_pairs(g, 0.05, z, zbar),
        an.kernel_pairs(g, unit_params, z, zbar, np.array([0.3, 0.1]), 1.5),
    ):
        assert np.all(lhs <= rhs + 1e-12)


def test_contraction_factor_is_exact_per_coordinate(pd_game):
    z = np.array([[0.0, 0.0]])
    zbar = np.array([[0.5, 0.0]])
    lhs, rhs = an.contraction_pairs(pd_game, 0.1, z, zbar)
    # the updated coordinate shrinks by (1 - alpha); the worst case leaves it untouched
    assert lhs[0] == pytest.approx(0.5) and rhs[0] == pytest.approx(0.5)


def test_bound_report_fields():
    rep = an.bound_report(0.01, 0.02, 0.5, 1.0, 4, 1.0, kappa=2, label="x")
    assert rep.satisfied
    assert rep.theoretical_gap == pytest.approx(0.02 * 2 / 0.125)
    d = rep.to_dict()
    assert d["label"] == "x" and d["satisfied"] is True
    inf = an.bound_report(1.0, 0.02, 0.5, 1.0, 4, 1.0)
    assert inf.M_kappa == pytest.approx(2.0) and inf.L_kappa == pytest.approx(8.0)


def test_grid_value_gap_identity():
    grid = QuantGrid([0.0], [1.0], [4])
    v = np.arange(4.0)
    assert an.grid_value_gap(grid, v, grid, v) == 0.0
    fine = QuantGrid([0.0], [1.0], [8])
    assert an.grid_value_gap(grid, v, fine, np.repeat(v, 2)) == 0.0


def test_small_verification_run_passes():
    report = run_verification(Regime(intervals=30, coarse=(10, 20, 30), reference=60, pairs=2000, oracle_states=4))
    assert all(r["satisfied"] for r in report["records"])
    assert all(b["satisfied"] for b in report["bounds"])
