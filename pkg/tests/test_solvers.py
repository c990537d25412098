import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import linprog

from qexploit.analysis import brute_force_finite_horizon_value
from qexploit.errors import InvalidInputError, NotConvergedError
from qexploit.sgmodel import FiniteSG, build_finite_sg, build_grid
from qexploit.solvers import (
    extract_stationary_policy,
    mdp_value_iteration,
    minimax_value_iteration,
    solve_matrix_game,
    solve_matrix_games,
    solve_sg,
)


def lp_value(M):
    """Reference maximin value via scipy's LP solver."""
    m, n = M.shape
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-M.T, np.ones((n, 1))])
    A_eq = np.hstack([np.ones((1, m)), np.zeros((1, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n), A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * m + [(None, None)], method="highs")
    return -res.fun


def certificate_gap(M, sol):
    guarantee_row = np.min(sol.row_strategy @ M)
    guarantee_col = np.max(M @ sol.col_strategy)
    return max(sol.value - guarantee_row, guarantee_col - sol.value)


def test_matching_pennies():
    sol = solve_matrix_game([[1.0, -1.0], [-1.0, 1.0]])
    assert sol.value == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(sol.row_strategy, [0.5, 0.5])
    np.testing.assert_allclose(sol.col_strategy, [0.5, 0.5])


def test_rock_paper_scissors():
    M = np.array([[0, -1, 1], [1, 0, -1], [-1, 1, 0]], dtype=float)
    sol = solve_matrix_game(M)
    assert sol.value == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(sol.row_strategy, [1 / 3] * 3, atol=1e-14)


def test_pure_saddle_and_known_mixed_value():
    sol = solve_matrix_game([[3.0, 5.0], [1.0, 2.0]])
    assert sol.value == 3.0
    np.testing.assert_array_equal(sol.row_strategy, [1.0, 0.0])
    np.testing.assert_array_equal(sol.col_strategy, [1.0, 0.0])
    # [[2, -1], [-1, 1]]: value 1/5, row (2/5, 3/5)
    sol = solve_matrix_game([[2.0, -1.0], [-1.0, 1.0]])
    assert sol.value == pytest.approx(0.2, abs=1e-15)
    np.testing.assert_allclose(sol.row_strategy, [0.4, 0.6], atol=1e-15)


def test_ties_resolve_to_first_action():
    sol = solve_matrix_game(np.ones((3, 3)))
    np.testing.assert_array_equal(sol.row_strategy, [1.0, 0.0, 0.0])
    np.testing.assert_array_equal(sol.col_strategy, [1.0, 0.0, 0.0])


def test_rectangular_games_match_linprog():
    rng = np.random.default_rng(3)
    for shape in [(1, 4), (4, 1), (2, 3), (3, 2), (4, 3)]:
        for _ in range(20):
            M = rng.normal(size=shape)
            sol = solve_matrix_game(M)
            assert sol.value == pytest.approx(lp_value(M), abs=1e-9)
            assert certificate_gap(M, sol) < 1e-12


@given(arrays(float, st.tuples(st.integers(1, 4), st.integers(1, 4)), elements=st.floats(-10, 10)))
@settings(max_examples=300, deadline=None)
def test_saddle_certificates(M):
    sol = solve_matrix_game(M)
    assert certificate_gap(M, sol) <= 1e-9 * (1 + np.abs(M).max())
    assert sol.row_strategy.sum() == pytest.approx(1.0)
    assert np.all(sol.row_strategy >= 0) and np.all(sol.col_strategy >= 0)


def test_batched_equals_single():
    M = np.random.default_rng(0).uniform(size=(5, 3, 3))
    v, x, y = solve_matrix_games(M)
    for i in range(5):
        s = solve_matrix_game(M[i])
        assert v[i] == s.value
        np.testing.assert_array_equal(x[i], s.row_strategy)


def test_matrix_game_errors():
    with pytest.raises(InvalidInputError):
        solve_matrix_game([[np.nan, 0.0]])
    with pytest.raises(InvalidInputError):
        solve_matrix_game(np.zeros(3))


def toy_sg(seed, n_states=9, zero_sum=True, gamma=0.7):
    rng = np.random.default_rng(seed)
    n_b = 2
    if zero_sum:
        a_actions, n_a, pairs = (2, 2), 4, ((0, 1),)
        r = rng.uniform(-1, 1, size=(n_states, n_a))
        rewards = np.stack([r, -r])
    else:
        a_actions, n_a, pairs = (2,), 2, ()
        rewards = rng.uniform(-1, 1, size=(1, n_states, n_a))
    probs = rng.dirichlet(np.ones(n_b), size=n_states)
    nxt = rng.integers(0, n_states, size=(n_states, n_a, n_b))
    return FiniteSG(rewards, nxt, probs, gamma, a_actions, pairs, {"toy": seed})


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("zero_sum", [True, False])
def test_vi_snapshots_match_tree(seed, zero_sum):
    sg = toy_sg(seed, zero_sum=zero_sum)
    res = solve_sg(sg, snapshots=5)
    for kappa in range(5):
        for d in range(sg.n_states):
            tree = brute_force_finite_horizon_value(sg, d, kappa)
            assert abs(tree.value - res.horizon_values[kappa][d]) < 1e-12


def test_constant_rewards_value():
    sg = toy_sg(0, zero_sum=False, gamma=0.5)
    sg = FiniteSG(np.full_like(sg.rewards, 0.3), sg.next_index, sg.probs, 0.5, sg.a_actions, (), {})
    res = mdp_value_iteration(sg, stop=1e-13)
    np.testing.assert_allclose(res.values, 0.6, atol=1e-12)


def test_constant_payoff_game_values(unit_params):
    from qexploit.game import game_from_players

    c = 0.4
    game = game_from_players([2, 2], [np.full((2, 2), c), np.full((2, 2), c)], ["A", "N"])
    grid = build_grid(game, 5)
    res = solve_sg(build_finite_sg(game, grid, unit_params, 0.8), stop=1e-12)
    np.testing.assert_allclose(res.values, c / 0.2, atol=1e-10)


def test_minimax_player_order_symmetry():
    sg = toy_sg(1)
    swapped = FiniteSG(
        sg.rewards[::-1].reshape(2, 9, 2, 2).transpose(0, 1, 3, 2).reshape(2, 9, 4).copy(),
        sg.next_index.reshape(9, 2, 2, 2).transpose(0, 2, 1, 3).reshape(9, 4, 2).copy(),
        sg.probs,
        sg.gamma,
        sg.a_actions,
        ((1, 0),),
        {},
    )
    r1 = minimax_value_iteration(sg, stop=1e-12)
    r2 = minimax_value_iteration(swapped, stop=1e-12)
    # relabelling the A-types leaves each player's value unchanged
    np.testing.assert_allclose(r1.value_of(0), r2.value_of(1), atol=1e-10)
    np.testing.assert_allclose(r1.value_of(1), r2.value_of(0), atol=1e-10)


def test_contraction_and_bound():
    sg = toy_sg(4, gamma=0.9)
    res = solve_sg(sg)
    steps = res.residuals
    assert np.all(steps[1:] <= sg.gamma * steps[:-1] + 1e-12)
    assert np.abs(res.values).max() <= 1.0 / (1 - 0.9) + 1e-9


def test_policies_are_distributions():
    res = minimax_value_iteration(toy_sg(2))
    for pol in res.policies:
        np.testing.assert_allclose(pol.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(pol >= 0)


def test_non_convergence_is_reported():
    sg = toy_sg(0, gamma=0.99)
    res = solve_sg(sg, stop=1e-12, max_iters=5)
    assert not res.converged and res.iterations == 5
    with pytest.raises(NotConvergedError):
        extract_stationary_policy(res)


def test_solver_arity_checks():
    with pytest.raises(InvalidInputError):
        mdp_value_iteration(toy_sg(0))
    with pytest.raises(InvalidInputError):
        minimax_value_iteration(toy_sg(0, zero_sum=False))
