import numpy as np
import pytest

from qexploit.experiments import PD_ROW
from qexploit.game import LearnerParams, game_from_players

# Acceptance outcomes, printed in the terminal summary.
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {key}: {detail}")


@pytest.fixture
def pd_game():
    """Prisoner's dilemma with the row player strategic."""
    return game_from_players([2, 2], [PD_ROW, PD_ROW.T], ["A", "N"])


@pytest.fixture
def pd_all_n():
    return game_from_players([2, 2], [PD_ROW, PD_ROW.T], ["N", "N"])


@pytest.fixture
def zero_sum_pair_game():
    """Two zero-sum A-types facing one 2-action N-type."""
    rng = np.random.default_rng(7)
    U = rng.uniform(size=(2, 2, 2))
    Ut = rng.uniform(size=(2, 2, 2))
    return game_from_players([2, 2, 2], [U, -U, Ut], ["A", "A", "N"], zero_sum=[(0, 1)])


@pytest.fixture
def unit_params():
    return LearnerParams(tau=1.0, alpha=0.05)
