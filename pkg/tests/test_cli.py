import json
import textwrap

import numpy as np
import pytest

from qexploit.cli import main
from qexploit.config import load_config, parse_config
from qexploit.errors import ConfigError, ProvenanceError
from qexploit.game import LearnerParams, game_from_players
from qexploit.sgmodel import build_finite_sg, build_grid
from qexploit.snapshots import load_result, load_sg, save_result, save_sg
from qexploit.solvers import solve_sg

PD_CONFIG = """
name = "pd"
gamma = 0.8
[learners]
tau = 0.01
alpha = 0.05
[grid]
intervals = 30
[simulation]
stages = 60
trials = 3
base_seed = 0
[game]
family = "pd-1v1"
scenario = "AxN"
"""


@pytest.fixture
def pd_config(tmp_path):
    path = tmp_path / "pd.toml"
    path.write_text(PD_CONFIG)
    return path


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return path


def test_config_round_trip(pd_config):
    cfg = load_config(pd_config)
    assert cfg.settings.intervals == 30 and cfg.settings.trials == 3
    assert cfg.scenario.kinds == ["A", "N"]
    echo = cfg.echo()
    assert echo["settings"]["tau"] == 0.01
    json.dumps(echo)


def test_explicit_players_and_csv_payoffs(tmp_path):
    (tmp_path / "col.csv").write_text("0.6666666666666666,1.0\n0.0,0.3333333333333333\n")
    path = write(tmp_path, "c.toml", """
        [[game.players]]
        name = "row"
        kind = "A"
        actions = 2
        payoffs = [[0.6666666666666666, 0.0], [1.0, 0.3333333333333333]]
        [[game.players]]
        name = "col"
        kind = "N"
        actions = 2
        payoffs_csv = "col.csv"
    """)
    cfg = load_config(path)
    np.testing.assert_allclose(cfg.scenario.payoffs[1], cfg.scenario.payoffs[0].T)


@pytest.mark.parametrize(
    "data",
    [
        {"game": {}},
        {"game": {"family": "pd-1v1", "scenario": "AxA"}},
        {"game": {"family": "nope"}},
        {"gamma": 1.5, "game": {"family": "pd-1v1"}},
        {"learners": {"tau": -1}, "game": {"family": "pd-1v1"}},
        {"game": {"players": [{"kind": "A", "actions": 2, "payoffs": [1, 2, 3]}]}},
    ],
)
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        parse_config(data)


def test_snapshot_round_trip(tmp_path, pd_game):
    params = LearnerParams(0.5, 0.1)
    sg = build_finite_sg(pd_game, build_grid(pd_game, 8), params, 0.8)
    res = solve_sg(sg, snapshots=2)
    loaded_sg = load_sg(save_sg(sg, tmp_path / "sg.npz"))
    assert loaded_sg.digest() == sg.digest()
    np.testing.assert_array_equal(loaded_sg.next_index, sg.next_index)
    loaded = load_result(save_result(res, tmp_path / "r.npz"), loaded_sg)
    np.testing.assert_array_equal(loaded.values, res.values)
    np.testing.assert_array_equal(loaded.horizon_values, res.horizon_values)
    other = build_finite_sg(pd_game, build_grid(pd_game, 9), params, 0.8)
    with pytest.raises(ProvenanceError):
        load_result(tmp_path / "r.npz", other)
    with pytest.raises(ProvenanceError):
        load_sg(tmp_path / "r.npz")


def test_solve_then_simulate(tmp_path, pd_config):
    assert main(["solve", "-c", str(pd_config), "-o", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "result.npz").exists()
    args = ["simulate", "-c", str(pd_config), "--policy", str(tmp_path / "s" / "result.npz"),
            "--sg", str(tmp_path / "s" / "sg.npz")]
    assert main(args + ["-o", str(tmp_path / "a")]) == 0
    assert main(args + ["-o", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "summary.csv").read_bytes()
    assert a == (tmp_path / "b" / "summary.csv").read_bytes()
    assert (tmp_path / "a" / "summary.svg").read_bytes() == (tmp_path / "b" / "summary.svg").read_bytes()
    header = a.decode().splitlines()
    assert any(line.startswith("# config:") for line in header)
    assert any(line.startswith("# build:") for line in header)


def test_simulate_refuses_foreign_policy(tmp_path, pd_config):
    assert main(["solve", "-c", str(pd_config), "-o", str(tmp_path / "s")]) == 0
    code = main(["simulate", "-c", str(pd_config), "--intervals", "20", "--no-chart",
                 "--policy", str(tmp_path / "s" / "result.npz"), "-o", str(tmp_path / "x")])
    assert code == 4


def test_two_a_types_without_zero_sum_exit_code(tmp_path, capsys):
    path = write(tmp_path, "bad.toml", """
        [[game.players]]
        kind = "A"
        actions = 2
        payoffs = [[1, 0], [0, 1]]
        [[game.players]]
        kind = "A"
        actions = 2
        payoffs = [[0, 1], [1, 0]]
    """)
    assert main(["solve", "-c", str(path)]) == 2
    assert "zero-sum" in capsys.readouterr().err


def test_mismatched_zero_sum_declaration(tmp_path):
    path = write(tmp_path, "bad.toml", """
        [game]
        zero_sum = [[0, 1]]
        [[game.players]]
        kind = "A"
        actions = 2
        payoffs = [[1, 0], [0, 1]]
        [[game.players]]
        kind = "A"
        actions = 2
        payoffs = [[1, 0], [0, 1]]
    """)
    assert main(["solve", "-c", str(path)]) == 2


def test_non_convergence_exit_code(tmp_path, pd_config):
    text = PD_CONFIG.replace("[simulation]", "[solver]\nmax_iters = 3\n[simulation]")
    path = write(tmp_path, "nc.toml", text)
    assert main(["solve", "-c", str(path), "-o", str(tmp_path / "o")]) == 3
    assert main(["simulate", "-c", str(path), "-o", str(tmp_path / "o2")]) == 3


def test_constant_payoff_solve(tmp_path):
    path = write(tmp_path, "c.toml", """
        gamma = 0.5
        [grid]
        intervals = 4
        [solver]
        stop = 1e-12
        [[game.players]]
        kind = "A"
        actions = 2
        payoffs = [[0.3, 0.3], [0.3, 0.3]]
        [[game.players]]
        kind = "N"
        actions = 2
        payoffs = [[0.3, 0.3], [0.3, 0.3]]
    """)
    assert main(["solve", "-c", str(path), "-o", str(tmp_path / "o")]) == 0
    res = load_result(tmp_path / "o" / "result.npz")
    np.testing.assert_allclose(res.values, 0.6, atol=1e-10)


def test_reproduce_unknown_family(capsys):
    with pytest.raises(SystemExit) as info:
        main(["reproduce", "nope"])
    assert info.value.code == 2
    assert "pd-1v1" in capsys.readouterr().err


def test_reproduce_table2_structure(tmp_path):
    out = tmp_path / "t2"
    assert main(["reproduce", "table2", "--trials", "2", "--stages", "30", "--intervals", "6", "-o", str(out)]) == 0
    for name in ("NxNxN", "NxAxN", "AxAxN"):
        assert (out / f"{name}.csv").exists() and (out / f"{name}.svg").exists()
    rows = (out / "comparison.csv").read_text().splitlines()
    assert rows[0].startswith("scenario,player,type")
    assert len(rows) == 1 + 9


def test_verify_command(tmp_path):
    path = write(tmp_path, "v.toml", """
        [verify]
        intervals = 20
        coarse = [8, 16]
        reference = 32
        pairs = 500
        oracle_states = 3
        horizon = 3
    """)
    out = tmp_path / "v"
    assert main(["verify", "-c", str(path), "-o", str(out), "--skip-informational"]) == 0
    records = [json.loads(line) for line in (out / "bounds.jsonl").read_text().splitlines() if line[0] == "{"]
    assert {r["kind"] for r in records} == {"check", "bound"}
    assert all(r["satisfied"] for r in records)
    bad = write(tmp_path, "bad.toml", "[verify]\nfoo = 1\n")
    assert main(["verify", "-c", str(bad), "-o", str(out)]) == 2


def test_game_from_players_is_config_equivalent(pd_config):
    cfg = load_config(pd_config)
    game = cfg.scenario.game()
    direct = game_from_players([2, 2], cfg.scenario.payoffs, ["A", "N"])
    assert game.digest() == direct.digest()


def test_q_init_from_config():
    cfg = parse_config({"game": {"family": "pd-1v1", "scenario": "AxN", "q_init": [0.5, 0.25]}})
    np.testing.assert_array_equal(cfg.scenario.game().q_init, [0.5, 0.25])
    assert cfg.echo()["q_init"] == [0.5, 0.25]
    with pytest.raises(ConfigError):
        parse_config({"game": {"family": "pd-1v1", "q_init": [0.5]}})


@pytest.mark.parametrize("name", ["pd-strategic", "pennies-pair"])
def test_shipped_configs_parse(name):
    from pathlib import Path

    cfg = load_config(Path(__file__).parents[1] / "configs" / f"{name}.toml")
    assert cfg.scenario.game().n_a_types >= 1
