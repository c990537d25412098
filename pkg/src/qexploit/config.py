"""Experiment configuration files (TOML).

Example::

    name = "pd-strategic"
    gamma = 0.8

    [learners]
    tau = 0.01
    alpha = 0.05

    [grid]
    intervals = 100
    # bounds = [0.0, 1.0]

    [solver]
    stop = 1e-8
    max_iters = 10000

    [simulation]
    stages = 1000
    trials = 100
    base_seed = 0

    [game]
    family = "pd-1v1"      # or list [[game.players]] explicitly
    scenario = "AxN"
    seed = 0
    # q_init = [0.0, 0.0]  # initial N-type estimates, default zeros

Explicit players::

    [[game.players]]
    name = "row"
    kind = "A"
    actions = 2
    payoffs = [[0.667, 0.0], [1.0, 0.333]]   # or payoffs_csv = "row.csv"

CSV payoff files hold the tensor flattened row-major, any layout of
comma/newline separated numbers.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, QExploitError
from .experiments import RunSettings, Scenario, family_scenarios

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass
class ExperimentConfig:
    name: str
    scenario: Scenario
    settings: RunSettings
    grid_bounds: tuple[float, float] | None = None
    output_dir: str = "out"
    chart: bool = True
    raw: dict = field(default_factory=dict)

    def echo(self) -> dict:
        """Fully resolved configuration, JSON-serializable."""
        sc = self.scenario
        return {
            "name": self.name,
            "settings": asdict(self.settings),
            "grid_bounds": list(self.grid_bounds) if self.grid_bounds else None,
            "players": [
                {
                    "name": sc.player_names[p],
                    "kind": sc.kinds[p],
                    "actions": sc.actions[p],
                    "payoff_label": sc.payoff_labels[p],
                    "payoffs": np.asarray(sc.payoffs[p]).tolist(),
                }
                for p in range(len(sc.kinds))
            ],
            "zero_sum": [list(p) for p in sc.zero_sum],
            "q_init": sc.q_init,
        }


_SETTING_KEYS = {
    ("learners", "tau"): "tau",
    ("learners", "alpha"): "alpha",
    ("grid", "intervals"): "intervals",
    ("solver", "stop"): "stop",
    ("solver", "max_iters"): "max_iters",
    ("simulation", "stages"): "stages",
    ("simulation", "trials"): "trials",
    ("simulation", "base_seed"): "base_seed",
    ("simulation", "window"): "window",
}


def _players(game: dict, base: Path) -> Scenario:
    players = game.get("players")
    if not players:
        raise ConfigError("[game] needs either 'family' or a list of [[game.players]]")
    actions = [int(p["actions"]) for p in players]
    payoffs = []
    for p in players:
        if "payoffs" in p:
            t = np.asarray(p["payoffs"], dtype=float)
        elif "payoffs_csv" in p:
            text = (base / p["payoffs_csv"]).read_text()
            t = np.array([float(x) for x in text.replace("\n", ",").split(",") if x.strip()])
        else:
            raise ConfigError(f"player {p.get('name', '?')} has no payoffs")
        if t.size != int(np.prod(actions)):
            raise ConfigError(
                f"player {p.get('name', '?')}: {t.size} payoff entries, expected {int(np.prod(actions))}"
            )
        payoffs.append(t.reshape(actions))
    names = [str(p.get("name", f"agent{i}")) for i, p in enumerate(players)]
    return Scenario(
        name=str(game.get("scenario", "custom")),
        actions=actions,
        payoffs=payoffs,
        kinds=[str(p.get("kind", "N")).upper() for p in players],
        player_names=names,
        payoff_labels=[str(p.get("payoff_label", f"u[{n}]")) for n in names],
        zero_sum=[tuple(int(x) for x in pair) for pair in game.get("zero_sum", [])],
    )


def parse_config(data: dict, base: Path = Path(".")) -> ExperimentConfig:
    settings = RunSettings()
    if "gamma" in data:
        settings.gamma = float(data["gamma"])
    for (section, key), attr in _SETTING_KEYS.items():
        if key in data.get(section, {}):
            setattr(settings, attr, data[section][key])
    game = data.get("game", {})
    if "family" in game:
        scenarios = family_scenarios(str(game["family"]), int(game.get("seed", 0)))
        wanted = game.get("scenario", scenarios[-1].name)
        match = [s for s in scenarios if s.name == wanted]
        if not match:
            raise ConfigError(
                f"family {game['family']!r} has scenarios {[s.name for s in scenarios]}, not {wanted!r}"
            )
        scenario = match[0]
    else:
        scenario = _players(game, base)
    if "q_init" in game:
        scenario = replace(scenario, q_init=[float(x) for x in game["q_init"]])
    bounds = data.get("grid", {}).get("bounds")
    cfg = ExperimentConfig(
        name=str(data.get("name", scenario.name)),
        scenario=scenario,
        settings=settings,
        grid_bounds=tuple(float(x) for x in bounds) if bounds else None,
        output_dir=str(data.get("output", {}).get("dir", "out")),
        chart=bool(data.get("output", {}).get("chart", True)),
        raw=data,
    )
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    """Check the roster against the payoffs; zero-sum declarations are checked numerically."""
    sc = cfg.scenario
    try:
        game = sc.game()
        cfg.settings.params
    except QExploitError as exc:
        raise ConfigError(str(exc)) from exc
    if game.n_a_types > 2 or (game.n_a_types == 2 and not game.zero_sum_pairs):
        raise ConfigError(
            "more than one A-type is only supported for a declared zero-sum pair"
        )
    if not 0 < cfg.settings.gamma < 1:
        raise ConfigError(f"gamma must lie in (0, 1), got {cfg.settings.gamma}")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(data, path.parent)
