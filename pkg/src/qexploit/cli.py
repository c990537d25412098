"""``qexploit`` command line: solve, simulate, verify, reproduce.

Exit codes: 0 success, 1 a verification check failed, 2 configuration or
validation error, 3 solver did not converge, 4 provenance mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import subprocess
import sys
from dataclasses import asdict, fields, replace
from pathlib import Path

from . import __version__
from .config import ExperimentConfig, load_config
from .errors import (
    BudgetExceededError,
    ConfigError,
    InvalidInputError,
    NotConvergedError,
    ParameterError,
    ProvenanceError,
)
from .experiments import (
    FAMILIES,
    RunSettings,
    Scenario,
    comparison_rows,
    family_scenarios,
    format_table,
    run_scenario,
    solve_scenario,
)
from .sgmodel import build_grid
from .sim import PlaySetup, profile_labels, run_trials, summary_csv
from .snapshots import load_result, load_sg, save_result, save_sg
from .solvers import extract_stationary_policy
from .verify import Regime, run_verification, summary_table

logger = logging.getLogger("qexploit")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_PROVENANCE = 0, 1, 2, 3, 4


def build_id() -> str:
    """Package version plus the git commit of the source tree, when available."""
    try:
        rev = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        commit = rev.stdout.strip() if rev.returncode == 0 else "nogit"
    except (OSError, subprocess.SubprocessError):
        commit = "nogit"
    return f"{__version__}+{commit or 'nogit'}"


def _apply_overrides(settings: RunSettings, args) -> RunSettings:
    changes = {}
    for flag, attr in (("seed", "base_seed"), ("intervals", "intervals"), ("trials", "trials"),
                       ("stages", "stages"), ("window", "window")):
        value = getattr(args, flag, None)
        if value is not None:
            changes[attr] = value
    return replace(settings, **changes)


def _load(args) -> ExperimentConfig:
    if not args.config:
        raise ConfigError("this command needs --config")
    cfg = load_config(args.config)
    cfg.settings = _apply_overrides(cfg.settings, args)
    if args.no_chart:
        cfg.chart = False
    return cfg


def _out_dir(args, cfg: ExperimentConfig | None, default: str) -> Path:
    if args.out:
        return Path(args.out)
    return Path(cfg.output_dir if cfg else "out") / default


def _meta(config_echo: dict, extra: dict | None = None) -> dict:
    meta = {"build": build_id(), "config": config_echo}
    meta.update(extra or {})
    return meta


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _emit_summary(out: Path, stem: str, scenario: Scenario, game, summary, meta: dict, chart: bool) -> None:
    out.mkdir(parents=True, exist_ok=True)
    text = summary_csv(summary, game, scenario.player_names, meta, scenario.action_names)
    (out / f"{stem}.csv").write_text(text)
    if chart:
        from .charts import profile_chart

        labels = profile_labels(game, scenario.action_names)
        profile_chart(summary.frequencies, labels, f"{scenario.name}: running profile frequencies", out / f"{stem}.svg")


def cmd_solve(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg, cfg.name)
    game, grid, sg, result = solve_scenario(cfg.scenario, cfg.settings, cfg.grid_bounds)
    save_sg(sg, out / "sg.npz")
    save_result(result, out / "result.npz")
    _write_json(
        out / "solve.json",
        _meta(cfg.echo(), {
            "sg_digest": sg.digest(),
            "n_states": sg.n_states,
            "iterations": result.iterations,
            "residual": result.residual,
            "converged": result.converged,
        }),
    )
    print(f"solved {sg.n_states} states in {result.iterations} sweeps, residual {result.residual:.3e} -> {out}")
    if not result.converged:
        print("error: value iteration did not converge", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg, cfg.name)
    settings = cfg.settings
    game = cfg.scenario.game()
    extra = {}
    if game.n_a_types == 0:
        setup = PlaySetup(game, settings.params, settings.gamma)
    elif args.policy:
        sg = load_sg(args.sg) if args.sg else None
        result = load_result(args.policy, sg)
        grid = build_grid(game, settings.intervals_for(game), cfg.grid_bounds)
        setup = PlaySetup(game, settings.params, settings.gamma, grid, extract_stationary_policy(result))
        extra["policy"] = result.provenance
    else:
        game, grid, _, result = solve_scenario(cfg.scenario, settings, cfg.grid_bounds)
        setup = PlaySetup(game, settings.params, settings.gamma, grid, extract_stationary_policy(result))
        extra["policy"] = result.provenance
    summary = run_trials(setup, settings.stages, settings.trials, settings.base_seed, settings.window)
    _emit_summary(out, "summary", cfg.scenario, game, summary, _meta(cfg.echo(), extra), cfg.chart)
    for name, m, s in zip(cfg.scenario.player_names, summary.mean_utility, summary.stderr_utility):
        print(f"{name}: normalized utility {m:.4f} +- {s:.4f}")
    return EXIT_OK


def cmd_verify(args) -> int:
    regime = Regime()
    known = {f.name for f in fields(Regime)}
    if args.config:
        from .config import tomllib

        try:
            data = tomllib.loads(Path(args.config).read_text()).get("verify", {})
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown [verify] keys: {sorted(unknown)}")
        if "coarse" in data:
            data["coarse"] = tuple(data["coarse"])
        regime = replace(regime, **data)
    if args.seed is not None:
        regime = replace(regime, seed=args.seed)
    if args.intervals is not None:
        regime = replace(regime, intervals=args.intervals)
    regimes = [regime]
    if not args.skip_informational:
        regimes.append(replace(regime, tau=0.01, informational=True))
    out = Path(args.out) if args.out else Path("out") / "verify"
    out.mkdir(parents=True, exist_ok=True)
    failed = False
    lines = []
    texts = []
    for r in regimes:
        report = run_verification(r)
        for rec in report["records"]:
            lines.append(json.dumps({"kind": "check", "regime": asdict(r), **rec}, sort_keys=True))
            failed |= not rec["satisfied"] and not rec["informational"]
        for b in report["bounds"]:
            lines.append(json.dumps({"kind": "bound", "regime": asdict(r), **b}, sort_keys=True))
            failed |= not b["satisfied"] and not b["informational"]
        texts.append(summary_table(report))
    header = f"# build: {build_id()}\n"
    (out / "bounds.jsonl").write_text(header + "\n".join(lines) + "\n")
    (out / "summary.txt").write_text(header + "\n\n".join(texts) + "\n")
    print("\n\n".join(texts))
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def cmd_reproduce(args) -> int:
    settings = _apply_overrides(RunSettings(), args)
    scenarios = family_scenarios(args.family, args.game_seed)
    out = Path(args.out) if args.out else Path("out") / args.family
    runs = []
    for sc in scenarios:
        logger.info("%s/%s: running %d trials", args.family, sc.name, settings.trials)
        run = run_scenario(sc, settings)
        runs.append(run)
        cfg = ExperimentConfig(f"{args.family}/{sc.name}", sc, settings)
        extra = {"family": args.family, "game_seed": args.game_seed}
        if run.result is not None:
            extra["policy"] = run.result.provenance
        _emit_summary(out, sc.name, sc, run.game, run.summary, _meta(cfg.echo(), extra), not args.no_chart)
    rows = comparison_rows(runs)
    table = format_table(rows)
    (out / "comparison.txt").write_text(f"# build: {build_id()}\n{table}\n")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in row.items()})
    (out / "comparison.csv").write_text(buf.getvalue())
    print(table)
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        p.add_argument("--config", "-c", help="experiment TOML file")
    p.add_argument("--out", "-o", help="output directory")
    p.add_argument("--seed", type=int, help="override the base seed")
    p.add_argument("--intervals", type=int, help="override grid intervals per coordinate")
    p.add_argument("--trials", type=int, help="override the number of trials")
    p.add_argument("--stages", type=int, help="override stages per trial")
    p.add_argument("--window", type=int, help="trailing window for running frequencies (default: cumulative)")
    p.add_argument("--no-chart", action="store_true", help="skip SVG charts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qexploit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qexploit {build_id()}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="build and solve the quantized SG of a config")
    _add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="run trials and write CSV/SVG summaries")
    _add_common(p)
    p.add_argument("--policy", help="solve-result snapshot to play (default: solve now)")
    p.add_argument("--sg", help="SG snapshot the policy must have been solved for")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run the Lipschitz and quantization bound suite")
    _add_common(p)
    p.add_argument("--skip-informational", action="store_true", help="skip the tau=0.01 informational regime")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("reproduce", help="run an experiment family end to end")
    p.add_argument("family", choices=FAMILIES, metavar="family", help=f"one of: {', '.join(FAMILIES)}")
    p.add_argument("--game-seed", type=int, default=0, help="seed of the random payoff generators")
    _add_common(p, config=False)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InvalidInputError, ParameterError, BudgetExceededError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NotConvergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except ProvenanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROVENANCE


if __name__ == "__main__":
    sys.exit(main())
