"""
Command-line front end for impeq.

Results go to standard output as JSON (or CSV with ``--format csv``); logs and
error messages go to standard error. Exit codes: 0 success or accepted,
1 well-formed rejection, 2 usage or validation error, 3 external solver
missing.
"""

import argparse
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd
from pydantic import BaseModel, field_validator, model_validator

from ..data.export import (
    OUTPUT_FORMATS,
    analysis_frame,
    deviation_frame,
    payoffs_frame,
    render,
    search_frame,
    simulation_frame,
    to_json,
    verdict_frame,
)
from ..data.game_parser import parse_game
from ..data.profile_parser import parse_profile
from ..data.reports import VALUE_METHODS, deviation_payload, validation_payload
from ..exceptions import ImpeqError, SolverUnavailableError
from ..models.game import Game
from ..models.strategy import StationaryProfile
from ..solvers.equilibrium import (
    CHECK_KINDS,
    IterationConfig,
    brute_force_search,
    compute_equilibrium,
    run_check,
)
from ..solvers.etr import (
    iter_formulas,
    prepare_encoding,
    shift_bounds,
    solve_with_etr,
)
from ..solvers.payoff import evaluate_profile, monte_carlo_estimate
from ..solvers.structure import analyze_game
from ..utils.config_utils import SolverSettings, load_settings
from ..utils.logging_utils import set_log_level, setup_logging
from ..utils.validation_utils import format_rational, parse_rational

logger = setup_logging(__name__)

COMMANDS = (
    "validate",
    "analyze",
    "eval",
    "check",
    "value",
    "solve",
    "search",
    "emit-etr",
    "simulate",
)

EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_USAGE = 2
EXIT_SOLVER_MISSING = 3


def _parse_bound(text: str) -> Tuple[str, Optional[str], Optional[str]]:
    player, sep, interval = text.partition("=")
    low, colon, high = interval.partition(":")
    if not player or not sep or not colon:
        raise ValueError(f"bound {text!r} is not of the form player=lo:hi")
    return player, low or None, high or None


class RunConfig(BaseModel):
    """Validated flags of one invocation."""

    command: str
    game: Path
    profile: Optional[Path] = None
    epsilon: Optional[str] = None
    state: Optional[str] = None
    kind: str = "imprecise"
    player: Optional[str] = None
    method: str = "ball"
    bounds: List[str] = []
    seed: int = 0
    grid: int = 10
    samples: int = 10_000
    horizon: int = 1000
    guess: int = 0
    output_dir: Optional[Path] = None
    dispatch: bool = False
    solver_cmd: Optional[str] = None
    output_format: str = "json"
    threads: Optional[int] = None
    progress: bool = False

    @field_validator("command")
    @classmethod
    def _known_command(cls, value: str) -> str:
        if value not in COMMANDS:
            raise ValueError(f"unknown command {value!r}")
        return value

    @field_validator("epsilon")
    @classmethod
    def _epsilon_in_range(cls, value: Optional[str]) -> Optional[str]:
        if value is None:
            return value
        epsilon = parse_rational(value)
        if not 0 < epsilon <= 1:
            raise ValueError(f"epsilon must lie in (0, 1], got {value}")
        return value

    @field_validator("output_format")
    @classmethod
    def _known_format(cls, value: str) -> str:
        if value not in OUTPUT_FORMATS:
            raise ValueError(f"unknown output format {value!r}")
        return value

    @field_validator("bounds")
    @classmethod
    def _well_formed_bounds(cls, value: List[str]) -> List[str]:
        for text in value:
            _, low, high = _parse_bound(text)
            for end in (low, high):
                if end is not None:
                    parse_rational(end)
        return value

    @model_validator(mode="after")
    def _needs_epsilon(self) -> "RunConfig":
        needs = self.command in ("value", "solve", "emit-etr") or (
            self.command in ("check", "search") and self.kind != "nash"
        )
        if needs and self.epsilon is None:
            raise ValueError(f"{self.command} needs --epsilon")
        return self

    @property
    def epsilon_value(self) -> Optional[Fraction]:
        return parse_rational(self.epsilon) if self.epsilon is not None else None

    def bounds_value(self) -> Dict[str, Tuple[Optional[Fraction], Optional[Fraction]]]:
        parsed = {}
        for text in self.bounds:
            player, low, high = _parse_bound(text)
            parsed[player] = (
                parse_rational(low) if low is not None else None,
                parse_rational(high) if high is not None else None,
            )
        return parsed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="impeq",
        description="Equilibria of stochastic concurrent games under imprecise deviations",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--game", required=True, help="Game JSON file")
    parser.add_argument("--profile", help="Profile JSON file")
    parser.add_argument("--epsilon", help="Perturbation level as p/q")
    parser.add_argument("--state", help="Initial state (defaults to the first declared state)")
    parser.add_argument("--kind", choices=CHECK_KINDS, default="imprecise")
    parser.add_argument("--player", help="Restrict value to one player")
    parser.add_argument("--method", choices=VALUE_METHODS, default="ball")
    parser.add_argument(
        "--bounds", action="append", default=[], metavar="PLAYER=LO:HI",
        help="Payoff bounds for emit-etr; either end may be empty",
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--grid", type=int, default=10, help="Grid denominator for search")
    parser.add_argument("--samples", type=int, default=10_000)
    parser.add_argument("--horizon", type=int, default=1000)
    parser.add_argument("--guess", type=int, default=0, help="Guess index printed by emit-etr")
    parser.add_argument("--output-dir", help="Write every emit-etr guess to this directory")
    parser.add_argument("--dispatch", action="store_true", help="Run the external solver")
    parser.add_argument("--solver-cmd", help="External QF_NRA solver command")
    parser.add_argument("--format", dest="output_format", choices=OUTPUT_FORMATS, default="json")
    parser.add_argument("--threads", type=int)
    parser.add_argument("--progress", action="store_true", help="Show a progress bar")
    parser.add_argument("--config", help="YAML file layered over configs/solver.yaml")
    parser.add_argument("--log-level", help="Logging level for impeq loggers")
    return parser


def _load_game(config: RunConfig) -> Game:
    return parse_game(config.game.read_text(encoding="utf-8"))


def _load_profile(config: RunConfig, game: Game) -> StationaryProfile:
    if config.profile is None:
        raise ValueError(f"{config.command} needs --profile")
    return parse_profile(config.profile.read_text(encoding="utf-8"), game)


def _initial_state(config: RunConfig, game: Game) -> str:
    s0 = config.state if config.state is not None else game.states[0]
    game.require_state(s0)
    return s0


def _emit(payload: Any, frame: pd.DataFrame, config: RunConfig) -> None:
    sys.stdout.write(render(payload, frame, config.output_format))


def _cmd_validate(config: RunConfig, game: Game, settings: SolverSettings) -> int:
    payload = validation_payload(game)
    row = {k: ";".join(v) if isinstance(v, list) else v for k, v in payload.items()}
    _emit(payload, pd.DataFrame([row]), config)
    return EXIT_OK


def _cmd_analyze(config: RunConfig, game: Game, settings: SolverSettings) -> int:
    report = analyze_game(game, config.epsilon_value, settings.structure.max_states)
    _emit(report, analysis_frame(report), config)
    return EXIT_OK


def _cmd_eval(config: RunConfig, game: Game, settings: SolverSettings) -> int:
    profile = _load_profile(config, game)
    payoffs = evaluate_profile(game, profile)
    payload: Dict[str, Any] = {"payoffs": payoffs.to_dict()}
    if config.state is not None:
        s0 = _initial_state(config, game)
        payload["state"] = s0
        payload["at_state"] = {i: format_rational(v) for i, v in payoffs.at_state(s0).items()}
    _emit(payload, payoffs_frame(payoffs), config)
    return EXIT_OK


def _cmd_check(config: RunConfig, game: Game, settings: SolverSettings) -> int:
    profile = _load_profile(config, game)
    s0 = _initial_state(config, game)
    verdict = run_check(config.kind, game, profile, s0, config.epsilon_value)
    _emit(verdict.to_dict(), verdict_frame(verdict), config)
    return EXIT_OK if verdict.accepted else EXIT_REJECTED


def _cmd_value(config: RunConfig, game: Game, settings: SolverSettings) -> int:
    profile = _load_profile(config, game)
    payload = deviation_payload(
        game, profile, config.epsilon_value, config.player, config.method, settings
    )
    _emit(payload, deviation_frame(payload), config)
    return EXIT_OK


def _cmd_solve(config: RunConfig, game: Game, settings: SolverSettings) -> int:
    profile, verdict = compute_equilibrium(
        game,
        config.epsilon_value,
        _initial_state(config, game),
        IterationConfig.from_settings(settings),
    )
    payload = {"profile": profile.to_dict(), "verdict": verdict.to_dict()}
    frame = search_frame([{"profile": profile.to_dict(), "payoffs": payload["verdict"]["payoffs"]}])
    _emit(payload, frame, config)
    return EXIT_OK if verdict.accepted else EXIT_REJECTED


def _cmd_search(config: RunConfig, game: Game, settings: SolverSettings) -> int:
    results = brute_force_search(
        game,
        config.epsilon_value,
        _initial_state(config, game),
        config.grid,
        config.kind,
        settings.search.max_profiles,
        config.threads or settings.runtime.threads,
        config.progress,
    )
    payload = [result.to_dict() for result in results]
    _emit(payload, search_frame(payload), config)
    return EXIT_OK


def _cmd_emit_etr(config: RunConfig, game: Game, settings: SolverSettings) -> int:
    etr = settings.etr
    s0 = _initial_state(config, game)
    if config.dispatch:
        result = solve_with_etr(
            game,
            config.epsilon_value,
            s0,
            config.bounds_value(),
            command=config.solver_cmd or etr.solver_command,
            timeout=etr.solver_timeout,
            threads=config.threads or settings.runtime.threads,
            max_guesses=etr.max_guesses,
            prune_dominated_intervals=etr.prune_dominated_intervals,
            max_denominator=etr.max_denominator,
            max_states=settings.structure.max_states,
        )
        payload = result.to_dict()
        summary = {k: payload[k] for k in ("status", "guess_index", "guesses_tried", "shift")}
        _emit(payload, pd.DataFrame([summary]), config)
        if result.status == "sat" and result.verdict is not None and result.verdict.accepted:
            return EXIT_OK
        return EXIT_REJECTED

    shifted, mapping, shift, spec = prepare_encoding(
        game, config.epsilon_value, settings.structure.max_states
    )
    formulas = iter_formulas(
        shifted,
        config.epsilon_value,
        mapping[s0],
        shift_bounds(config.bounds_value(), shift),
        spec,
        etr.prune_dominated_intervals,
        etr.max_guesses,
    )
    if config.output_dir is None:
        for formula in formulas:
            if formula.index == config.guess:
                sys.stdout.write(formula.to_smtlib2())
                return EXIT_OK
        raise ValueError(f"there is no guess with index {config.guess}")

    config.output_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for formula in formulas:
        stem = config.output_dir / f"guess-{formula.index:06d}"
        stem.with_suffix(".smt2").write_text(formula.to_smtlib2(), encoding="utf-8")
        sidecar = formula.sidecar(shifted)
        sidecar["shift"] = format_rational(shift)
        stem.with_suffix(".json").write_text(to_json(sidecar), encoding="utf-8")
        rows.append(dict(index=formula.index, **sidecar["metrics"]))
    payload = {"shift": format_rational(shift), "guesses": len(rows), "formulas": rows}
    columns = ["index", "assertions", "terms", "variables", "linear"]
    _emit(payload, pd.DataFrame(rows, columns=columns), config)
    return EXIT_OK


def _cmd_simulate(config: RunConfig, game: Game, settings: SolverSettings) -> int:
    profile = _load_profile(config, game)
    estimate = monte_carlo_estimate(
        game,
        profile,
        _initial_state(config, game),
        config.samples,
        config.horizon,
        config.seed,
        settings.monte_carlo.chunk_size,
        settings.monte_carlo.confidence,
    )
    payload = estimate.to_dict()
    payload["seed"] = config.seed
    payload["absorbed_within"] = {
        str(t): estimate.absorbed_within(t)
        for t in sorted({1, 10, 100, config.horizon})
        if t <= config.horizon
    }
    _emit(payload, simulation_frame(estimate), config)
    return EXIT_OK


HANDLERS = {
    "validate": _cmd_validate,
    "analyze": _cmd_analyze,
    "eval": _cmd_eval,
    "check": _cmd_check,
    "value": _cmd_value,
    "solve": _cmd_solve,
    "search": _cmd_search,
    "emit-etr": _cmd_emit_etr,
    "simulate": _cmd_simulate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one command.

    Args:
        argv: Arguments without the program name (defaults to ``sys.argv[1:]``)

    Returns:
        int: Exit code
    """
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings(args.config)
        set_log_level(args.log_level or settings.runtime.log_level)
        config = RunConfig(
            command=args.command,
            game=Path(args.game),
            profile=Path(args.profile) if args.profile else None,
            epsilon=args.epsilon,
            state=args.state,
            kind=args.kind,
            player=args.player,
            method=args.method,
            bounds=args.bounds,
            seed=args.seed,
            grid=args.grid,
            samples=args.samples,
            horizon=args.horizon,
            guess=args.guess,
            output_dir=Path(args.output_dir) if args.output_dir else None,
            dispatch=args.dispatch,
            solver_cmd=args.solver_cmd,
            output_format=args.output_format,
            threads=args.threads,
            progress=args.progress,
        )
        game = _load_game(config)
        return HANDLERS[config.command](config, game, settings)
    except SolverUnavailableError as e:
        print(f"impeq: skipped, solver absent: {e}", file=sys.stderr)
        return EXIT_SOLVER_MISSING
    except (ImpeqError, ValueError, OSError) as e:
        logger.debug(f"Error running {args.command}: {e}")
        print(f"impeq: error: {e}", file=sys.stderr)
        return EXIT_USAGE


def run() -> None:
    """Console-script entry point."""
    sys.exit(main())


if __name__ == "__main__":
    run()
