"""
Equilibrium checkers and solvers for stationary profiles.

The checkers are definitional: Nash and ε-Nash compare each player's best
pure memoryless response with the equilibrium payoff, while the imprecise
checker asks whether some pure memoryless deviation improves on the
equilibrium payoff throughout its ε-ball. ``compute_equilibrium`` is a
heuristic damped best-response iteration whose answer is always confirmed
by the imprecise checker.
"""

import dataclasses
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from multiprocessing import get_context
from typing import Any, Dict, Iterator, List, Optional, Tuple

from tqdm import tqdm

from ..exceptions import CapExceededError, PreconditionError
from ..models.game import Distribution, Game, Player, State
from ..models.results import DeviationWitness, EquilibriumVerdict, VerdictKind
from ..models.strategy import (
    DEFAULT_MAX_VERTEX_ACTIONS,
    StationaryProfile,
    StationaryStrategy,
    distance,
    project_to_delta_epsilon,
    uniform_profile,
)
from ..utils.config_utils import SolverSettings
from ..utils.logging_utils import setup_logging
from ..utils.validation_utils import format_rational, validate_epsilon
from .deviation_game import imprecise_deviation_value
from .linear import DEFAULT_ENUMERATION_THRESHOLD
from .payoff import ConstrainedActionSet, constrained_best_response, evaluate_profile
from .structure import DEFAULT_MAX_STATES, delta_epsilon_spec, lift_profile, make_cycle_free

logger = setup_logging(__name__)

CHECK_KINDS = ("nash", "eps-nash", "imprecise")
DEFAULT_MAX_PROFILES = 1_000_000


def _best_pure_responses(
    game: Game, profile: StationaryProfile, s0: State, enumeration_threshold: int
) -> Dict[Player, Tuple[Fraction, StationaryStrategy]]:
    responses = {}
    for i in game.players:
        values, witness = constrained_best_response(
            game,
            profile,
            i,
            ConstrainedActionSet.full_simplex(game, i),
            "max",
            enumeration_threshold,
        )
        responses[i] = (values.get(i, s0), witness)
    return responses


def _verdict_from_responses(
    kind: VerdictKind,
    s0: State,
    payoffs: Dict[Player, Fraction],
    responses: Dict[Player, Tuple[Fraction, StationaryStrategy]],
    allowance: Fraction,
    epsilon: Optional[Fraction],
) -> EquilibriumVerdict:
    margins = {i: payoffs[i] - value for i, (value, _) in responses.items()}
    witness = None
    for i, (value, deviation) in responses.items():
        if value > payoffs[i] + allowance:
            witness = DeviationWitness(i, deviation, value, payoffs[i])
            break
    return EquilibriumVerdict(
        accepted=witness is None,
        kind=kind,
        state=s0,
        payoffs=payoffs,
        margins=margins,
        epsilon=epsilon,
        witness=witness,
    )


def check_nash(
    game: Game,
    profile: StationaryProfile,
    s0: State,
    tolerance: Fraction = Fraction(0),
    enumeration_threshold: int = DEFAULT_ENUMERATION_THRESHOLD,
) -> EquilibriumVerdict:
    """
    Check that no player gains by a unilateral deviation from ``s0``.

    Args:
        game: Game
        profile: Stationary profile
        s0: Initial state
        tolerance: Exact slack allowed on every comparison
        enumeration_threshold: Policy enumeration threshold

    Returns:
        EquilibriumVerdict: Rejected verdicts name the first improving player
        and its pure memoryless best response
    """
    game.require_state(s0)
    payoffs = evaluate_profile(game, profile).at_state(s0)
    responses = _best_pure_responses(game, profile, s0, enumeration_threshold)
    return _verdict_from_responses(
        VerdictKind.NASH, s0, payoffs, responses, Fraction(tolerance), None
    )


def check_epsilon_nash(
    game: Game,
    profile: StationaryProfile,
    s0: State,
    epsilon: Fraction,
    tolerance: Fraction = Fraction(0),
    enumeration_threshold: int = DEFAULT_ENUMERATION_THRESHOLD,
) -> EquilibriumVerdict:
    """Accept iff no deviation improves any player's payoff by more than ``epsilon``."""
    epsilon = Fraction(epsilon)
    if epsilon < 0:
        raise PreconditionError(f"epsilon must be non-negative, got {format_rational(epsilon)}")
    game.require_state(s0)
    payoffs = evaluate_profile(game, profile).at_state(s0)
    responses = _best_pure_responses(game, profile, s0, enumeration_threshold)
    return _verdict_from_responses(
        VerdictKind.EPSILON_NASH, s0, payoffs, responses, epsilon + Fraction(tolerance), epsilon
    )


def check_imprecise(
    game: Game,
    profile: StationaryProfile,
    s0: State,
    epsilon: Fraction,
    tolerance: Fraction = Fraction(0),
    max_actions: int = DEFAULT_MAX_VERTEX_ACTIONS,
    enumeration_threshold: int = DEFAULT_ENUMERATION_THRESHOLD,
) -> EquilibriumVerdict:
    """
    Check the profile is an equilibrium under ε-imprecise deviations from ``s0``.

    For every player and every pure memoryless deviation, the perturber's
    best stationary answer within distance ε must bring the deviator's payoff
    down to the equilibrium payoff.

    Args:
        game: Game
        profile: Stationary profile
        s0: Initial state
        epsilon: Ball radius in [0, 1]
        tolerance: Exact slack allowed on every comparison
        max_actions: Vertex cap per state
        enumeration_threshold: Policy enumeration threshold

    Returns:
        EquilibriumVerdict: Rejected verdicts carry the deviation whose whole
        ball improves, its guaranteed value and the perturber's best answer

    Raises:
        CapExceededError: If a state offers more than ``max_actions`` actions
    """
    game.require_state(s0)
    epsilon = Fraction(epsilon)
    payoffs = evaluate_profile(game, profile).at_state(s0)
    margins: Dict[Player, Fraction] = {}
    witness = None
    for i in game.players:
        deviation_value = imprecise_deviation_value(
            game, profile, i, epsilon, max_actions, enumeration_threshold
        )
        value = deviation_value.at(s0)
        margins[i] = payoffs[i] - value
        if witness is None and value > payoffs[i] + Fraction(tolerance):
            deviation = deviation_value.witnesses[s0]
            _, counter = constrained_best_response(
                game,
                profile,
                i,
                ConstrainedActionSet.ball(game, deviation, epsilon, max_actions),
                "min",
                enumeration_threshold,
            )
            witness = DeviationWitness(i, deviation, value, payoffs[i], counter)
    verdict = EquilibriumVerdict(
        accepted=witness is None,
        kind=VerdictKind.IMPRECISE,
        state=s0,
        payoffs=payoffs,
        margins=margins,
        epsilon=epsilon,
        witness=witness,
    )
    logger.debug(f"Imprecise check at {s0}: accepted={verdict.accepted}")
    return verdict


def run_check(
    kind: str,
    game: Game,
    profile: StationaryProfile,
    s0: State,
    epsilon: Optional[Fraction] = None,
    tolerance: Fraction = Fraction(0),
) -> EquilibriumVerdict:
    """Dispatch to the checker named ``kind`` (nash, eps-nash or imprecise)."""
    if kind == "nash":
        return check_nash(game, profile, s0, tolerance)
    if kind not in CHECK_KINDS:
        raise ValueError(f"unknown check kind {kind!r}; expected one of {', '.join(CHECK_KINDS)}")
    if epsilon is None:
        raise PreconditionError(f"check kind {kind} needs an epsilon")
    if kind == "eps-nash":
        return check_epsilon_nash(game, profile, s0, epsilon, tolerance)
    return check_imprecise(game, profile, s0, epsilon, tolerance)


@dataclass(frozen=True)
class IterationConfig:
    """Parameters of the damped best-response iteration."""

    damping: Fraction = Fraction(1, 2)
    tolerance: float = 1e-9
    max_iterations: int = 10_000
    check_every: int = 10
    max_denominator: int = 1_000_000
    enumeration_threshold: int = DEFAULT_ENUMERATION_THRESHOLD
    max_vertex_actions: int = DEFAULT_MAX_VERTEX_ACTIONS
    max_states: int = DEFAULT_MAX_STATES

    @classmethod
    def from_settings(cls, settings: SolverSettings) -> "IterationConfig":
        section = settings.equilibrium
        return cls(
            damping=Fraction(section.damping),
            tolerance=section.tolerance,
            max_iterations=section.max_iterations,
            check_every=section.check_every,
            max_denominator=section.max_denominator,
            enumeration_threshold=settings.payoff.enumeration_threshold,
            max_vertex_actions=settings.strategy.max_vertex_actions,
            max_states=settings.structure.max_states,
        )


def _profile_movement(before: StationaryProfile, after: StationaryProfile) -> Fraction:
    return max((distance(before[i], after[i]) for i in before.players), default=Fraction(0))


def _candidate_score(verdict: EquilibriumVerdict) -> Fraction:
    return min(verdict.margins.values(), default=Fraction(0))


def compute_equilibrium(
    game: Game,
    epsilon: Fraction,
    s0: State,
    config: Optional[IterationConfig] = None,
) -> Tuple[StationaryProfile, EquilibriumVerdict]:
    """
    Search for an equilibrium under ε-imprecise deviations.

    The game is reduced to its cycle-free version, where every profile is
    kept inside Δ_ε. Starting from the uniform profile, each round replaces
    σ by (1 − λ)·σ + λ·BR(σ), where BR picks for every player a best vertex
    of its Δ_ε-restricted simplex, then rationalizes and projects back onto
    Δ_ε. The imprecise checker runs every ``check_every`` rounds and when the
    profile stops moving; its verdict on the lifted profile is final.

    Args:
        game: Game
        epsilon: Level in (0, 1/|Act|]
        s0: Initial state
        config: Iteration parameters

    Returns:
        Tuple of the lifted profile and the checker's verdict on the original
        game; a rejected verdict is returned (with a warning) when no
        accepted profile was found within the iteration budget
    """
    config = config or IterationConfig()
    epsilon = validate_epsilon(epsilon, len(game.actions))
    game.require_state(s0)
    reduced, mapping = make_cycle_free(game)
    start = mapping[s0]
    spec = delta_epsilon_spec(reduced, epsilon, max_states=config.max_states)
    action_sets = {
        i: ConstrainedActionSet.delta_epsilon(reduced, i, spec) for i in reduced.players
    }

    profile = project_to_delta_epsilon(uniform_profile(reduced), spec)
    best_profile = profile
    best_score: Optional[Fraction] = None
    checks = 0
    movement = Fraction(0)
    iteration = 0
    accepted = False
    try:
        for iteration in range(1, config.max_iterations + 1):
            responses = {
                i: constrained_best_response(
                    reduced, profile, i, action_sets[i], "max", config.enumeration_threshold
                )[1]
                for i in reduced.players
            }
            updated = StationaryProfile(
                {
                    i: profile[i].mix(responses[i], config.damping).rationalize(
                        config.max_denominator
                    )
                    for i in reduced.players
                }
            )
            updated = project_to_delta_epsilon(updated, spec)
            movement = _profile_movement(profile, updated)
            profile = updated
            settled = movement < config.tolerance
            if iteration % config.check_every and not settled:
                continue
            checks += 1
            verdict = check_imprecise(
                reduced,
                profile,
                start,
                epsilon,
                max_actions=config.max_vertex_actions,
                enumeration_threshold=config.enumeration_threshold,
            )
            score = _candidate_score(verdict)
            if best_score is None or score > best_score:
                best_score, best_profile = score, profile
            if verdict.accepted:
                accepted = True
                logger.info(f"Best-response iteration accepted after {iteration} rounds")
                break
            if settled:
                logger.info(f"Best-response iteration settled after {iteration} rounds")
                break
    except Exception as e:
        logger.error(f"Error during best-response iteration: {e}")
        raise

    lifted = lift_profile(profile if accepted else best_profile, mapping, game)
    verdict = check_imprecise(
        game,
        lifted,
        s0,
        epsilon,
        max_actions=config.max_vertex_actions,
        enumeration_threshold=config.enumeration_threshold,
    )
    diagnostics: Dict[str, Any] = {
        "iterations": iteration,
        "checks": checks,
        "last_movement": float(movement),
        "reduced_states": len(reduced.states),
        "collapsed_states": sorted(s for s, t in mapping.items() if s != t),
        "delta_epsilon": spec.to_list(),
    }
    if not verdict.accepted:
        logger.warning(
            f"No accepted equilibrium found within {config.max_iterations} rounds; "
            "returning the best candidate"
        )
    return lifted, dataclasses.replace(verdict, diagnostics=diagnostics)


@dataclass(frozen=True)
class SearchResult:
    """An accepted grid profile with its exact payoffs at the initial state."""

    profile: StationaryProfile
    payoffs: Dict[Player, Fraction]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "profile": self.profile.to_dict(),
            "payoffs": {i: format_rational(v) for i, v in self.payoffs.items()},
        }


def _grid_distributions(actions: Tuple[str, ...], grid: int) -> List[Distribution]:
    points = []
    for cuts in itertools.combinations(range(grid + len(actions) - 1), len(actions) - 1):
        # Stars and bars: gaps between the cut positions give the counts.
        bounds = (-1,) + cuts + (grid + len(actions) - 1,)
        counts = [bounds[k + 1] - bounds[k] - 1 for k in range(len(actions))]
        points.append(Distribution({a: Fraction(c, grid) for a, c in zip(actions, counts)}))
    return points


def grid_size(game: Game, grid: int) -> int:
    """Number of grid profiles ``brute_force_search`` would enumerate."""
    total = 1
    for i in game.players:
        for s in game.non_final_states:
            k = len(game.allowed(s, i))
            total *= math.comb(grid + k - 1, k - 1)
    return total


def _grid_profiles(game: Game, grid: int) -> Iterator[StationaryProfile]:
    slots = [(i, s) for i in game.players for s in game.non_final_states]
    options = [_grid_distributions(game.allowed(s, i), grid) for i, s in slots]
    for picks in itertools.product(*options):
        choice: Dict[Player, Dict[State, Distribution]] = {
            i: {f: Distribution.dirac(game.allowed(f, i)[0]) for f in game.finals}
            for i in game.players
        }
        for (i, s), dist in zip(slots, picks):
            choice[i][s] = dist
        yield StationaryProfile(
            {
                i: StationaryStrategy(i, {s: choice[i][s] for s in game.states})
                for i in game.players
            }
        )


def _check_candidate(
    task: Tuple[str, Game, StationaryProfile, State, Optional[Fraction]]
) -> Optional[SearchResult]:
    kind, game, profile, s0, epsilon = task
    verdict = run_check(kind, game, profile, s0, epsilon)
    if not verdict.accepted:
        return None
    return SearchResult(profile, dict(verdict.payoffs))


def brute_force_search(
    game: Game,
    epsilon: Optional[Fraction],
    s0: State,
    grid: int,
    kind: str = "imprecise",
    max_profiles: int = DEFAULT_MAX_PROFILES,
    threads: int = 1,
    show_progress: bool = False,
) -> List[SearchResult]:
    """
    Check every stationary profile whose probabilities are multiples of 1/grid.

    Final states play their first allowed action. Results keep the grid's
    canonical order.

    Args:
        game: Game
        epsilon: Level for the eps-nash and imprecise checkers
        s0: Initial state
        grid: Denominator N of the grid
        kind: Checker to apply (nash, eps-nash or imprecise)
        max_profiles: Cap on the number of grid profiles
        threads: Worker processes (1 runs in-process)
        show_progress: Display a progress bar on stderr

    Returns:
        List[SearchResult]: Accepted profiles with exact payoffs at ``s0``

    Raises:
        CapExceededError: If the grid has more than ``max_profiles`` profiles
    """
    if grid < 1:
        raise PreconditionError("grid denominator must be at least 1")
    if kind not in CHECK_KINDS:
        raise ValueError(f"unknown check kind {kind!r}; expected one of {', '.join(CHECK_KINDS)}")
    game.require_state(s0)
    total = grid_size(game, grid)
    if total > max_profiles:
        raise CapExceededError(f"{total} grid profiles exceed the search cap of {max_profiles}")
    logger.info(f"Searching {total} grid profiles with the {kind} checker")

    tasks = ((kind, game, profile, s0, epsilon) for profile in _grid_profiles(game, grid))
    found: List[SearchResult] = []
    if threads <= 1:
        outcomes = map(_check_candidate, tasks)
        for outcome in tqdm(outcomes, total=total, desc="Grid search", disable=not show_progress):
            if outcome is not None:
                found.append(outcome)
        return found

    with get_context("spawn").Pool(processes=threads) as pool:
        outcomes = pool.imap(_check_candidate, tasks, chunksize=16)
        for outcome in tqdm(outcomes, total=total, desc="Grid search", disable=not show_progress):
            if outcome is not None:
                found.append(outcome)
    return found
