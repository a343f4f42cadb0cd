"""
API endpoints for impeq.

Request bodies carry the game (and profile) documents inline; responses are
the same JSON payloads the command line prints.
"""

import json
from fractions import Fraction
from typing import Any, Dict, Optional

from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field

from ..data.game_parser import parse_game
from ..data.profile_parser import parse_profile
from ..data.reports import deviation_payload, payoff_payload, validation_payload
from ..exceptions import ImpeqError
from ..models.game import Game
from ..models.strategy import StationaryProfile
from ..solvers.equilibrium import run_check
from ..solvers.structure import analyze_game
from ..utils import setup_logging
from ..utils.config_utils import load_settings
from ..utils.validation_utils import parse_rational

logger = setup_logging(__name__)
router = APIRouter()


class GameRequest(BaseModel):
    game: Dict[str, Any]


class AnalyzeRequest(GameRequest):
    epsilon: Optional[str] = None


class ProfileRequest(GameRequest):
    profile: Dict[str, Any]
    state: Optional[str] = None


class CheckRequest(ProfileRequest):
    kind: str = "imprecise"
    epsilon: Optional[str] = None


class ValueRequest(ProfileRequest):
    epsilon: str
    player: Optional[str] = None
    method: str = Field("ball", pattern="^(ball|turn-based)$")


def _game(request: GameRequest) -> Game:
    return parse_game(json.dumps(request.game))


def _profile(request: ProfileRequest, game: Game) -> StationaryProfile:
    return parse_profile(json.dumps(request.profile), game)


def _state(game: Game, state: Optional[str]) -> str:
    s0 = state if state is not None else game.states[0]
    if not game.arena.has_state(s0):
        raise HTTPException(status_code=404, detail=f"unknown state {s0}")
    return s0


def _epsilon(text: Optional[str]) -> Optional[Fraction]:
    return parse_rational(text) if text is not None else None


def _bad_request(action: str, e: Exception) -> HTTPException:
    logger.info(f"Rejected {action} request: {e}")
    return HTTPException(status_code=400, detail=str(e))


@router.post("/validate")
async def validate_game(request: GameRequest) -> Dict[str, Any]:
    """Parse and validate a game document."""
    try:
        return validation_payload(_game(request))
    except (ImpeqError, ValueError) as e:
        raise _bad_request("validate", e)


@router.post("/analyze")
async def analyze(request: AnalyzeRequest) -> Dict[str, Any]:
    """Structural report of a game, with Δ_ε constraints when epsilon is given."""
    try:
        settings = load_settings()
        return analyze_game(
            _game(request), _epsilon(request.epsilon), settings.structure.max_states
        )
    except (ImpeqError, ValueError) as e:
        raise _bad_request("analyze", e)


@router.post("/eval")
async def evaluate(request: ProfileRequest) -> Dict[str, Any]:
    """Exact payoffs of a profile."""
    try:
        game = _game(request)
        s0 = _state(game, request.state) if request.state is not None else None
        return payoff_payload(game, _profile(request, game), s0)
    except (ImpeqError, ValueError) as e:
        raise _bad_request("eval", e)


@router.post("/check")
async def check(request: CheckRequest) -> Dict[str, Any]:
    """
    Run the nash, eps-nash or imprecise checker.

    Returns:
        Dict[str, Any]: The verdict, accepted or not
    """
    try:
        game = _game(request)
        s0 = _state(game, request.state)
        verdict = run_check(
            request.kind, game, _profile(request, game), s0, _epsilon(request.epsilon)
        )
        return verdict.to_dict()
    except (ImpeqError, ValueError) as e:
        raise _bad_request("check", e)
    except HTTPException:
        raise
    except Exception as e:
        logger.error(f"Error in check: {e}")
        raise HTTPException(status_code=500, detail="Internal server error")


@router.post("/value")
async def value(request: ValueRequest) -> Dict[str, Any]:
    """Deviation values of one or all players."""
    try:
        game = _game(request)
        return deviation_payload(
            game,
            _profile(request, game),
            parse_rational(request.epsilon),
            request.player,
            request.method,
            load_settings(),
        )
    except (ImpeqError, ValueError) as e:
        raise _bad_request("value", e)
