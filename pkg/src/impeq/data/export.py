"""
JSON and CSV rendering of solver results.

JSON is printed with sorted keys so identical inputs give identical bytes.
CSV tables are built with pandas and flatten the same payloads.
"""

import json
from typing import Any, Dict, List, Mapping, Sequence

import pandas as pd

from ..models.results import EquilibriumVerdict, MonteCarloEstimate, PayoffVector
from ..utils.logging_utils import setup_logging
from ..utils.validation_utils import format_rational

logger = setup_logging(__name__)

OUTPUT_FORMATS = ("json", "csv")


def to_json(payload: Any) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, lineterminator="\n")


def payoffs_frame(payoffs: PayoffVector) -> pd.DataFrame:
    return pd.DataFrame(payoffs.to_records(), columns=["state", "player", "value"])


def deviation_frame(payload: Mapping[str, Any]) -> pd.DataFrame:
    """Flatten a deviation-value payload to (state, player, value) rows."""
    rows = [
        {"state": s, "player": i, "value": value}
        for i, entry in payload["values"].items()
        for s, value in entry["values"].items()
    ]
    return pd.DataFrame(rows, columns=["state", "player", "value"])


def verdict_frame(verdict: EquilibriumVerdict) -> pd.DataFrame:
    rows = [
        {
            "kind": verdict.kind.value,
            "state": verdict.state,
            "player": i,
            "accepted": verdict.accepted,
            "payoff": format_rational(verdict.payoffs[i]),
            "margin": format_rational(verdict.margins[i]),
        }
        for i in verdict.payoffs
    ]
    return pd.DataFrame(rows, columns=["kind", "state", "player", "accepted", "payoff", "margin"])


def search_frame(results: Sequence[Mapping[str, Any]]) -> pd.DataFrame:
    """
    One row per (profile, player, state, action) entry of the accepted profiles.

    Args:
        results: ``SearchResult.to_dict()`` payloads
    """
    rows: List[Dict[str, Any]] = []
    for index, result in enumerate(results):
        for player, strategy in result["profile"].items():
            for state, dist in strategy.items():
                for action, prob in dist.items():
                    rows.append(
                        {
                            "profile": index,
                            "player": player,
                            "state": state,
                            "action": action,
                            "probability": prob,
                            "payoff": result["payoffs"][player],
                        }
                    )
    return pd.DataFrame(
        rows, columns=["profile", "player", "state", "action", "probability", "payoff"]
    )


def analysis_frame(report: Mapping[str, Any]) -> pd.DataFrame:
    """One row per Δ_ε constraint of an ``analyze_game`` report."""
    return pd.DataFrame(
        report.get("delta_epsilon") or [],
        columns=["player", "state", "action", "lower_bound"],
    )


def simulation_frame(estimate: MonteCarloEstimate) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "player": i,
                "estimate": float(estimate.estimates[i]),
                "half_width": float(estimate.half_widths[i]),
            }
            for i in estimate.estimates
        ],
        columns=["player", "estimate", "half_width"],
    )


def render(payload: Any, frame: pd.DataFrame, output_format: str) -> str:
    """
    Render either the JSON payload or its CSV table.

    Raises:
        ValueError: If ``output_format`` is neither json nor csv
    """
    if output_format == "json":
        return to_json(payload)
    if output_format == "csv":
        logger.debug(f"Rendering {len(frame)} CSV rows")
        return _csv(frame)
    raise ValueError(f"unknown output format {output_format!r}; expected json or csv")
