"""
Exact rational linear algebra for absorbing Markov chains and single-controller
decision processes with terminal rewards.

Nodes are arbitrary hashables. A chain is given by the transition
distribution of every non-terminal node plus the value vector attached to
each terminal node. Runs that never reach a terminal node are worth 0.
"""

import itertools
from fractions import Fraction
from typing import Dict, Hashable, List, Mapping, Sequence, Set, Tuple

import networkx as nx

from ..exceptions import SolverError
from ..utils.logging_utils import setup_logging

logger = setup_logging(__name__)

Node = Hashable
Transitions = Mapping[Node, Mapping[Node, Fraction]]

DEFAULT_ENUMERATION_THRESHOLD = 2 ** 16

_TARGET = ("__impeq_target__",)


def solve_linear_system(
    matrix: List[List[Fraction]], rhs: List[List[Fraction]]
) -> List[List[Fraction]]:
    """
    Solve ``matrix · X = rhs`` exactly by Gauss-Jordan elimination.

    Args:
        matrix: Square matrix (n × n) of Fractions, modified in place
        rhs: Right-hand sides (n × k), modified in place

    Returns:
        List[List[Fraction]]: Solution rows (n × k)

    Raises:
        SolverError: If the matrix is singular
    """
    n = len(matrix)
    for col in range(n):
        pivot = next((r for r in range(col, n) if matrix[r][col] != 0), None)
        if pivot is None:
            raise SolverError("singular linear system in exact evaluation")
        if pivot != col:
            matrix[col], matrix[pivot] = matrix[pivot], matrix[col]
            rhs[col], rhs[pivot] = rhs[pivot], rhs[col]
        inv = 1 / matrix[col][col]
        row, rhs_row = matrix[col], rhs[col]
        for c in range(col, n):
            row[c] *= inv
        for c in range(len(rhs_row)):
            rhs_row[c] *= inv
        for r in range(n):
            factor = matrix[r][col]
            if r == col or factor == 0:
                continue
            target, target_rhs = matrix[r], rhs[r]
            for c in range(col, n):
                if row[c] != 0:
                    target[c] -= factor * row[c]
            for c in range(len(rhs_row)):
                if rhs_row[c] != 0:
                    target_rhs[c] -= factor * rhs_row[c]
    return rhs


def reaching_nodes(transitions: Transitions, terminals: Sequence[Node]) -> Set[Node]:
    """Nodes with a path of positive-probability edges to some terminal node."""
    graph = nx.DiGraph()
    graph.add_nodes_from(transitions)
    graph.add_nodes_from(terminals)
    graph.add_edges_from((u, v) for u, dist in transitions.items() for v in dist)
    graph.add_edges_from((t, _TARGET) for t in terminals)
    return nx.ancestors(graph, _TARGET) if terminals else set()


def absorbing_values(
    transitions: Transitions,
    terminal_values: Mapping[Node, Sequence[Fraction]],
    width: int,
) -> Dict[Node, List[Fraction]]:
    """
    Expected terminal value vector from every node of an absorbing chain.

    Args:
        transitions: Distribution of every non-terminal node
        terminal_values: Value vector (length ``width``) of each terminal node
        width: Number of value columns (e.g. players)

    Returns:
        Dict[Node, List[Fraction]]: Values for terminal and non-terminal nodes;
        0 wherever no terminal node is reachable
    """
    reach = reaching_nodes(transitions, list(terminal_values))
    unknowns = [n for n in transitions if n in reach]
    index = {n: k for k, n in enumerate(unknowns)}
    values: Dict[Node, List[Fraction]] = {
        t: [Fraction(v) for v in vec] for t, vec in terminal_values.items()
    }
    zero = [Fraction(0)] * width
    for n in transitions:
        if n not in reach:
            values[n] = list(zero)
    if not unknowns:
        return values

    size = len(unknowns)
    matrix = [[Fraction(0)] * size for _ in range(size)]
    rhs = [[Fraction(0)] * width for _ in range(size)]
    for n, k in index.items():
        row = matrix[k]
        row[k] += 1
        for target, p in transitions[n].items():
            if target in index:
                row[index[target]] -= p
            elif target in terminal_values:
                vec = terminal_values[target]
                for c in range(width):
                    rhs[k][c] += p * vec[c]
            elif target not in transitions:
                raise SolverError(f"transition into unknown node {target!r}")
    solution = solve_linear_system(matrix, rhs)
    for n, k in index.items():
        values[n] = solution[k]
    return values


def _evaluate(
    choices: Mapping[Node, Sequence[Mapping[Node, Fraction]]],
    terminal_values: Mapping[Node, Fraction],
    policy: Mapping[Node, int],
) -> Dict[Node, Fraction]:
    transitions = {n: choices[n][policy[n]] for n in choices}
    vectors = absorbing_values(transitions, {t: (v,) for t, v in terminal_values.items()}, 1)
    return {n: vec[0] for n, vec in vectors.items()}


def _trap_set(
    choices: Mapping[Node, Sequence[Mapping[Node, Fraction]]],
    values: Mapping[Node, Fraction],
    sign: int,
) -> Set[Node]:
    # Largest set of wrongly-signed nodes the controller can keep play inside.
    trap = {n for n in choices if sign * values[n] < 0}
    changed = True
    while changed:
        changed = False
        for n in list(trap):
            if not any(set(option) <= trap for option in choices[n]):
                trap.discard(n)
                changed = True
    return trap


def policy_count(choices: Mapping[Node, Sequence[Mapping[Node, Fraction]]]) -> int:
    count = 1
    for options in choices.values():
        count *= len(options)
    return count


def optimize_policy(
    choices: Mapping[Node, Sequence[Mapping[Node, Fraction]]],
    terminal_values: Mapping[Node, Fraction],
    mode: str = "max",
    enumeration_threshold: int = DEFAULT_ENUMERATION_THRESHOLD,
) -> Tuple[Dict[Node, Fraction], Dict[Node, int]]:
    """
    Optimal memoryless policy of a single-controller terminal-reward process.

    Every non-terminal node picks one of its options (a distribution over
    nodes). Small instances are solved by enumerating all policies, larger
    ones by exact policy iteration starting from option 0 everywhere.

    Args:
        choices: Options per non-terminal node, in canonical order
        terminal_values: Reward of each terminal node
        mode: "max" or "min"
        enumeration_threshold: Enumerate when the policy count is at most this

    Returns:
        Tuple of the optimal value of every node and the chosen option index
        per non-terminal node (lowest index among equally good options)
    """
    if mode not in ("max", "min"):
        raise ValueError(f"mode must be 'max' or 'min', got {mode!r}")
    sign = 1 if mode == "max" else -1
    for n, options in choices.items():
        if not options:
            raise ValueError(f"node {n!r} has no options")

    nodes = list(choices)
    if policy_count(choices) <= enumeration_threshold:
        best_values: Dict[Node, Fraction] = {}
        best_policy: Dict[Node, int] = {}
        best_score = None
        for picks in itertools.product(*(range(len(choices[n])) for n in nodes)):
            policy = dict(zip(nodes, picks))
            values = _evaluate(choices, terminal_values, policy)
            score = sign * sum((values[n] for n in nodes), Fraction(0))
            if best_score is None or score > best_score:
                best_score, best_values, best_policy = score, values, policy
        return best_values, best_policy

    policy = {n: 0 for n in nodes}
    rounds = 0
    while True:
        rounds += 1
        values = _evaluate(choices, terminal_values, policy)
        switched = False
        for n in nodes:
            scores = [
                sign * sum((p * values[t] for t, p in option.items()), Fraction(0))
                for option in choices[n]
            ]
            best = max(scores)
            if best > scores[policy[n]]:
                policy[n] = scores.index(best)
                switched = True
        if switched:
            continue
        trap = _trap_set(choices, values, sign)
        if not trap:
            logger.debug(f"Policy iteration converged after {rounds} rounds")
            return values, policy
        for n in trap:
            policy[n] = next(
                k for k, option in enumerate(choices[n]) if set(option) <= trap
            )
