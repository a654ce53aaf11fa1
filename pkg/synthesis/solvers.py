# synthesis/solvers.py
"""
Exact solvers shared by the concrete model checker and parameter lifting.

* ``solve_fixed_point`` solves ``x = A x + b`` by Gaussian elimination over any
  field (Fractions or rational functions).
* ``Game`` is a finite turn-based stochastic game with rational probabilities;
  an MDP is a game with one player, a Markov chain one with a single choice per
  state. Games are solved for reachability probabilities and expected rewards:
  numpy value iteration finds good strategies quickly, exact strategy iteration
  over Fractions then produces the precise values.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from django.db import models

from .utils import synthesis_setting

logger = logging.getLogger(__name__)


class Direction(models.TextChoices):
    MIN = "min", "Minimise"
    MAX = "max", "Maximise"


def solve_fixed_point(coefficients, constants, order):
    """
    Solve ``x_i = sum_j a_ij x_j + b_i`` for the variables in ``order``.

    ``coefficients`` maps i -> {j: a_ij} and ``constants`` maps i -> b_i; values
    are field elements supporting + - * / and comparison with 0. Variables
    are pivoted in the given order. Returns {i: x_i}.
    """
    rows = {i: dict(coefficients.get(i, {})) for i in order}
    rhs = {i: constants.get(i, 0) for i in order}
    column = {}
    for i, row in rows.items():
        for j in row:
            column.setdefault(j, set()).add(i)

    eliminated = []
    done = set()
    for k in order:
        row = rows[k]
        loop = row.pop(k, None)
        column.get(k, set()).discard(k)
        if loop is not None and not loop == 0:
            scale = 1 / (1 - loop)
            for j in row:
                row[j] = row[j] * scale
            rhs[k] = rhs[k] * scale
        for i in sorted(column.get(k, ())):
            if i == k or i in done or i not in rows:
                continue
            factor = rows[i].pop(k)
            for j, value in row.items():
                updated = rows[i].get(j, 0) + factor * value
                if updated == 0:
                    rows[i].pop(j, None)
                    column.get(j, set()).discard(i)
                else:
                    rows[i][j] = updated
                    column.setdefault(j, set()).add(i)
            rhs[i] = rhs[i] + factor * rhs[k]
        column.pop(k, None)
        done.add(k)
        eliminated.append(k)
        logger.debug("pivoted variable %s", k)

    solution = {}
    for k in reversed(eliminated):
        value = rhs[k]
        for j, coefficient in rows[k].items():
            value = value + coefficient * solution[j]
        solution[k] = value
    return solution


# graph analysis


def predecessors(successor_sets):
    result = [set() for _ in successor_sets]
    for state, successors in enumerate(successor_sets):
        for successor in successors:
            result[successor].add(state)
    return result


def backward_reachable(successor_sets, targets):
    preds = predecessors(successor_sets)
    seen = set(targets)
    stack = list(targets)
    while stack:
        state = stack.pop()
        for pred in preds[state]:
            if pred not in seen:
                seen.add(pred)
                stack.append(pred)
    return frozenset(seen)


@dataclass(frozen=True)
class Game:
    """
    Turn-based stochastic game.

    ``choices[s]`` is a tuple of rows, each a tuple of ``(successor, Fraction)``
    pairs with positive probabilities; ``owners[s]`` is 0 or 1;
    ``rewards[s][c]`` (optional) is the reward collected when choice c is taken.
    """

    choices: tuple
    owners: tuple
    initial: int = 0
    rewards: tuple = None

    @property
    def state_count(self):
        return len(self.choices)

    def successor_sets(self):
        return [{t for row in rows for t, _ in row} for rows in self.choices]


def positive_reach(game, targets, existential):
    result = set(targets)
    changed = True
    while changed:
        changed = False
        for s, rows in enumerate(game.choices):
            if s in result:
                continue
            hits = [any(t in result for t, _ in row) for row in rows]
            if any(hits) if existential[s] else all(hits):
                result.add(s)
                changed = True
    return frozenset(result)


def almost_sure_reach(game, targets, existential):
    z = set(range(game.state_count))
    while True:
        y = set(targets) & z
        witness = {}
        changed = True
        while changed:
            changed = False
            for s in sorted(z - y):
                good = [
                    c for c, row in enumerate(game.choices[s])
                    if all(t in z for t, _ in row) and any(t in y for t, _ in row)
                ]
                if (good if existential[s] else len(good) == len(game.choices[s])):
                    y.add(s)
                    witness[s] = good[0]
                    changed = True
        if y == z:
            return frozenset(z), witness
        z = y


# solutions


@dataclass
class GameSolution:
    values: list
    strategy: list
    iterations: int = 0
    improvements: int = 0
    converged: bool = True


def _better(direction, candidate, incumbent):
    if direction == Direction.MAX:
        return candidate > incumbent
    return candidate < incumbent


def _choice_value(row, values, reward=None):
    total = reward if reward is not None else Fraction(0)
    for successor, probability in row:
        value = values[successor]
        if value == math.inf:
            return math.inf
        total += probability * value
    return total


class _FlatGame:
    def __init__(self, game):
        probabilities, columns, row_pointer, state_pointer, rewards = [], [], [0], [0], []
        for s, rows in enumerate(game.choices):
            for c, row in enumerate(rows):
                for successor, probability in row:
                    probabilities.append(float(probability))
                    columns.append(successor)
                row_pointer.append(len(columns))
                rewards.append(float(game.rewards[s][c]) if game.rewards is not None else 0.0)
            state_pointer.append(len(row_pointer) - 1)
        self.probabilities = np.array(probabilities, dtype=float)
        self.columns = np.array(columns, dtype=np.int64)
        self.row_pointer = np.array(row_pointer, dtype=np.int64)
        self.state_pointer = np.array(state_pointer, dtype=np.int64)
        self.rewards = np.array(rewards, dtype=float)

    def choice_values(self, values, with_rewards):
        products = self.probabilities * values[self.columns]
        q = np.add.reduceat(products, self.row_pointer[:-1])
        if with_rewards:
            q = q + self.rewards
        return q


def value_iteration(game, fixed, maximise, with_rewards, precision=None, max_iterations=None):
    """
    Floating value iteration. ``fixed`` maps states to their known values;
    ``maximise[s]`` gives the optimisation direction of s. Returns the value
    array, the greedy strategy and the number of sweeps.
    """
    precision = precision if precision is not None else synthesis_setting("VI_PRECISION", 1e-8)
    max_iterations = max_iterations or synthesis_setting("VI_MAX_ITERATIONS", 100000)
    flat = _FlatGame(game)
    n = game.state_count
    values = np.zeros(n)
    fixed_mask = np.zeros(n, dtype=bool)
    for s, value in fixed.items():
        values[s] = float(value)
        fixed_mask[s] = True
    free = ~fixed_mask
    maximise = np.array(maximise, dtype=bool)
    starts = flat.state_pointer[:-1]

    iterations = 0
    q = flat.choice_values(values, with_rewards)
    for iterations in range(1, max_iterations + 1):
        best = np.where(maximise, np.maximum.reduceat(q, starts), np.minimum.reduceat(q, starts))
        updated = np.where(fixed_mask, values, best)
        if free.any():
            delta = np.abs(updated[free] - values[free])
            scale = np.maximum(np.abs(updated[free]), 1.0)
            done = bool(np.all(delta <= precision * scale))
        else:
            done = True
        values = updated
        q = flat.choice_values(values, with_rewards)
        if done:
            break
    else:
        logger.warning("value iteration stopped after %d sweeps without converging", max_iterations)

    strategy = []
    for s in range(n):
        block = q[flat.state_pointer[s]:flat.state_pointer[s + 1]]
        strategy.append(int(np.argmax(block) if maximise[s] else np.argmin(block)))
    logger.debug("value iteration: %d sweeps", iterations)
    return values, strategy, iterations


def evaluate_profile(game, profile, targets, fixed, with_rewards):
    """
    Exact values of the Markov chain induced by a choice per state.

    Reachability: states that cannot reach a state fixed to a positive value
    get 0. Expected rewards: states that do not reach ``targets`` almost surely
    get ``math.inf``.
    """
    n = game.state_count
    successors = [set() if s in fixed else {t for t, _ in game.choices[s][profile[s]]} for s in range(n)]
    values = [None] * n
    for s, value in fixed.items():
        values[s] = value

    if with_rewards:
        reach_target = backward_reachable(successors, {s for s, value in fixed.items() if value != math.inf})
        doomed = backward_reachable(successors, set(range(n)) - reach_target)
        for s in doomed:
            if s not in fixed:
                values[s] = math.inf
    else:
        positive = {s for s, value in fixed.items() if value > 0}
        can_reach = backward_reachable(successors, positive)
        for s in range(n):
            if s not in fixed and s not in can_reach:
                values[s] = Fraction(0)

    unknown = [s for s in range(n) if values[s] is None]
    coefficients, constants = {}, {}
    for s in unknown:
        row = game.choices[s][profile[s]]
        constant = game.rewards[s][profile[s]] if with_rewards else Fraction(0)
        coefficients[s] = {}
        for t, probability in row:
            if values[t] is None:
                coefficients[s][t] = coefficients[s].get(t, Fraction(0)) + probability
            else:
                constant += probability * values[t]
        constants[s] = constant
    for s, value in solve_fixed_point(coefficients, constants, unknown).items():
        values[s] = value
    return values


def _improve(game, states, directions_of, profile, values, with_rewards):
    switched = 0
    for s in states:
        rows = game.choices[s]
        reward = (lambda c: game.rewards[s][c]) if with_rewards else (lambda c: None)
        current = _choice_value(rows[profile[s]], values, reward(profile[s]))
        best_choice, best_value = profile[s], current
        for c, row in enumerate(rows):
            candidate = _choice_value(row, values, reward(c))
            if _better(directions_of(s), candidate, best_value):
                best_choice, best_value = c, candidate
        if best_choice != profile[s]:
            profile[s] = best_choice
            switched += 1
    return switched


def _strategy_iteration(game, controlled, directions_of, profile, targets, fixed, with_rewards, cap):
    iterations = 0
    while True:
        values = evaluate_profile(game, profile, targets, fixed, with_rewards)
        iterations += 1
        if not _improve(game, controlled, directions_of, profile, values, with_rewards):
            return values, iterations, True
        if iterations >= cap:
            logger.warning("strategy iteration stopped after %d rounds", cap)
            return evaluate_profile(game, profile, targets, fixed, with_rewards), iterations, False


def solve_game(game, targets, directions, with_rewards=False, precision=None, max_iterations=None):
    """
    Exact optimal values of ``game``.

    ``directions`` gives the direction of player 0 and player 1. Without rewards
    the value is the probability to reach ``targets``; with rewards it is the
    expected reward collected before reaching them, ``math.inf`` where the
    target is not reached almost surely under optimal play.
    """
    directions = tuple(Direction(d) for d in directions)
    targets = frozenset(targets)
    n = game.state_count
    direction_of = [directions[game.owners[s]] for s in range(n)]
    cap = synthesis_setting("PI_MAX_ITERATIONS", 10000)

    fixed = {}
    witness = {}
    if with_rewards:
        # finite iff the minimising side can force the target almost surely
        existential = [d == Direction.MIN for d in direction_of]
        finite, witness = almost_sure_reach(game, targets, existential)
        for s in range(n):
            if s in targets:
                fixed[s] = Fraction(0)
            elif s not in finite:
                fixed[s] = math.inf
    else:
        existential = [d == Direction.MAX for d in direction_of]
        positive = positive_reach(game, targets, existential)
        certain, _ = almost_sure_reach(game, targets, existential)
        for s in range(n):
            if s in targets or s in certain:
                fixed[s] = Fraction(1)
            elif s not in positive:
                fixed[s] = Fraction(0)

    free = [s for s in range(n) if s not in fixed]
    if not free:
        values = [fixed[s] for s in range(n)]
        return GameSolution(values=values, strategy=[0] * n)

    if all(len(rows) == 1 for rows in game.choices):
        profile, sweeps = [0] * n, 0
    else:
        maximise = [d == Direction.MAX for d in direction_of]
        vi_fixed = {s: (1e300 if v == math.inf else v) for s, v in fixed.items()}
        _, profile, sweeps = value_iteration(game, vi_fixed, maximise, with_rewards, precision, max_iterations)
    if with_rewards:
        for s, choice in witness.items():
            if direction_of[s] == Direction.MIN:
                profile[s] = choice

    if len(set(direction_of[s] for s in free)) == 1 or len({game.owners[s] for s in free}) == 1:
        values, improvements, converged = _strategy_iteration(
            game, free, lambda s: direction_of[s], profile, targets, fixed, with_rewards, cap
        )
    else:
        outer = [s for s in free if game.owners[s] == 0]
        inner = [s for s in free if game.owners[s] == 1]
        improvements, converged = 0, True
        while True:
            values, inner_rounds, inner_converged = _strategy_iteration(
                game, inner, lambda s: direction_of[s], profile, targets, fixed, with_rewards, cap
            )
            improvements += inner_rounds
            converged = converged and inner_converged
            if not _improve(game, outer, lambda s: direction_of[s], profile, values, with_rewards):
                break
            if improvements >= cap:
                logger.warning("strategy iteration stopped after %d rounds", improvements)
                converged = False
                break
    logger.debug("exact phase: %d evaluations after %d value-iteration sweeps", improvements, sweeps)
    return GameSolution(
        values=values, strategy=profile, iterations=sweeps, improvements=improvements, converged=converged
    )


def bounded_reach(game, targets, steps, directions):
    directions = tuple(Direction(d) for d in directions)
    n = game.state_count
    values = [Fraction(1) if s in targets else Fraction(0) for s in range(n)]
    strategy = [0] * n
    for _ in range(steps):
        updated = []
        for s in range(n):
            if s in targets:
                updated.append(Fraction(1))
                continue
            candidates = [_choice_value(row, values) for row in game.choices[s]]
            pick = max if directions[game.owners[s]] == Direction.MAX else min
            best = pick(candidates)
            strategy[s] = candidates.index(best)
            updated.append(best)
        values = updated
    return GameSolution(values=values, strategy=strategy)
