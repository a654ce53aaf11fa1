# synthesis/lifting.py
"""
Region verification by parameter lifting.

Every state gets its own copy of the parameters it uses, and each copy may
take any value of its interval independently. For locally monotone models the
extreme values are attained at the interval bounds, so the relaxed model is a
plain MDP whose actions are the vertex assignments of the state's parameters
(a stochastic game for pMDPs, where the original nondeterminism and the
parameter choice belong to different players). Its optimal values bound the
values of every instantiation in the region.
"""
import logging
import threading
import weakref
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from django.db import models

from .exceptions import (
    NotLocallyMonotone,
    RegionNotGraphPreserving,
    UnsupportedSpecification,
)
from .models import Measure, check_point
from .ratfunc import evaluate, row_is_locally_monotone
from .regions import GraphStatus, RegionStatus, RegionVerdict, check_graph_preserving
from .solvers import Direction, Game, solve_game

logger = logging.getLogger(__name__)

__all__ = [
    "Lifter",
    "NondeterminismRelation",
    "build_substitution",
    "check_region_pmc",
    "check_region_pmc_reward",
    "check_region_pmdp",
    "solve_game",
]


class NondeterminismRelation(models.TextChoices):
    DEMONIC = "demonic", "All strategies"
    ANGELIC = "angelic", "Some strategy"


class Hypothesis(models.TextChoices):
    ACCEPT = "accept", "Accepting"
    REJECT = "reject", "Rejecting"


def opposite(direction):
    return Direction.MIN if direction == Direction.MAX else Direction.MAX


@dataclass(frozen=True)
class TemplateRow:
    state: int
    action: str
    parameters: tuple
    entries: tuple
    reward: object = None


@dataclass
class Substitution:
    """
    The relaxed, parameter-free model of one region.

    ``game`` holds the substituted states; ``vertices[g]`` lists, per choice of
    game state ``g``, the parameter assignment it stands for (``None`` for the
    states of the nondeterministic player of a pMDP).
    """

    game: Game
    vertices: list
    origin: list

    def action_count(self, state):
        return len(self.game.choices[state])


class Lifter:
    """Builds substitutions for one model; the symbolic template is computed once."""

    def __init__(self, model):
        self.model = model
        self._templates = {}
        self._lock = threading.Lock()

    def template(self, with_rewards=False):
        with self._lock:
            if with_rewards not in self._templates:
                self._templates[with_rewards] = self._build_template(with_rewards)
            return self._templates[with_rewards]

    def _build_template(self, with_rewards):
        rows = []
        names = self.model.parameters
        for state, choices in enumerate(self.model.states):
            for choice in choices:
                functions = [f for _, f in choice.entries]
                if with_rewards and choice.reward is not None:
                    functions.append(choice.reward)
                if not row_is_locally_monotone(functions):
                    raise NotLocallyMonotone(f"row of state {state} action {choice.action} is not locally monotone")
                used = set()
                for f in functions:
                    used |= f.parameters()
                rows.append(TemplateRow(
                    state=state,
                    action=choice.action,
                    parameters=tuple(name for name in names if name in used),
                    entries=choice.entries,
                    reward=choice.reward if with_rewards else None,
                ))
        logger.debug("lifting template for %s: %d rows", self.model, len(rows))
        return rows

    def _vertex_rows(self, row, region):
        seen = {}
        for vertex in region.vertices(row.parameters):
            transitions = []
            for successor, function in row.entries:
                value = evaluate(function, vertex)
                if value:
                    transitions.append((successor, value))
            reward = evaluate(row.reward, vertex) if row.reward is not None else Fraction(0)
            key = (tuple(transitions), reward)
            if key not in seen:
                seen[key] = vertex
        return [(vertex, transitions, reward) for (transitions, reward), vertex in seen.items()]

    def require_graph_preserving(self, region):
        result = check_graph_preserving(self.model, region)
        if result.status == GraphStatus.NOT_PRESERVING:
            raise RegionNotGraphPreserving(
                f"region {region} is not graph-preserving, e.g. at "
                + ", ".join(f"{k}={v}" for k, v in result.witness.items())
            )
        if result.status == GraphStatus.NEEDS_SOLVER:
            raise RegionNotGraphPreserving(f"graph preservation of {region} cannot be shown by vertex analysis")

    def build_substitution(self, region, with_rewards=False):
        template = self.template(with_rewards)
        self.require_graph_preserving(region)
        model = self.model
        if not model.is_pmdp:
            choices, vertices, rewards = [], [], []
            for row in template:
                substituted = self._vertex_rows(row, region)
                choices.append(tuple(tuple(t) for _, t, _ in substituted))
                vertices.append([v for v, _, _ in substituted])
                rewards.append(tuple(r for _, _, r in substituted))
            game = Game(
                choices=tuple(choices),
                owners=(0,) * len(choices),
                initial=model.initial,
                rewards=tuple(rewards) if with_rewards else None,
            )
            return Substitution(game, vertices, list(range(len(choices))))

        n = model.state_count
        choices = [[] for _ in range(n)]
        vertices = [None] * n
        rewards = [[] for _ in range(n)]
        origin = list(range(n))
        owners = [0] * n
        for row in template:
            pair = len(origin)
            choices[row.state].append(((pair, Fraction(1)),))
            rewards[row.state].append(Fraction(0))
            substituted = self._vertex_rows(row, region)
            choices.append(tuple(tuple(t) for _, t, _ in substituted))
            vertices.append([v for v, _, _ in substituted])
            rewards.append(tuple(r for _, _, r in substituted))
            origin.append(row.state)
            owners.append(1)
        game = Game(
            choices=tuple(tuple(c) for c in choices),
            owners=tuple(owners),
            initial=model.initial,
            rewards=tuple(tuple(r) for r in rewards) if with_rewards else None,
        )
        return Substitution(game, vertices, origin)

    # verification

    def bound(self, region, spec, directions):
        if spec.measure == Measure.BOUNDED_REACH:
            raise UnsupportedSpecification("parameter lifting does not handle step-bounded reachability")
        substitution = self.build_substitution(region, with_rewards=spec.with_rewards)
        targets = self.model.targets(spec.target)
        solution = solve_game(substitution.game, targets, directions, with_rewards=spec.with_rewards)
        return substitution, solution

    def project(self, substitution, strategy, region):
        """
        Instantiation read off a vertex strategy: states are visited breadth-first
        from the initial state, the first to fix a parameter wins and unfixed
        parameters sit at their lower bound.
        """
        game = substitution.game
        point = {}
        seen = {game.initial}
        queue = deque([game.initial])
        while queue:
            state = queue.popleft()
            choice = strategy[state]
            labels = substitution.vertices[state]
            if labels is not None:
                for name, value in labels[choice].items():
                    point.setdefault(name, value)
            for successor, _ in game.choices[state][choice]:
                if successor not in seen:
                    seen.add(successor)
                    queue.append(successor)
        lower = region.lower_corner()
        return {name: point.get(name, lower[name]) for name in self.model.parameters}

    def _attempt(self, region, spec, relation, diagnostics):
        """
        Try to show that ``spec`` holds on the whole region. Returns
        ``(proved, value, refuting point or None)``.
        """
        against = spec.direction
        if self.model.is_pmdp and relation == NondeterminismRelation.ANGELIC:
            directions = (opposite(against), against)
        else:
            directions = (against, against)
        substitution, solution = self.bound(region, spec, directions)
        value = solution.values[self.model.initial]
        diagnostics["games_solved"] = diagnostics.get("games_solved", 0) + 1
        diagnostics["value_iteration_sweeps"] = diagnostics.get("value_iteration_sweeps", 0) + solution.iterations
        diagnostics["strategy_evaluations"] = diagnostics.get("strategy_evaluations", 0) + solution.improvements
        if not solution.converged:
            return False, value, None
        if spec.holds(value):
            return True, value, None
        point = self.project(substitution, solution.strategy, region)
        exact = check_point(self.model, spec, point, mode=directions[0])
        if spec.holds(exact):
            logger.debug("projected point %s does not refute %s", point, spec)
            return False, value, None
        return False, value, point

    def check(self, region, spec, relation=NondeterminismRelation.DEMONIC, hypothesis=None):
        """
        Verdict for ``spec`` on ``region``. The hypothesis picks which claim is
        tried first; the other one is tried only when the first fails.
        """
        relation = NondeterminismRelation(relation)
        dual = NondeterminismRelation.ANGELIC if relation == NondeterminismRelation.DEMONIC else NondeterminismRelation.DEMONIC
        claims = [
            (RegionStatus.ALL_SAT, spec, relation),
            (RegionStatus.ALL_VIOLATE, spec.negated(), dual),
        ]
        if hypothesis == Hypothesis.REJECT:
            claims.reverse()

        diagnostics = {"engine": "lifting"}
        verdict = RegionVerdict(status=RegionStatus.UNKNOWN, diagnostics=diagnostics)
        for status, claim, claim_relation in claims:
            proved, value, point = self._attempt(region, claim, claim_relation, diagnostics)
            if claim.direction == Direction.MAX:
                verdict.upper = value
            else:
                verdict.lower = value
            # a point where the bound fails violates the specification
            if status == RegionStatus.ALL_SAT and point is not None:
                verdict.counterexample = point
            if proved:
                verdict.status = status
                break
        verdict.bound = verdict.upper if spec.is_upper_bound else verdict.lower
        logger.debug("lifting on %s: %s", region, verdict.status)
        return verdict


_lifters = weakref.WeakKeyDictionary()
_lifters_lock = threading.Lock()


def lifter_for(model):
    with _lifters_lock:
        lifter = _lifters.get(model)
        if lifter is None:
            lifter = _lifters[model] = Lifter(model)
        return lifter


def build_substitution(model, region, with_rewards=False):
    return lifter_for(model).build_substitution(region, with_rewards)


def check_region_pmc(model, region, spec, hypothesis=None):
    if model.is_pmdp:
        raise UnsupportedSpecification("use check_region_pmdp for pmdps")
    return lifter_for(model).check(region, spec, hypothesis=hypothesis)


def check_region_pmc_reward(model, region, spec, hypothesis=None):
    if spec.measure != Measure.EXPECTED_REWARD:
        raise UnsupportedSpecification("expected an expected-reward specification")
    return check_region_pmc(model, region, spec, hypothesis)


def check_region_pmdp(model, region, spec, relation=NondeterminismRelation.DEMONIC, hypothesis=None):
    return lifter_for(model).check(region, spec, relation=relation, hypothesis=hypothesis)


def check_region(model, region, spec, relation=NondeterminismRelation.DEMONIC, hypothesis=None):
    return lifter_for(model).check(region, spec, relation=relation, hypothesis=hypothesis)
