# synthesis/models.py
"""
Parametric Markov chains and MDPs, specifications, instantiation and exact
checking of instantiated models.

There is no database behind these classes: models are read from text files and
kept in memory as immutable dataclasses.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from django.db import models

from .exceptions import MissingParameter, NotWellDefined, ParseError, StrategyCapExceeded
from .grammar import (
    expression_to_function,
    model_lines,
    parse_point_tokens,
    parse_specification_tokens,
)
from .ratfunc import RationalFunction, evaluate, make_ring
from .solvers import Direction, Game, backward_reachable, bounded_reach, solve_game
from .utils import synthesis_setting

logger = logging.getLogger(__name__)

CORPUS_DIR = Path(__file__).resolve().parent / "corpus"

PMC_ACTION = "tau"


class ModelKind(models.TextChoices):
    PMC = "pmc", "Parametric Markov chain"
    PMDP = "pmdp", "Parametric Markov decision process"


class Measure(models.TextChoices):
    REACH = "reach", "Reachability probability"
    BOUNDED_REACH = "bounded_reach", "Step-bounded reachability probability"
    EXPECTED_REWARD = "expected_reward", "Expected reward until target"


class Relation(models.TextChoices):
    LT = "<", "Less than"
    LE = "<=", "At most"
    GT = ">", "Greater than"
    GE = ">=", "At least"


NEGATED_RELATION = {
    Relation.LT: Relation.GE,
    Relation.LE: Relation.GT,
    Relation.GT: Relation.LE,
    Relation.GE: Relation.LT,
}


@dataclass(frozen=True)
class Specification:
    measure: str
    relation: str
    threshold: Fraction
    target: str
    step_bound: int = None

    @classmethod
    def parse(cls, text):
        measure, relation, threshold, bound, target = parse_specification_tokens(text.strip())
        relation = {"≤": "<=", "≥": ">="}.get(relation, relation)
        if measure == "E":
            if bound is not None:
                raise ParseError("step bounds apply to probabilities only", line=1, column=1)
            kind = Measure.EXPECTED_REWARD
        else:
            kind = Measure.REACH if bound is None else Measure.BOUNDED_REACH
            if not 0 <= threshold <= 1:
                raise ParseError(f"probability threshold {threshold} outside [0, 1]", line=1, column=1)
        return cls(Measure(kind), Relation(relation), Fraction(threshold), str(target), bound)

    @property
    def is_upper_bound(self):
        return self.relation in (Relation.LT, Relation.LE)

    @property
    def is_strict(self):
        return self.relation in (Relation.LT, Relation.GT)

    @property
    def direction(self):
        """The optimisation direction whose value decides whether all instantiations satisfy."""
        return Direction.MAX if self.is_upper_bound else Direction.MIN

    @property
    def with_rewards(self):
        return self.measure == Measure.EXPECTED_REWARD

    def holds(self, value):
        if value is None:
            return False
        if self.relation == Relation.LT:
            return value < self.threshold
        if self.relation == Relation.LE:
            return value <= self.threshold
        if self.relation == Relation.GT:
            return value > self.threshold
        return value >= self.threshold

    def negated(self):
        return Specification(self.measure, NEGATED_RELATION[self.relation], self.threshold, self.target, self.step_bound)

    def __str__(self):
        letter = "E" if self.measure == Measure.EXPECTED_REWARD else "P"
        bound = f" within {self.step_bound}" if self.measure == Measure.BOUNDED_REACH else ""
        return f"{letter} {Relation(self.relation).value} {self.threshold}{bound} reach {self.target}"


@dataclass(frozen=True)
class Choice:
    action: str
    entries: tuple
    reward: RationalFunction = None

    def successors(self):
        return [successor for successor, _ in self.entries]


@dataclass(frozen=True, eq=False)
class ParametricModel:
    kind: str
    parameters: tuple
    ring: object
    initial: int
    states: tuple
    labels: dict = field(default_factory=dict)
    name: str = ""

    @property
    def state_count(self):
        return len(self.states)

    @property
    def is_pmdp(self):
        return self.kind == ModelKind.PMDP

    @property
    def has_rewards(self):
        return any(choice.reward is not None for choices in self.states for choice in choices)

    def targets(self, label):
        if label not in self.labels:
            raise ParseError(f"unknown label {label!r}")
        return self.labels[label]

    def transition_count(self):
        return sum(len(choice.entries) for choices in self.states for choice in choices)

    def functions(self):
        for state, choices in enumerate(self.states):
            for index, choice in enumerate(choices):
                for successor, function in choice.entries:
                    yield state, index, successor, function

    def successor_sets(self):
        return [{t for choice in choices for t, _ in choice.entries} for choices in self.states]

    def reward(self, state, index):
        reward = self.states[state][index].reward
        return reward if reward is not None else RationalFunction(self.ring.zero)

    @classmethod
    def parse(cls, text, name=""):
        return ModelBuilder(name).build(text)

    def __str__(self):
        return f"{self.name or self.kind} ({self.state_count} states, {len(self.parameters)} parameters)"


def load_model(path):
    """Read a model file; a bare name such as ``knuth_yao`` refers to the bundled corpus."""
    path = Path(path)
    if not path.exists() and (CORPUS_DIR / f"{path.name}.pm").exists():
        path = CORPUS_DIR / f"{path.name}.pm"
    if not path.exists():
        raise ParseError(f"no model file {str(path)!r}")
    return ParametricModel.parse(path.read_text(encoding="utf-8"), name=path.stem)


class ModelBuilder:
    def __init__(self, name=""):
        self.name = name
        self.kind = None
        self.parameters = None
        self.ring = None
        self.count = None
        self.initial = None
        self.labels = {}
        self.transitions = {}
        self.action_rewards = {}
        self.state_rewards = {}

    def build(self, text):
        for number, tokens in model_lines(text):
            handler = getattr(self, f"_line_{tokens[0]}", None) or self._line_kind
            handler(number, tokens)
        return self._assemble()

    def _require(self, number, what):
        if what == "parameters" and self.ring is None:
            raise ParseError("parameters must be declared first", line=number, column=1)
        if what == "states" and self.count is None:
            raise ParseError("states must be declared first", line=number, column=1)

    def _state(self, number, state):
        if not 0 <= state < self.count:
            raise ParseError(f"state {state} out of range", line=number, column=1)
        return state

    def _line_kind(self, number, tokens):
        if self.kind is not None:
            raise ParseError("model kind declared twice", line=number, column=1)
        self.kind = ModelKind(tokens[0])

    def _line_parameters(self, number, tokens):
        names = list(tokens[1])
        if len(set(names)) != len(names):
            raise ParseError("duplicate parameter", line=number, column=1)
        self.parameters = tuple(names)
        self.ring = make_ring(self.parameters)

    def _line_states(self, number, tokens):
        self.count, self.initial = tokens[1], tokens[3]
        if self.count < 1:
            raise ParseError("a model needs at least one state", line=number, column=1)
        self._state(number, self.initial)

    def _line_label(self, number, tokens):
        self._require(number, "states")
        members = {self._state(number, s) for s in tokens[2]}
        self.labels[str(tokens[1])] = self.labels.get(str(tokens[1]), frozenset()) | members

    def _line_transition(self, number, tokens):
        self._require(number, "parameters")
        self._require(number, "states")
        source = self._state(number, tokens[1])
        action = str(tokens[2]) if self.kind == ModelKind.PMDP else PMC_ACTION
        target = self._state(number, tokens[-2])
        function = expression_to_function(tokens[-1], self.ring, line=number)
        row = self.transitions.setdefault(source, {}).setdefault(action, {})
        row[target] = row[target] + function if target in row else function

    def _line_reward(self, number, tokens):
        self._require(number, "parameters")
        self._require(number, "states")
        state = self._state(number, tokens[1])
        function = expression_to_function(tokens[-1], self.ring, line=number)
        if len(tokens) == 4:
            key = (state, str(tokens[2]))
            bucket = self.action_rewards
        else:
            key = state
            bucket = self.state_rewards
        bucket[key] = bucket[key] + function if key in bucket else function

    def _assemble(self):
        if self.kind is None or self.ring is None or self.count is None:
            raise ParseError("a model needs a kind, parameters and a states line")
        states = []
        for state in range(self.count):
            actions = self.transitions.get(state, {})
            choices = []
            for action, row in actions.items():
                entries = tuple((t, f) for t, f in sorted(row.items()) if not f.is_zero)
                if not entries:
                    continue
                reward = self.action_rewards.pop((state, action), None)
                if state in self.state_rewards:
                    extra = self.state_rewards[state]
                    reward = extra if reward is None else reward + extra
                choices.append(Choice(action, entries, reward))
            if not choices:
                raise ParseError(f"state {state} has no outgoing transitions")
            if self.kind == ModelKind.PMC and len(choices) != 1:
                raise ParseError(f"state {state} of a pmc has {len(choices)} actions")
            states.append(tuple(choices))
        if self.action_rewards:
            (state, action), _ = next(iter(self.action_rewards.items()))
            raise ParseError(f"reward for unknown action {action!r} of state {state}")
        model = ParametricModel(
            kind=self.kind,
            parameters=self.parameters,
            ring=self.ring,
            initial=self.initial,
            states=tuple(states),
            labels=dict(self.labels),
            name=self.name,
        )
        logger.debug("parsed %s with %d transitions", model, model.transition_count())
        return model


# instantiation


def make_instantiation(model, values):
    point = {name: Fraction(value) for name, value in dict(values).items()}
    missing = [name for name in model.parameters if name not in point]
    if missing:
        raise MissingParameter(f"no value for parameter {missing[0]!r}")
    return {name: point[name] for name in model.parameters}


def parse_point(text, model=None):
    point = dict(parse_point_tokens(text.strip()))
    return make_instantiation(model, point) if model is not None else point


@dataclass(frozen=True)
class ConcreteChoice:
    action: str
    entries: tuple
    reward: Fraction = Fraction(0)


@dataclass(frozen=True, eq=False)
class ConcreteModel:
    model: ParametricModel
    point: dict
    states: tuple
    well_defined: bool
    issues: tuple = ()

    @property
    def initial(self):
        return self.model.initial

    def successor_sets(self):
        return [
            {t for choice in choices for t, value in choice.entries if value}
            for choices in self.states
        ]

    def as_game(self):
        if not self.well_defined:
            raise NotWellDefined("; ".join(self.issues))
        choices = tuple(
            tuple(tuple((t, value) for t, value in choice.entries if value) for choice in state)
            for state in self.states
        )
        rewards = tuple(tuple(choice.reward for choice in state) for state in self.states)
        return Game(choices=choices, owners=(0,) * len(choices), initial=self.initial, rewards=rewards)


def instantiate(model, point):
    """Evaluate every function of ``model`` at ``point``; problems are collected, not raised."""
    point = make_instantiation(model, point)
    issues = []
    states = []
    for state, choices in enumerate(model.states):
        concrete = []
        for choice in choices:
            entries = []
            for successor, function in choice.entries:
                value = evaluate(function, point)
                if value is None:
                    issues.append(f"transition {state}->{successor} is undefined")
                elif value < 0 or value > 1:
                    issues.append(f"transition {state}->{successor} has value {value}")
                entries.append((successor, value))
            if all(value is not None for _, value in entries):
                total = sum(value for _, value in entries)
                if total != 1:
                    issues.append(f"row {state}/{choice.action} sums to {total}")
            reward = Fraction(0)
            if choice.reward is not None:
                reward = evaluate(choice.reward, point)
                if reward is None or reward < 0:
                    issues.append(f"reward of {state}/{choice.action} is {reward if reward is not None else 'undefined'}")
            concrete.append(ConcreteChoice(choice.action, tuple(entries), reward))
        states.append(tuple(concrete))
    return ConcreteModel(model, point, tuple(states), not issues, tuple(issues))


def is_graph_preserving_point(model, point):
    point = make_instantiation(model, point)
    for _, _, _, function in model.functions():
        value = evaluate(function, point)
        if not value:
            return False
    return True


def reach_states(model, targets):
    """``(states that can reach targets, states that cannot)`` on the nonzero graph."""
    can = backward_reachable(model.successor_sets(), targets)
    cannot = frozenset(range(len(model.states))) - can
    return can, cannot


def check_concrete(concrete, spec, mode=Direction.MAX):
    """
    Exact value of ``spec``'s measure at the initial state of ``concrete``.
    MDPs are optimised in ``mode``; an infinite expected reward is ``math.inf``.
    """
    targets = concrete.model.targets(spec.target)
    game = concrete.as_game()
    if spec.measure == Measure.BOUNDED_REACH:
        solution = bounded_reach(game, targets, spec.step_bound, (mode, mode))
    else:
        solution = solve_game(game, targets, (mode, mode), with_rewards=spec.with_rewards)
    value = solution.values[concrete.initial]
    if value == math.inf:
        logger.debug("expected reward diverges at %s", concrete.point)
    return value


def check_point(model, spec, point, mode=None):
    return check_concrete(instantiate(model, point), spec, mode or spec.direction)


# strategies


def strategies(model, states=None, cap=None):
    """
    Every memoryless deterministic strategy over ``states`` (default: all states
    with a choice), as tuples of choice indices. Raises StrategyCapExceeded when
    there are more than ``cap`` of them.
    """
    cap = cap if cap is not None else synthesis_setting("STRATEGY_CAP", 64)
    if states is None:
        states = [s for s, choices in enumerate(model.states) if len(choices) > 1]
    count = 1
    for s in states:
        count *= len(model.states[s])
    if count > cap:
        raise StrategyCapExceeded(f"{count} strategies exceed the cap of {cap}")
    base = [0] * model.state_count
    result = []
    for picks in itertools.product(*(range(len(model.states[s])) for s in states)):
        strategy = list(base)
        for s, pick in zip(states, picks):
            strategy[s] = pick
        result.append(tuple(strategy))
    return result


def induced_chain(model, strategy):
    states = tuple((model.states[s][strategy[s]],) for s in range(model.state_count))
    return ParametricModel(
        kind=ModelKind.PMC,
        parameters=model.parameters,
        ring=model.ring,
        initial=model.initial,
        states=states,
        labels=model.labels,
        name=model.name,
    )
