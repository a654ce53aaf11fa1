# synthesis/elimination.py
"""
Exact synthesis: the solution function of a pMC as a rational function.

Three engines compute it. State elimination bypasses states one by one in the
order chosen by an elimination heuristic; Gaussian elimination solves the
equation system over the field of rational functions; set-based elimination
substitutes all transitions at once and rescales self-loops until no
transitions between undecided states remain.
"""
import logging
import math
from collections import deque

from django.db import models

from .exceptions import AbsorbingSelfLoop, RewardDiverges, UnsupportedSpecification
from .models import Measure, reach_states
from .ratfunc import RationalFunction, semantically_equal, stats
from .solvers import backward_reachable, solve_fixed_point

logger = logging.getLogger(__name__)


class EliminationOrder(models.TextChoices):
    FORWARD = "forward", "Forward"
    FORWARD_REVERSED = "forward_reversed", "Forward, reversed"
    BACKWARD = "backward", "Backward"
    BACKWARD_REVERSED = "backward_reversed", "Backward, reversed"
    SCC_TOPOLOGICAL = "scc", "Strongly connected components"
    REGEX = "regex", "Regular expression (in-degree times out-degree)"
    SPEN = "spen", "Static penalty"
    DPEN = "dpen", "Dynamic penalty"


DYNAMIC_ORDERS = (EliminationOrder.REGEX, EliminationOrder.DPEN)


class Engine(models.TextChoices):
    STATE_ELIMINATION = "state", "State elimination"
    GAUSSIAN = "gaussian", "Gaussian elimination"
    SET_BASED = "set", "Set-based transition elimination"


class FlexibleMatrix:
    """
    Sparse rows of rational functions with a synchronised predecessor index
    and a one-step vector ``x``.
    """

    def __init__(self, ring, states=()):
        self.ring = ring
        self.zero = RationalFunction(ring.zero)
        self.rows = {}
        self.preds = {}
        self.x = {}
        for s in states:
            self.add_state(s)

    def add_state(self, s):
        self.rows.setdefault(s, {})
        self.preds.setdefault(s, set())
        self.x.setdefault(s, self.zero)

    @property
    def states(self):
        return sorted(self.rows)

    def get(self, s, t):
        return self.rows[s].get(t)

    def set(self, s, t, f):
        if f.is_zero:
            self.remove(s, t)
            return
        self.rows[s][t] = f
        self.preds[t].add(s)

    def add(self, s, t, f):
        existing = self.rows[s].get(t)
        self.set(s, t, f if existing is None else existing + f)

    def remove(self, s, t):
        self.rows[s].pop(t, None)
        self.preds[t].discard(s)

    def remove_state(self, s):
        for t in self.rows.pop(s):
            if t != s:
                self.preds[t].discard(s)
        for p in self.preds.pop(s):
            if p != s and p in self.rows:
                self.rows[p].pop(s, None)
        self.x.pop(s, None)

    def in_degree(self, s):
        return len(self.preds[s] - {s})

    def out_degree(self, s):
        return len(self.rows[s]) - (s in self.rows[s])

    def transition_count(self):
        return sum(len(row) for row in self.rows.values())


def build_matrix(model, maybe, targets, vector="reach", sink=None):
    """
    Restrict ``model`` to ``maybe``. ``vector`` selects the one-step vector:
    "reach" puts the probability of entering ``targets`` into x, "reward" puts
    the state reward there, "none" leaves x zero and, with ``sink``, redirects
    the target probability to an explicit sink state.
    """
    matrix = FlexibleMatrix(model.ring, sorted(maybe))
    if sink is not None:
        matrix.add_state(sink)
    for s in sorted(maybe):
        choice = model.states[s][0]
        for t, f in choice.entries:
            if t in maybe:
                matrix.add(s, t, f)
            elif t in targets:
                if vector == "reach":
                    matrix.x[s] = matrix.x[s] + f
                elif sink is not None:
                    matrix.add(s, sink, f)
        if vector == "reward":
            matrix.x[s] = model.reward(s, 0)
    return matrix


# elimination steps


def eliminate_selfloop(matrix, s):
    """Rescale the row and the one-step value of ``s`` by 1/(1 - loop) and drop the loop."""
    loop = matrix.get(s, s)
    if loop is None:
        return
    if semantically_equal(loop, RationalFunction.constant(matrix.ring, 1)):
        raise AbsorbingSelfLoop(f"state {s} loops with probability one")
    matrix.remove(s, s)
    factor = 1 / (1 - loop)
    for t, f in list(matrix.rows[s].items()):
        matrix.set(s, t, (f * factor).cancel())
    matrix.x[s] = (matrix.x[s] * factor).cancel()


def eliminate_transition(matrix, s1, s):
    f = matrix.get(s1, s)
    if f is None:
        return
    matrix.remove(s1, s)
    for t, g in list(matrix.rows[s].items()):
        matrix.add(s1, t, f * g)
    matrix.x[s1] = matrix.x[s1] + f * matrix.x[s]


def eliminate_state(matrix, s):
    eliminate_selfloop(matrix, s)
    for s1 in sorted(matrix.preds[s]):
        if s1 != s:
            eliminate_transition(matrix, s1, s)
    matrix.remove_state(s)
    logger.debug("eliminated state %s, %d transitions left", s, matrix.transition_count())


# elimination orders


def forward_order(successor_sets, initial):
    seen = {initial}
    order = [initial]
    queue = deque([initial])
    while queue:
        s = queue.popleft()
        for t in sorted(successor_sets[s]):
            if t not in seen:
                seen.add(t)
                order.append(t)
                queue.append(t)
    return order


def backward_order(successor_sets, targets):
    preds = [set() for _ in successor_sets]
    for s, successors in enumerate(successor_sets):
        for t in successors:
            preds[t].add(s)
    seen = set(targets)
    order = sorted(targets)
    queue = deque(order)
    while queue:
        s = queue.popleft()
        for t in sorted(preds[s]):
            if t not in seen:
                seen.add(t)
                order.append(t)
                queue.append(t)
    return order


def strongly_connected_components(states, successors):
    index, lowlink, on_stack = {}, {}, set()
    stack, components = [], []
    counter = 0
    for root in states:
        if root in index:
            continue
        work = [(root, iter(sorted(successors(root))))]
        index[root] = lowlink[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, children = work[-1]
            advanced = False
            for child in children:
                if child not in index:
                    index[child] = lowlink[child] = counter
                    counter += 1
                    stack.append(child)
                    on_stack.add(child)
                    work.append((child, iter(sorted(successors(child)))))
                    advanced = True
                    break
                if child in on_stack:
                    lowlink[node] = min(lowlink[node], index[child])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[node])
            if lowlink[node] == index[node]:
                component = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.append(member)
                    if member == node:
                        break
                components.append(component)
    return components


def _penalty(matrix, s):
    total = 0
    incident = [f for f in matrix.rows[s].values()]
    incident += [matrix.rows[p][s] for p in matrix.preds[s] if p != s]
    for f in incident:
        deg_num, deg_den, terms_num, terms_den = stats(f)
        total += terms_num + terms_den + deg_num + deg_den
    return total


def static_order(order, model, matrix, candidates, targets):
    successor_sets = model.successor_sets()
    if order in (EliminationOrder.FORWARD, EliminationOrder.FORWARD_REVERSED):
        sequence = [s for s in forward_order(successor_sets, model.initial) if s in candidates]
    elif order in (EliminationOrder.BACKWARD, EliminationOrder.BACKWARD_REVERSED):
        sequence = [s for s in backward_order(successor_sets, targets) if s in candidates]
        sequence += sorted(set(candidates) - set(sequence))
    elif order == EliminationOrder.SCC_TOPOLOGICAL:
        rank = {s: i for i, s in enumerate(forward_order(successor_sets, model.initial))}
        components = strongly_connected_components(
            sorted(candidates), lambda s: [t for t in matrix.rows[s] if t in candidates]
        )
        sequence = []
        for component in reversed(components):
            sequence += sorted(component, key=lambda s: (rank.get(s, math.inf), s))
    elif order == EliminationOrder.SPEN:
        sequence = sorted(candidates, key=lambda s: (_penalty(matrix, s), s))
    else:
        raise ValueError(f"{order} is a dynamic order")
    if order in (EliminationOrder.FORWARD_REVERSED, EliminationOrder.BACKWARD_REVERSED):
        sequence.reverse()
    return sequence


def next_state(order, matrix, remaining):
    if order == EliminationOrder.REGEX:
        return min(remaining, key=lambda s: (matrix.in_degree(s) * matrix.out_degree(s), s))
    if order == EliminationOrder.DPEN:
        return min(remaining, key=lambda s: (_penalty(matrix, s), s))
    raise ValueError(f"{order} is a static order")


def eliminate_all(matrix, model, candidates, targets, order):
    order = EliminationOrder(order)
    if order in DYNAMIC_ORDERS:
        remaining = set(candidates)
        while remaining:
            s = next_state(order, matrix, remaining)
            remaining.discard(s)
            eliminate_state(matrix, s)
    else:
        for s in static_order(order, model, matrix, candidates, targets):
            eliminate_state(matrix, s)


# solution functions


def _require_pmc(model):
    if model.is_pmdp:
        raise UnsupportedSpecification("solution functions are computed for pmcs; fix a strategy first")


def _undecided(model, targets):
    _, cannot = reach_states(model, targets)
    reachable = set(forward_order(model.successor_sets(), model.initial))
    return {s for s in reachable if s not in targets and s not in cannot}, cannot


def solution_function(model, targets, order=EliminationOrder.FORWARD, engine=Engine.STATE_ELIMINATION, one_step=True):
    """Probability of eventually reaching ``targets`` from the initial state, as a function of the parameters."""
    _require_pmc(model)
    engine = Engine(engine)
    one = RationalFunction.constant(model.ring, 1)
    zero = RationalFunction(model.ring.zero)
    if model.initial in targets:
        return one
    maybe, cannot = _undecided(model, targets)
    if model.initial in cannot:
        return zero

    if engine == Engine.GAUSSIAN:
        return solution_vector(model, targets)[model.initial]
    if engine == Engine.SET_BASED:
        matrix = build_matrix(model, maybe, targets)
        result = set_based_elimination(matrix, model, targets, order)
    elif one_step:
        matrix = build_matrix(model, maybe, targets)
        eliminate_all(matrix, model, maybe - {model.initial}, targets, order)
        eliminate_selfloop(matrix, model.initial)
        result = matrix.x[model.initial]
    else:
        sink = model.state_count
        matrix = build_matrix(model, maybe, targets, vector="none", sink=sink)
        eliminate_all(matrix, model, maybe - {model.initial}, targets, order)
        eliminate_selfloop(matrix, model.initial)
        result = matrix.get(model.initial, sink) or zero
    return result.cancel()


def solution_vector(model, targets, order=None):
    """Solution functions of every state: 1 on targets, 0 where they cannot be reached."""
    _require_pmc(model)
    one = RationalFunction.constant(model.ring, 1)
    zero = RationalFunction(model.ring.zero)
    _, cannot = reach_states(model, targets)
    maybe = [s for s in range(model.state_count) if s not in targets and s not in cannot]
    matrix = build_matrix(model, set(maybe), targets)
    solved = solve_fixed_point(matrix.rows, matrix.x, order or maybe)
    vector = []
    for s in range(model.state_count):
        if s in targets:
            vector.append(one)
        elif s in cannot:
            vector.append(zero)
        else:
            vector.append(solved[s].cancel())
    return vector


def set_based_elimination(matrix, model, targets, order=EliminationOrder.FORWARD, cap=None):
    """
    Substitute every transition between undecided states at once (x = P x + b
    becomes x = P^2 x + P b + b) and rescale the self-loops that appear, until
    the initial state has no such transitions left. After ``cap`` rounds
    (default ceil(log2 n) + 2) the rest is finished by state elimination.
    """
    initial = model.initial
    n = max(len(matrix.rows), 2)
    cap = cap if cap is not None else math.ceil(math.log2(n)) + 2
    for round_ in range(1, cap + 1):
        for s in matrix.states:
            eliminate_selfloop(matrix, s)
        if not matrix.rows[initial]:
            logger.debug("set-based elimination done after %d rounds", round_ - 1)
            return matrix.x[initial]
        rows = {s: dict(row) for s, row in matrix.rows.items()}
        x = dict(matrix.x)
        for s in matrix.states:
            squared = {}
            value = x[s]
            for t, f in rows[s].items():
                value = value + f * x[t]
                for u, g in rows[t].items():
                    squared[u] = squared[u] + f * g if u in squared else f * g
            for t in list(matrix.rows[s]):
                matrix.remove(s, t)
            for u, h in squared.items():
                matrix.set(s, u, h)
            matrix.x[s] = value
    for s in matrix.states:
        eliminate_selfloop(matrix, s)
    if matrix.rows[initial]:
        logger.warning("set-based elimination did not converge in %d rounds; finishing by state elimination", cap)
        eliminate_all(matrix, model, set(matrix.states) - {initial}, targets, order)
        eliminate_selfloop(matrix, initial)
    return matrix.x[initial]


def expected_reward_function(model, targets, order=EliminationOrder.FORWARD, engine=Engine.STATE_ELIMINATION):
    """Expected reward collected before reaching ``targets``, as a function of the parameters."""
    _require_pmc(model)
    if model.initial in targets:
        return RationalFunction(model.ring.zero)
    reachable = set(forward_order(model.successor_sets(), model.initial))
    _, cannot = reach_states(model, targets)
    if reachable & cannot:
        raise RewardDiverges(f"states {sorted(reachable & cannot)} cannot reach the target")
    maybe = {s for s in reachable if s not in targets}
    matrix = build_matrix(model, maybe, targets, vector="reward")
    if Engine(engine) == Engine.GAUSSIAN:
        return solve_fixed_point(matrix.rows, matrix.x, sorted(maybe))[model.initial].cancel()
    eliminate_all(matrix, model, maybe - {model.initial}, targets, order)
    eliminate_selfloop(matrix, model.initial)
    return matrix.x[model.initial].cancel()


def bounded_reach_function(model, targets, steps):
    _require_pmc(model)
    one = RationalFunction.constant(model.ring, 1)
    zero = RationalFunction(model.ring.zero)
    vector = [one if s in targets else zero for s in range(model.state_count)]
    relevant = backward_reachable(model.successor_sets(), targets)
    for _ in range(steps):
        updated = []
        for s in range(model.state_count):
            if s in targets:
                updated.append(one)
            elif s not in relevant:
                updated.append(zero)
            else:
                total = zero
                for t, f in model.states[s][0].entries:
                    if not vector[t].is_zero:
                        total = total + f * vector[t]
                updated.append(total)
        vector = updated
    return vector[model.initial].cancel()


def synthesise(model, spec, order=EliminationOrder.FORWARD, engine=Engine.STATE_ELIMINATION):
    targets = model.targets(spec.target)
    if spec.measure == Measure.EXPECTED_REWARD:
        return expected_reward_function(model, targets, order, engine)
    if spec.measure == Measure.BOUNDED_REACH:
        return bounded_reach_function(model, targets, spec.step_bound)
    return solution_function(model, targets, order, engine)
