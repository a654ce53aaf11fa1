# synthesis/smt.py
"""
Region verification with an external SMT solver.

Rational-function comparisons are rewritten into polynomial constraints,
assembled into equation-system or solution-function formulas, printed as
SMT-LIB 2 and sent to a solver process (``PARAMSYNTH_SMT_CMD``, ``z3 -in`` by
default). Region queries are incremental: the model part is asserted once,
each region lives between a push and a pop.
"""
import logging
import os
import selectors
import shlex
import shutil
import subprocess
import time
from dataclasses import dataclass
from fractions import Fraction

from django.db import models

from .exceptions import (
    ProtocolParseError,
    RegionNotGraphPreserving,
    RewardDiverges,
    SolverSpawnFailure,
    UnsupportedSpecification,
)
from .grammar import parse_sexpr
from .models import Measure, check_point, induced_chain, reach_states, strategies
from .ratfunc import (
    RationalFunction,
    common_denominator,
    evaluate_polynomial,
    make_ring,
    parameter_names,
    semantically_equal,
    to_fraction,
    to_qq,
)
from .regions import GraphStatus, RegionStatus, RegionVerdict, check_graph_preserving
from .solvers import backward_reachable
from .utils import synthesis_setting

logger = logging.getLogger(__name__)


class Comparison(models.TextChoices):
    LT = "<", "Less than"
    LE = "<=", "At most"
    EQ = "=", "Equal"
    NE = "distinct", "Not equal"
    GE = ">=", "At least"
    GT = ">", "Greater than"


FLIPPED = {
    Comparison.LT: Comparison.GT,
    Comparison.LE: Comparison.GE,
    Comparison.GT: Comparison.LT,
    Comparison.GE: Comparison.LE,
    Comparison.EQ: Comparison.EQ,
    Comparison.NE: Comparison.NE,
}


def _compare(value, relation):
    if relation == Comparison.LT:
        return value < 0
    if relation == Comparison.LE:
        return value <= 0
    if relation == Comparison.EQ:
        return value == 0
    if relation == Comparison.NE:
        return value != 0
    if relation == Comparison.GE:
        return value >= 0
    return value > 0


# formulas


@dataclass(frozen=True)
class Constraint:
    """``poly relation 0`` for a polynomial over parameters and state variables."""

    poly: object
    relation: str

    def holds(self, point):
        return _compare(evaluate_polynomial(self.poly, point), self.relation)

    def to_smtlib(self):
        term = smt_polynomial(self.poly)
        if self.relation == Comparison.NE:
            return f"(not (= {term} 0))"
        return f"({Comparison(self.relation).value} {term} 0)"


@dataclass(frozen=True)
class BoolVar:
    name: str

    def holds(self, point):
        return bool(point.get(self.name, False))

    def to_smtlib(self):
        return self.name


@dataclass(frozen=True)
class Not:
    part: object

    def holds(self, point):
        return not self.part.holds(point)

    def to_smtlib(self):
        return f"(not {self.part.to_smtlib()})"


@dataclass(frozen=True)
class And:
    parts: tuple

    def holds(self, point):
        return all(part.holds(point) for part in self.parts)

    def to_smtlib(self):
        if not self.parts:
            return "true"
        if len(self.parts) == 1:
            return self.parts[0].to_smtlib()
        return "(and " + " ".join(part.to_smtlib() for part in self.parts) + ")"


@dataclass(frozen=True)
class Or:
    parts: tuple

    def holds(self, point):
        return any(part.holds(point) for part in self.parts)

    def to_smtlib(self):
        if not self.parts:
            return "false"
        if len(self.parts) == 1:
            return self.parts[0].to_smtlib()
        return "(or " + " ".join(part.to_smtlib() for part in self.parts) + ")"


TRUE = And(())
FALSE = Or(())


def constraint(poly, relation):
    relation = Comparison(relation)
    if poly.is_ground:
        value = to_fraction(poly.LC) if poly else Fraction(0)
        return TRUE if _compare(value, relation) else FALSE
    return Constraint(poly, relation)


def _flatten(parts, kind):
    result = []
    for part in parts:
        if isinstance(part, kind):
            for inner in _flatten(part.parts, kind):
                if inner not in result:
                    result.append(inner)
        elif part not in result:
            result.append(part)
    return result


def conjunction(*parts):
    parts = _flatten(parts, And)
    if FALSE in parts:
        return FALSE
    parts = [part for part in parts if part != TRUE]
    return parts[0] if len(parts) == 1 else And(tuple(parts))


def disjunction(*parts):
    parts = _flatten(parts, Or)
    if TRUE in parts:
        return TRUE
    parts = [part for part in parts if part != FALSE]
    return parts[0] if len(parts) == 1 else Or(tuple(parts))


def negation(formula):
    if formula == TRUE:
        return FALSE
    if formula == FALSE:
        return TRUE
    if isinstance(formula, Not):
        return formula.part
    return Not(formula)


def implication(premise, conclusion):
    return disjunction(negation(premise), conclusion)


# SMT-LIB text


def smt_number(value):
    value = Fraction(value)
    magnitude = abs(value)
    text = str(magnitude.numerator) if magnitude.denominator == 1 else f"(/ {magnitude.numerator} {magnitude.denominator})"
    return f"(- {text})" if value < 0 else text


def smt_polynomial(poly):
    names = parameter_names(poly.ring)
    terms = []
    for monom, coefficient in poly.terms():
        coefficient = to_fraction(coefficient)
        factors = [names[i] for i, exponent in enumerate(monom) for _ in range(exponent)]
        if not factors:
            terms.append(smt_number(coefficient))
        elif coefficient == 1:
            terms.append(factors[0] if len(factors) == 1 else f"(* {' '.join(factors)})")
        else:
            terms.append(f"(* {smt_number(coefficient)} {' '.join(factors)})")
    if not terms:
        return "0"
    return terms[0] if len(terms) == 1 else f"(+ {' '.join(terms)})"


# rational-function constraints


def _scaled_relation(denominator, lhs, relation):
    relation = Comparison(relation)
    if denominator.is_ground:
        if to_fraction(denominator.LC) < 0:
            return constraint(lhs, FLIPPED[relation])
        return constraint(lhs, relation)
    nonzero = constraint(denominator, Comparison.NE)
    if relation in (Comparison.EQ, Comparison.NE):
        return conjunction(nonzero, constraint(lhs, relation))
    return conjunction(
        nonzero,
        disjunction(
            conjunction(constraint(denominator, Comparison.GT), constraint(lhs, relation)),
            conjunction(constraint(denominator, Comparison.LT), constraint(lhs, FLIPPED[relation])),
        ),
    )


def transform_rf_constraint(f, relation, rhs):
    """
    ``f relation rhs`` as polynomial constraints. ``rhs`` is a Fraction, a
    RationalFunction over the same parameters, or a polynomial of a larger
    ring (a state variable).
    """
    if isinstance(rhs, RationalFunction):
        difference = f - rhs
        return _scaled_relation(difference.denominator, difference.numerator, relation)
    if hasattr(rhs, "ring"):
        numerator = f.numerator.set_ring(rhs.ring)
        denominator = f.denominator.set_ring(rhs.ring)
        return _scaled_relation(denominator, numerator - rhs * denominator, relation)
    value = to_qq(rhs)
    return _scaled_relation(f.denominator, f.numerator - f.denominator.mul_ground(value), relation)


def region_formula(region, ring):
    names = parameter_names(ring)
    parts = []
    for name, lower, upper in region.intervals:
        gen = ring.gens[names.index(name)]
        parts.append(constraint(gen - to_qq(lower), Comparison.GE))
        parts.append(constraint(gen - to_qq(upper), Comparison.LE))
    return conjunction(*parts)


# encodings


@dataclass
class Encoding:
    """
    Formulas for one (model, specification) pair. ``accept`` is unsatisfiable
    together with ``common`` and the region iff the region is accepting,
    ``reject`` likewise for rejecting.
    """

    parameters: tuple
    state_variables: tuple
    common: object
    accept: object
    reject: object
    ring: object

    def region(self, region):
        return region_formula(region, self.ring)

    def query(self, region, accepting=True):
        return conjunction(self.region(region), self.common, self.accept if accepting else self.reject)

    def declarations(self):
        return self.parameters + self.state_variables


def _variable_names(parameters, prefix, keys):
    taken = set(parameters)
    while any(f"{prefix}_{key}" in taken for key in keys):
        prefix += "_"
    return [f"{prefix}_{key}" for key in keys]


class _Vars:
    def __init__(self, names, ring):
        self.names = names
        self.index = {name: position for position, name in enumerate(parameter_names(ring))}
        self.ring = ring

    def __getitem__(self, key):
        return self.ring.gens[self.index[self.names[key]]]


def _extended_ring(model, groups):
    variables = tuple(name for group in groups for name in group)
    return make_ring(model.parameters + variables), variables


def _lift(poly, ring):
    return poly.set_ring(ring)


def _bellman(choice, state_var, successor_var, ring, relation, reward=None):
    """``x_s relation reward + sum_t f_t x_t`` with the row multiplied through by its denominator."""
    functions = [f for _, f in choice.entries]
    if reward is not None:
        functions = functions + [reward]
    g = common_denominator(functions)
    lhs = _lift(g, ring) * state_var
    for successor, f in choice.entries:
        scaled = f.numerator * g.exquo(f.denominator)
        lhs = lhs - _lift(scaled, ring) * successor_var(successor)
    if reward is not None and not reward.is_zero:
        lhs = lhs - _lift(reward.numerator * g.exquo(reward.denominator), ring)
    return _scaled_relation(_lift(g, ring), lhs, relation)


def _threshold(variable, spec, negate):
    relation = {"<": Comparison.LT, "<=": Comparison.LE, ">": Comparison.GT, ">=": Comparison.GE}[
        (spec.negated() if negate else spec).relation
    ]
    return constraint(variable - to_qq(spec.threshold), relation)


def _reachable(model):
    from .elimination import forward_order

    return set(forward_order(model.successor_sets(), model.initial))


def encode_equation_system(model, spec, region=None):
    """
    Equation-system encoding of a pMC: one variable per state holding its
    probability (or expected reward, or step-indexed probability).
    """
    if model.is_pmdp:
        raise UnsupportedSpecification("use encode_pmdp for pmdps")
    targets = model.targets(spec.target)
    _, cannot = reach_states(model, targets)
    n = model.state_count

    if spec.measure == Measure.BOUNDED_REACH:
        steps = spec.step_bound
        keys = [f"{s}_{k}" for k in range(steps + 1) for s in range(n)]
        names = _variable_names(model.parameters, "x", keys)
        ring, variables = _extended_ring(model, [names])
        x = _Vars(names, ring)
        var = lambda s, k: x[k * n + s]  # noqa: E731
        parts = [constraint(var(s, 0) - (1 if s in targets else 0), Comparison.EQ) for s in range(n)]
        for k in range(1, steps + 1):
            for s in range(n):
                if s in targets:
                    parts.append(constraint(var(s, k) - 1, Comparison.EQ))
                elif s in cannot:
                    parts.append(constraint(var(s, k), Comparison.EQ))
                else:
                    parts.append(_bellman(model.states[s][0], var(s, k), lambda t, k=k: var(t, k - 1), ring, Comparison.EQ))
        initial = var(model.initial, steps)
    else:
        names = _variable_names(model.parameters, "x", range(n))
        ring, variables = _extended_ring(model, [names])
        x = _Vars(names, ring)
        parts = []
        if spec.with_rewards:
            reachable = _reachable(model)
            if reachable & cannot:
                raise RewardDiverges(f"states {sorted(reachable & cannot)} cannot reach the target")
        for s in range(n):
            if spec.with_rewards and (s in targets or s in cannot):
                parts.append(constraint(x[s], Comparison.EQ))
            elif s in targets:
                parts.append(constraint(x[s] - 1, Comparison.EQ))
            elif s in cannot:
                parts.append(constraint(x[s], Comparison.EQ))
            else:
                reward = model.states[s][0].reward if spec.with_rewards else None
                parts.append(_bellman(model.states[s][0], x[s], lambda t: x[t], ring, Comparison.EQ, reward))
        initial = x[model.initial]

    return Encoding(
        parameters=model.parameters,
        state_variables=variables,
        common=conjunction(*parts),
        accept=_threshold(initial, spec, negate=True),
        reject=_threshold(initial, spec, negate=False),
        ring=ring,
    )


def encode_solution_function(f, spec, region=None, parameters=None):
    ring = f.ring
    return Encoding(
        parameters=tuple(parameters or parameter_names(ring)),
        state_variables=(),
        common=TRUE,
        accept=transform_rf_constraint(f, _relation(spec.negated()), spec.threshold),
        reject=transform_rf_constraint(f, _relation(spec), spec.threshold),
        ring=ring,
    )


def _relation(spec):
    return {"<": Comparison.LT, "<=": Comparison.LE, ">": Comparison.GT, ">=": Comparison.GE}[spec.relation]


def _avoidable(model, targets):
    reached = set(targets)
    changed = True
    while changed:
        changed = False
        for s, choices in enumerate(model.states):
            if s not in reached and all(any(t in reached for t, _ in c.entries) for c in choices):
                reached.add(s)
                changed = True
    return set(range(model.state_count)) - reached


def _some_strategy_system(model, targets, cannot, x, ring):
    """Each state follows one of its actions: a disjunction of Bellman equalities."""
    parts = []
    for s, choices in enumerate(model.states):
        if s in targets:
            parts.append(constraint(x[s] - 1, Comparison.EQ))
        elif s in cannot:
            parts.append(constraint(x[s], Comparison.EQ))
        else:
            parts.append(disjunction(*(_bellman(c, x[s], lambda t: x[t], ring, Comparison.EQ) for c in choices)))
    return conjunction(*parts)


def _all_strategies_system(model, targets, cannot, y, ring, claim):
    """
    Certificate that every strategy satisfies ``claim``: ``y`` bounds the
    optimal value from the claim's side in every action.
    """
    parts = []
    if claim.is_upper_bound:
        zero = cannot
        relation = Comparison.GE
    else:
        zero = _avoidable(model, targets)
        relation = Comparison.LE
    for s, choices in enumerate(model.states):
        if s in targets:
            parts.append(constraint(y[s] - 1, Comparison.EQ))
        elif s in zero:
            parts.append(constraint(y[s], Comparison.EQ))
        else:
            parts.append(constraint(y[s], Comparison.GE))
            parts.append(constraint(y[s] - 1, Comparison.LE))
            parts.extend(_bellman(c, y[s], lambda t: y[t], ring, relation) for c in choices)
    return conjunction(*parts)


def encode_pmdp(model, spec, region=None, relation="demonic", form="es", cap=None):
    """
    Encodings of a pMDP. Demonic acceptance is refuted by some strategy
    violating the specification, angelic acceptance by every strategy violating
    it; rejection dually. ``form`` picks equation systems ("es") or solution
    functions of the enumerated strategies ("sf").
    """
    from .lifting import NondeterminismRelation

    relation = NondeterminismRelation(relation)
    if spec.measure != Measure.REACH:
        raise UnsupportedSpecification("pmdp encodings handle unbounded reachability only")
    targets = model.targets(spec.target)
    demonic = relation == NondeterminismRelation.DEMONIC

    if form == "sf":
        from .elimination import solution_function

        functions = []
        for strategy in strategies(model, cap=cap):
            f = solution_function(induced_chain(model, strategy), targets)
            if not any(semantically_equal(f, g) for g in functions):
                functions.append(f)
        violated = [transform_rf_constraint(f, _relation(spec.negated()), spec.threshold) for f in functions]
        satisfied = [transform_rf_constraint(f, _relation(spec), spec.threshold) for f in functions]
        return Encoding(
            parameters=model.parameters,
            state_variables=(),
            common=TRUE,
            accept=disjunction(*violated) if demonic else conjunction(*violated),
            reject=conjunction(*satisfied) if demonic else disjunction(*satisfied),
            ring=model.ring,
        )

    _, cannot = reach_states(model, targets)
    n = model.state_count
    x_names = _variable_names(model.parameters, "x", range(n))
    y_names = _variable_names(model.parameters + tuple(x_names), "y", range(n))
    ring, variables = _extended_ring(model, [x_names, y_names])
    x, y = _Vars(x_names, ring), _Vars(y_names, ring)
    some = _some_strategy_system(model, targets, cannot, x, ring)
    initial_x, initial_y = x[model.initial], y[model.initial]
    if demonic:
        accept = conjunction(some, _threshold(initial_x, spec, negate=True))
        reject = conjunction(
            _all_strategies_system(model, targets, cannot, y, ring, spec), _threshold(initial_y, spec, negate=False)
        )
    else:
        negated = spec.negated()
        accept = conjunction(
            _all_strategies_system(model, targets, cannot, y, ring, negated), _threshold(initial_y, negated, negate=False)
        )
        reject = conjunction(some, _threshold(initial_x, spec, negate=False))
    return Encoding(
        parameters=model.parameters,
        state_variables=variables,
        common=TRUE,
        accept=accept,
        reject=reject,
        ring=ring,
    )


def graph_preservation_predicate(model):
    one = RationalFunction.constant(model.ring, 1)
    parts = []
    for choices in model.states:
        for choice in choices:
            total = RationalFunction(model.ring.zero)
            for _, f in choice.entries:
                parts.append(transform_rf_constraint(f, Comparison.GT, 0))
                total = total + f
            if not semantically_equal(total, one):
                parts.append(transform_rf_constraint(total, Comparison.EQ, 1))
                parts.extend(transform_rf_constraint(f, Comparison.LE, 1) for _, f in choice.entries)
            if choice.reward is not None:
                parts.append(transform_rf_constraint(choice.reward, Comparison.GE, 0))
    return conjunction(*parts)


def encode_graph_preservation(model, region):
    """Satisfiable iff some point of ``region`` is not graph-preserving."""
    return conjunction(region_formula(region, model.ring), negation(graph_preservation_predicate(model)))


# solver process


def solver_available(command=None):
    argv = shlex.split(command or synthesis_setting("SMT_COMMAND", "z3 -in"))
    return bool(argv) and shutil.which(argv[0]) is not None


class SmtStatus(models.TextChoices):
    SAT = "sat", "Satisfiable"
    UNSAT = "unsat", "Unsatisfiable"
    UNKNOWN = "unknown", "Unknown or timed out"


@dataclass
class SmtResult:
    status: str
    model: dict = None
    detail: str = ""


class SolverSession:
    """
    One solver process speaking SMT-LIB 2 over pipes. Not thread-safe; use
    one session per worker.
    """

    def __init__(self, command=None, timeout=None):
        self.command = command or synthesis_setting("SMT_COMMAND", "z3 -in")
        self.timeout = timeout if timeout is not None else synthesis_setting("SMT_TIMEOUT", 10)
        self.process = None
        self.depth = 0
        self.declared = set()
        self.base = None
        self.calls = 0
        self.encodings = {}
        self._buffer = ""

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.close()

    def start(self):
        argv = shlex.split(self.command)
        try:
            self.process = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL
            )
        except OSError as exc:
            raise SolverSpawnFailure(f"cannot run {self.command!r}: {exc}") from exc
        self.depth = 0
        self.declared = set()
        self.base = None
        self._buffer = ""
        self.send("(set-option :produce-models true)")
        if os.path.basename(argv[0]).startswith("z3"):
            self.send(f"(set-option :timeout {int(self.timeout * 1000)})")
        self.send("(set-logic QF_NRA)")
        logger.debug("started solver %s", self.command)

    def close(self):
        if self.process is None:
            return
        try:
            self.send("(exit)")
            self.process.wait(timeout=1)
        except (OSError, subprocess.TimeoutExpired, SolverSpawnFailure):
            self.process.kill()
        self.process = None

    def send(self, text):
        if self.process is None:
            self.start()
        try:
            self.process.stdin.write((text + "\n").encode("utf-8"))
            self.process.stdin.flush()
        except OSError as exc:
            raise SolverSpawnFailure(f"solver pipe closed: {exc}") from exc

    def _read_line(self, deadline):
        fd = self.process.stdout.fileno()
        with selectors.DefaultSelector() as selector:
            selector.register(fd, selectors.EVENT_READ)
            while "\n" not in self._buffer:
                remaining = deadline - time.monotonic()
                if remaining <= 0 or not selector.select(remaining):
                    raise TimeoutError
                chunk = os.read(fd, 65536)
                if not chunk:
                    raise ProtocolParseError("solver closed its output")
                self._buffer += chunk.decode("utf-8")
        line, self._buffer = self._buffer.split("\n", 1)
        return line.strip()

    def read_response(self, timeout=None):
        deadline = time.monotonic() + (timeout if timeout is not None else self.timeout + 1)
        text = ""
        while True:
            line = self._read_line(deadline)
            if not line and not text:
                continue
            text = f"{text} {line}".strip()
            if text.count("(") <= text.count(")"):
                break
        if text.startswith("(error"):
            raise ProtocolParseError(f"solver error: {text}")
        return text

    def declare(self, names, sort="Real"):
        if self.process is None:
            self.start()
        for name in names:
            if name not in self.declared:
                self.send(f"(declare-const {name} {sort})")
                self.declared.add(name)

    def assert_formula(self, formula):
        self.send(f"(assert {formula.to_smtlib()})")

    def push(self):
        self.send("(push 1)")
        self.depth += 1

    def pop(self):
        self.send("(pop 1)")
        self.depth -= 1

    def check_sat(self):
        self.calls += 1
        self.send("(check-sat)")
        try:
            answer = self.read_response()
        except TimeoutError:
            logger.warning("solver timed out after %ss; restarting it", self.timeout)
            self.process.kill()
            self.process = None
            return SmtStatus.UNKNOWN
        if answer not in ("sat", "unsat", "unknown"):
            raise ProtocolParseError(f"unexpected check-sat answer {answer!r}")
        return SmtStatus(answer)

    def get_value(self, names):
        if not names:
            return {}
        self.send(f"(get-value ({' '.join(names)}))")
        try:
            answer = self.read_response()
        except TimeoutError as exc:
            raise ProtocolParseError("no answer to get-value") from exc
        pairs = parse_sexpr(answer)
        return {str(pair[0]): _smt_value(pair[1]) for pair in pairs}

    def reset(self):
        if self.process is None:
            self.start()
        else:
            while self.depth:
                self.pop()
            # declarations go with the assertions
            self.send("(reset-assertions)")
        self.declared = set()
        self.base = None

    def assert_base(self, encoding):
        """Assert the model part once, guarded by the ``accepting``/``rejecting`` selectors."""
        if self.base is encoding and self.process is not None:
            return
        self.reset()
        self.declare(encoding.declarations())
        self.declare(["accepting", "rejecting"], sort="Bool")
        self.assert_formula(encoding.common)
        self.assert_formula(implication(BoolVar("accepting"), encoding.accept))
        self.assert_formula(implication(BoolVar("rejecting"), encoding.reject))
        self.base = encoding


def _smt_value(node):
    if isinstance(node, str):
        try:
            return Fraction(node)
        except ValueError as exc:
            raise ProtocolParseError(f"cannot read value {node!r}") from exc
    head, *args = node
    values = [_smt_value(arg) for arg in args] if head not in ("root-obj", "_") else None
    if values is not None and any(v is None for v in values):
        return None
    if head == "/" and len(values) == 2:
        return values[0] / values[1]
    if head == "-" and len(values) == 1:
        return -values[0]
    if head == "-" and len(values) == 2:
        return values[0] - values[1]
    if head == "+":
        return sum(values, Fraction(0))
    if head in ("root-obj", "_"):
        return None
    raise ProtocolParseError(f"cannot read value {node!r}")


def session_check(session, base, queries, validate=None):
    """
    Check ``(selector, region formula)`` queries against ``base`` in one
    session. A sat answer whose model fails ``validate(point, selector)`` is
    reported as unknown; algebraic witnesses give sat without a model.
    """
    results = []
    if not queries:
        return results
    session.assert_base(base)
    for selector, formula in queries:
        session.push()
        session.assert_formula(formula)
        session.assert_formula(BoolVar(selector))
        status = session.check_sat()
        if session.process is None:
            results.append(SmtResult(SmtStatus.UNKNOWN, detail="timeout"))
            session.assert_base(base)
            continue
        result = SmtResult(status)
        if status == SmtStatus.SAT:
            values = session.get_value(list(base.parameters))
            if any(value is None for value in values.values()):
                logger.warning("solver returned an algebraic witness; no counterexample")
                result.detail = "algebraic witness"
            else:
                point = {name: values[name] for name in base.parameters}
                if validate is not None and not validate(point, selector):
                    logger.warning("solver model %s does not re-validate", point)
                    result = SmtResult(SmtStatus.UNKNOWN, detail="spurious model")
                else:
                    result.model = point
        session.pop()
        results.append(result)
        logger.debug("%s query: %s", selector, result.status)
    return results


# verification


class SmtForm(models.TextChoices):
    EQUATION_SYSTEM = "es", "Equation system"
    SOLUTION_FUNCTION = "sf", "Solution function"


def build_encoding(model, spec, form=SmtForm.EQUATION_SYSTEM, relation="demonic", cap=None):
    if model.is_pmdp:
        return encode_pmdp(model, spec, relation=relation, form=form, cap=cap)
    if form == SmtForm.SOLUTION_FUNCTION:
        from .elimination import synthesise

        return encode_solution_function(synthesise(model, spec), spec, parameters=model.parameters)
    return encode_equation_system(model, spec)


def require_graph_preserving(model, region, session):
    result = check_graph_preserving(model, region)
    if result.status == GraphStatus.PRESERVING:
        return
    if result.status == GraphStatus.NEEDS_SOLVER:
        # the query must not see a previous region's base
        session.reset()
        session.declare(model.parameters)
        session.push()
        session.assert_formula(result.formula)
        status = session.check_sat()
        if session.process is not None:
            session.pop()
        if status == SmtStatus.UNSAT:
            return
        if status == SmtStatus.UNKNOWN:
            raise RegionNotGraphPreserving(f"graph preservation of {region} is undecided")
        raise RegionNotGraphPreserving(f"region {region} is not graph-preserving")
    raise RegionNotGraphPreserving(
        f"region {region} is not graph-preserving, e.g. at " + ", ".join(f"{k}={v}" for k, v in result.witness.items())
    )


def verify_region_smt(model, region, spec, form=SmtForm.EQUATION_SYSTEM, relation="demonic",
                      hypothesis=None, session=None, encoding=None):
    """Complete verification of ``spec`` on ``region``; sat models are re-checked exactly."""
    from .lifting import Hypothesis, NondeterminismRelation, opposite

    relation = NondeterminismRelation(relation)
    owned = session is None
    session = session or SolverSession()
    try:
        require_graph_preserving(model, region, session)
        key = (model, spec, SmtForm(form), relation)
        if encoding is None:
            encoding = session.encodings.get(key)
        if encoding is None:
            encoding = session.encodings[key] = build_encoding(model, spec, form, relation)
        region_part = encoding.region(region)

        def validate(point, selector):
            if not region.contains(point):
                return False
            claim = spec if selector == "accepting" else spec.negated()
            mode = claim.direction
            if model.is_pmdp:
                angelic = relation == NondeterminismRelation.ANGELIC
                if selector == "rejecting":
                    angelic = not angelic
                mode = opposite(claim.direction) if angelic else claim.direction
            return not claim.holds(check_point(model, spec, point, mode=mode))

        order = ["accepting", "rejecting"]
        if hypothesis == Hypothesis.REJECT:
            order.reverse()
        verdict = RegionVerdict(status=RegionStatus.UNKNOWN, diagnostics={"engine": f"smt-{form}"})
        for selector in order:
            (result,) = session_check(session, encoding, [(selector, region_part)], validate)
            if result.status == SmtStatus.UNSAT:
                verdict.status = RegionStatus.ALL_SAT if selector == "accepting" else RegionStatus.ALL_VIOLATE
                break
            if selector == "accepting" and result.model is not None:
                verdict.counterexample = result.model
        verdict.diagnostics["solver_calls"] = session.calls
        return verdict
    finally:
        if owned:
            session.close()


def export_script(encoding, region, accepting=True, comment=None):
    lines = []
    if comment:
        lines.extend(f"; {line}" for line in comment.splitlines())
    lines.append("(set-option :produce-models true)")
    lines.append("(set-logic QF_NRA)")
    lines.extend(f"(declare-const {name} Real)" for name in encoding.declarations())
    lines.append(f"(assert {encoding.region(region).to_smtlib()})")
    for part in (encoding.common, encoding.accept if accepting else encoding.reject):
        if isinstance(part, And):
            lines.extend(f"(assert {inner.to_smtlib()})" for inner in part.parts)
        elif part != TRUE:
            lines.append(f"(assert {part.to_smtlib()})")
    lines.append("(check-sat)")
    if encoding.parameters:
        lines.append(f"(get-value ({' '.join(encoding.parameters)}))")
    lines.append("(exit)")
    return "\n".join(lines) + "\n"
