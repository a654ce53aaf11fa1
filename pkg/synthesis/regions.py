# synthesis/regions.py
"""Rectangular parameter regions and their graph-preservation check."""
import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction

from django.db import models

from .exceptions import ParseError
from .grammar import parse_region_tokens
from .ratfunc import RationalFunction, evaluate, evaluate_polynomial, is_multilinear, semantically_equal

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Region:
    """A closed box: one ``(name, lower, upper)`` interval per parameter, in parameter order."""

    intervals: tuple

    def __post_init__(self):
        for name, lower, upper in self.intervals:
            if lower > upper:
                raise ParseError(f"empty interval for {name}: {lower} > {upper}")

    @classmethod
    def from_bounds(cls, bounds):
        return cls(tuple((name, Fraction(lo), Fraction(hi)) for name, (lo, hi) in bounds.items()))

    @classmethod
    def parse(cls, text, parameters=None):
        intervals = parse_region_tokens(text.strip())
        by_name = {}
        for name, lower, upper in intervals:
            if name in by_name:
                raise ParseError(f"parameter {name!r} bounded twice", line=1, column=1)
            by_name[name] = (lower, upper)
        if parameters is not None:
            missing = [name for name in parameters if name not in by_name]
            unknown = [name for name in by_name if name not in parameters]
            if missing or unknown:
                raise ParseError(
                    f"region must bound exactly the parameters {', '.join(parameters)}", line=1, column=1
                )
            by_name = {name: by_name[name] for name in parameters}
        return cls.from_bounds(by_name)

    @classmethod
    def unit(cls, parameters):
        return cls(tuple((name, Fraction(0), Fraction(1)) for name in parameters))

    # accessors

    @property
    def names(self):
        return tuple(name for name, _, _ in self.intervals)

    @property
    def dimension(self):
        return len(self.intervals)

    def bounds(self, name):
        for candidate, lower, upper in self.intervals:
            if candidate == name:
                return lower, upper
        raise KeyError(name)

    def width(self, name):
        lower, upper = self.bounds(name)
        return upper - lower

    @property
    def size(self):
        result = Fraction(1)
        for _, lower, upper in self.intervals:
            result *= upper - lower
        return result

    def lower_corner(self):
        return {name: lower for name, lower, _ in self.intervals}

    def center(self):
        return {name: (lower + upper) / 2 for name, lower, upper in self.intervals}

    def contains(self, point):
        return all(lower <= point[name] <= upper for name, lower, upper in self.intervals)

    def vertices(self, names=None):
        """
        Corner points, lower bound before upper bound and the last parameter
        varying fastest. With ``names`` only those parameters vary and the others
        are omitted; degenerate intervals contribute one value.
        """
        chosen = [iv for iv in self.intervals if names is None or iv[0] in names]
        values = [[lower] if lower == upper else [lower, upper] for _, lower, upper in chosen]
        keys = [name for name, _, _ in chosen]
        return [dict(zip(keys, combo)) for combo in itertools.product(*values)]

    # algebra

    def widest_dimension(self):
        best = None
        for name, lower, upper in self.intervals:
            if best is None or upper - lower > best[1]:
                best = (name, upper - lower)
        return best[0]

    def split(self, dimension=None, point=None):
        """
        Split into boxes that tile the region. ``dimension`` halves one
        parameter, ``point`` cuts every parameter at the point's coordinate,
        neither halves every parameter. Zero-width children are never produced.
        """
        cuts = []
        for name, lower, upper in self.intervals:
            if point is not None:
                cut = Fraction(point[name])
            elif dimension is None or dimension == name:
                cut = (lower + upper) / 2
            else:
                cut = None
            if cut is None or not lower < cut < upper:
                cuts.append([(lower, upper)])
            else:
                cuts.append([(lower, cut), (cut, upper)])
        return [
            Region(tuple((name, lo, hi) for name, (lo, hi) in zip(self.names, combo)))
            for combo in itertools.product(*cuts)
        ]

    def intersect(self, other):
        intervals = []
        for name, lower, upper in self.intervals:
            other_lower, other_upper = other.bounds(name)
            lo, hi = max(lower, other_lower), min(upper, other_upper)
            if lo > hi:
                return None
            intervals.append((name, lo, hi))
        return Region(tuple(intervals))

    def restrict(self, name, lower, upper):
        return Region(tuple(
            (n, Fraction(lower), Fraction(upper)) if n == name else (n, lo, hi)
            for n, lo, hi in self.intervals
        ))

    def shrink_open(self, epsilon):
        epsilon = Fraction(epsilon)
        return Region(tuple((name, lower + epsilon, upper - epsilon) for name, lower, upper in self.intervals))

    def normalise(self, point, space=None):
        """Coordinates of ``point`` relative to ``space`` (default: this region), each in [0, 1]."""
        space = space or self
        result = []
        for name, lower, upper in space.intervals:
            width = upper - lower
            result.append((point[name] - lower) / width if width else Fraction(0))
        return result

    def __str__(self):
        return ", ".join(f"{lower}<={name}<={upper}" for name, lower, upper in self.intervals)


class RegionStatus(models.TextChoices):
    ALL_SAT = "AllSat", "Accepting"
    ALL_VIOLATE = "AllViolate", "Rejecting"
    UNKNOWN = "Unknown", "Unknown"


@dataclass
class RegionVerdict:
    status: str
    counterexample: dict = None
    lower: Fraction = None
    upper: Fraction = None
    bound: Fraction = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def decided(self):
        return self.status != RegionStatus.UNKNOWN


class GraphStatus(models.TextChoices):
    PRESERVING = "Preserving", "Graph-preserving"
    NOT_PRESERVING = "NotPreserving", "Not graph-preserving"
    NEEDS_SOLVER = "NeedsSolver", "Needs a solver"


@dataclass
class GraphPreservation:
    status: str
    witness: dict = None
    formula: object = None


def _full_point(region, partial):
    point = region.lower_corner()
    point.update(partial)
    return point


def _vertex_sign(poly, region, names):
    signs = set()
    for vertex in region.vertices(names):
        value = evaluate_polynomial(poly, vertex)
        signs.add((value > 0) - (value < 0))
    return signs.pop() if len(signs) == 1 and 0 not in signs else 0


def row_sum(choice):
    total = choice.entries[0][1]
    for _, function in choice.entries[1:]:
        total = total + function
    return total


def check_graph_preserving(model, region):
    """
    Decide whether every transition function of ``model`` stays strictly
    positive on ``region`` (and every reward non-negative).

    Multilinear functions in rows that sum to one are decided by their values
    at the vertices; anything else is handed to the solver as a formula.
    """
    one = RationalFunction.constant(model.ring, 1)
    rows_sum_to_one = all(
        semantically_equal(row_sum(choice), one) for choices in model.states for choice in choices
    )
    multilinear = all(is_multilinear(f) for _, _, _, f in model.functions()) and all(
        is_multilinear(choice.reward) for choices in model.states for choice in choices if choice.reward is not None
    )
    if not (rows_sum_to_one and multilinear):
        from .smt import encode_graph_preservation

        logger.debug("graph preservation of %s needs the solver", region)
        return GraphPreservation(GraphStatus.NEEDS_SOLVER, formula=encode_graph_preservation(model, region))

    for _, _, _, function in model.functions():
        names = function.parameters()
        for vertex in region.vertices(names):
            value = evaluate(function, vertex)
            if value is None or value <= 0:
                return GraphPreservation(GraphStatus.NOT_PRESERVING, witness=_full_point(region, vertex))
        if not (_vertex_sign(function.numerator, region, names) and _vertex_sign(function.denominator, region, names)):
            from .smt import encode_graph_preservation

            return GraphPreservation(GraphStatus.NEEDS_SOLVER, formula=encode_graph_preservation(model, region))

    for choices in model.states:
        for choice in choices:
            reward = choice.reward
            if reward is None:
                continue
            names = reward.parameters()
            for vertex in region.vertices(names):
                value = evaluate(reward, vertex)
                if value is None or value < 0:
                    return GraphPreservation(GraphStatus.NOT_PRESERVING, witness=_full_point(region, vertex))
            if not _vertex_sign(reward.denominator, region, names):
                from .smt import encode_graph_preservation

                return GraphPreservation(GraphStatus.NEEDS_SOLVER, formula=encode_graph_preservation(model, region))
    return GraphPreservation(GraphStatus.PRESERVING)
