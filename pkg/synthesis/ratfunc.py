# synthesis/ratfunc.py
"""
Exact rational functions over the parameters of a model.

Polynomials are sympy's sparse ``PolyElement`` over ``QQ`` in a ring with graded
lexicographic order, one ring per parameter list; the parameter id is the
generator position. A ``RationalFunction`` is a numerator/denominator pair of
such polynomials. Common factors are cancelled only on division (and therefore
on self-loop elimination, which divides); sums and products are left as they
come out.
"""
from fractions import Fraction
from functools import lru_cache

from sympy.polys.domains import QQ
from sympy.polys.orderings import grlex
from sympy.polys.rings import PolyRing

from .exceptions import DivisionByZeroFunction, MissingParameter


def make_ring(parameters):
    if not parameters:
        raise ValueError("a parametric ring needs at least one parameter")
    return PolyRing(tuple(parameters), QQ, grlex)


@lru_cache(maxsize=None)
def parameter_names(ring):
    return tuple(str(symbol) for symbol in ring.symbols)


def to_qq(value):
    value = Fraction(value)
    return QQ(value.numerator, value.denominator)


def to_fraction(coefficient):
    return Fraction(int(coefficient.numerator), int(coefficient.denominator))


def occurring_parameters(poly):
    names = parameter_names(poly.ring)
    used = set()
    for monom in poly.itermonoms():
        used.update(i for i, exponent in enumerate(monom) if exponent)
    return frozenset(names[i] for i in used)


def evaluate_polynomial(poly, values):
    names = parameter_names(poly.ring)
    point = [values.get(name) for name in names]
    total = Fraction(0)
    for monom, coefficient in poly.items():
        term = to_fraction(coefficient)
        for i, exponent in enumerate(monom):
            if not exponent:
                continue
            if point[i] is None:
                raise MissingParameter(f"no value for parameter {names[i]!r}")
            term *= Fraction(point[i]) ** exponent
        total += term
    return total


def total_degree(poly):
    return max((sum(monom) for monom in poly.itermonoms()), default=0)


def is_multilinear_polynomial(poly):
    return all(exponent <= 1 for monom in poly.itermonoms() for exponent in monom)


def format_polynomial(poly):
    """Canonical expanded text, leading (graded-lex largest) term first."""
    if not poly:
        return "0"
    names = parameter_names(poly.ring)
    pieces = []
    for monom, coefficient in poly.terms():
        coefficient = to_fraction(coefficient)
        factors = "*".join(
            name if exponent == 1 else f"{name}**{exponent}"
            for name, exponent in zip(names, monom) if exponent
        )
        magnitude = abs(coefficient)
        if not factors:
            text = str(magnitude)
        elif magnitude == 1:
            text = factors
        else:
            text = f"{magnitude}*{factors}"
        if not pieces:
            pieces.append(f"-{text}" if coefficient < 0 else text)
        else:
            pieces.append(f"- {text}" if coefficient < 0 else f"+ {text}")
    return " ".join(pieces)


class RationalFunction:
    """
    Immutable quotient of two polynomials of the same ring.

    The denominator is never zero and has a positive leading coefficient; a
    constant denominator is folded into the numerator, so polynomials are
    stored with denominator one.
    """

    __slots__ = ("numerator", "denominator")

    def __init__(self, numerator, denominator=None):
        ring = numerator.ring
        if denominator is None:
            denominator = ring.one
        if not denominator:
            raise DivisionByZeroFunction()
        if not numerator:
            denominator = ring.one
        elif denominator.is_ground:
            numerator = numerator.quo_ground(denominator.LC)
            denominator = ring.one
        elif denominator.LC < 0:
            numerator, denominator = -numerator, -denominator
        self.numerator = numerator
        self.denominator = denominator

    # construction

    @classmethod
    def constant(cls, ring, value):
        return cls(ring.ground_new(to_qq(value)))

    @classmethod
    def parameter(cls, ring, name):
        return cls(ring.gens[parameter_names(ring).index(name)])

    @classmethod
    def parse(cls, text, ring):
        from .grammar import parse_expression

        return parse_expression(text, ring)

    @property
    def ring(self):
        return self.numerator.ring

    # predicates

    @property
    def is_zero(self):
        return not self.numerator

    @property
    def is_one(self):
        return self.denominator == self.ring.one and self.numerator == self.ring.one

    @property
    def is_constant(self):
        return self.numerator.is_ground and self.denominator.is_ground

    @property
    def is_polynomial(self):
        return self.denominator == self.ring.one

    def constant_value(self):
        if not self.is_constant:
            raise ValueError(f"{self} is not constant")
        if self.is_zero:
            return Fraction(0)
        return to_fraction(self.numerator.LC) / to_fraction(self.denominator.LC)

    def parameters(self):
        return occurring_parameters(self.numerator) | occurring_parameters(self.denominator)

    # arithmetic

    def _coerce(self, other):
        if isinstance(other, RationalFunction):
            return other
        if isinstance(other, (int, Fraction)):
            return RationalFunction.constant(self.ring, other)
        if getattr(other, "ring", None) == self.ring:
            return RationalFunction(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        one = self.ring.one
        if self.denominator == other.denominator:
            return RationalFunction(self.numerator + other.numerator, self.denominator)
        if self.denominator == one:
            return RationalFunction(self.numerator * other.denominator + other.numerator, other.denominator)
        if other.denominator == one:
            return RationalFunction(self.numerator + other.numerator * self.denominator, self.denominator)
        return RationalFunction(
            self.numerator * other.denominator + other.numerator * self.denominator,
            self.denominator * other.denominator,
        )

    __radd__ = __add__

    def __neg__(self):
        return RationalFunction(-self.numerator, self.denominator)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if self.is_zero or other.is_zero:
            return RationalFunction(self.ring.zero)
        return RationalFunction(self.numerator * other.numerator, self.denominator * other.denominator)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if other.is_zero:
            raise DivisionByZeroFunction(f"division of {self} by zero")
        return RationalFunction(
            self.numerator * other.denominator, self.denominator * other.numerator
        ).cancel()

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, exponent):
        if not isinstance(exponent, int):
            return NotImplemented
        if exponent < 0:
            return RationalFunction.constant(self.ring, 1) / self ** (-exponent)
        return RationalFunction(self.numerator ** exponent, self.denominator ** exponent)

    def cancel(self):
        """Divide out the gcd of numerator and denominator; the result has a monic denominator."""
        if self.denominator == self.ring.one or self.is_zero:
            return self
        _, numerator, denominator = self.numerator.cofactors(self.denominator)
        lc = denominator.LC
        return RationalFunction(numerator.quo_ground(lc), denominator.quo_ground(lc))

    # comparison

    def __eq__(self, other):
        """Structural equality of the stored form; see ``semantically_equal``."""
        if not isinstance(other, RationalFunction):
            other = self._coerce(other) if isinstance(other, (int, Fraction)) else None
            if other is None:
                return NotImplemented
        return self.numerator == other.numerator and self.denominator == other.denominator

    def __hash__(self):
        return hash((self.numerator, self.denominator))

    # evaluation and statistics

    def evaluate(self, values):
        return evaluate(self, values)

    def stats(self):
        return stats(self)

    def __str__(self):
        if self.denominator == self.ring.one:
            return format_polynomial(self.numerator)
        return f"({format_polynomial(self.numerator)})/({format_polynomial(self.denominator)})"

    def __repr__(self):
        return f"RationalFunction({self})"


def evaluate(f, values):
    """
    Exact value of ``f`` at the instantiation ``values`` (name -> Fraction).

    Returns ``None`` when the denominator vanishes. Raises ``MissingParameter``
    when a parameter occurring in ``f`` has no value.
    """
    denominator = evaluate_polynomial(f.denominator, values)
    numerator = evaluate_polynomial(f.numerator, values)
    if denominator == 0:
        return None
    return numerator / denominator


def semantically_equal(a, b):
    return not (a.numerator * b.denominator - b.numerator * a.denominator)


def stats(f):
    """(degree of numerator, degree of denominator, terms in numerator, terms in denominator)."""
    return (
        total_degree(f.numerator),
        total_degree(f.denominator),
        len(f.numerator),
        len(f.denominator),
    )


def is_multilinear(f):
    return is_multilinear_polynomial(f.numerator) and is_multilinear_polynomial(f.denominator)


def is_locally_monotone_form(f):
    return is_multilinear(f)


def common_denominator(functions):
    functions = list(functions)
    if not functions:
        raise ValueError("no functions")
    result = functions[0].denominator
    for f in functions[1:]:
        if f.denominator != result:
            result = result.lcm(f.denominator)
    return result


def row_is_locally_monotone(functions):
    """
    True when the functions share a multilinear denominator g and every
    ``f * g`` is a multilinear polynomial.
    """
    functions = [f for f in functions if not f.is_zero]
    if not functions:
        return True
    g = common_denominator(functions)
    if not is_multilinear_polynomial(g):
        return False
    return all(
        is_multilinear_polynomial(f.numerator * g.exquo(f.denominator)) for f in functions
    )
