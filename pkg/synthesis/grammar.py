# synthesis/grammar.py
"""
Text grammars: arithmetic expressions, model files, specifications, regions and
solver s-expressions, all built with pyparsing.

Expressions are parsed into a small tree first and only then turned into
rational functions, so one compiled grammar serves every parameter ring.
"""
from fractions import Fraction

import pyparsing as pp

from .exceptions import DivisionByZeroFunction, ParseError, ProtocolParseError

pp.ParserElement.enable_packrat()


class Name(str):
    loc = 0


def _name_action(s, loc, toks):
    name = Name(toks[0])
    name.loc = loc
    return name


IDENT = pp.Word(pp.alphas + "_", pp.alphanums + "_").set_name("identifier")
INTEGER = pp.Word(pp.nums).set_name("integer").set_parse_action(lambda t: int(t[0]))
NUMBER = (
    pp.Regex(r"(\d+\.\d*|\.\d+|\d+)([eE][-+]?\d+)?")
    .set_name("number")
    .set_parse_action(lambda t: Fraction(t[0]))
)

EXPRESSION = pp.infix_notation(
    NUMBER | IDENT.copy().set_parse_action(_name_action),
    [
        (pp.Regex(r"\*\*|\^"), 2, pp.OpAssoc.RIGHT),
        (pp.Literal("-"), 1, pp.OpAssoc.RIGHT),
        (pp.Regex(r"\*(?!\*)|/"), 2, pp.OpAssoc.LEFT),
        (pp.one_of("+ -"), 2, pp.OpAssoc.LEFT),
    ],
).set_name("expression")

RELATION = pp.one_of("<= >= < > ≤ ≥").set_name("relation")


def _raise_parse_error(exc, line=None):
    raise ParseError(exc.msg, line=line if line is not None else exc.lineno, column=exc.col) from exc


def parse_tree(text, line=None):
    try:
        return EXPRESSION.parse_string(text, parse_all=True)[0]
    except pp.ParseBaseException as exc:
        _raise_parse_error(exc, line)


def fold_tree(node, leaf, line=None):
    """
    Evaluate an expression tree bottom-up. ``leaf`` maps a Fraction or a
    ``Name`` to a value supporting the field operations and ``**`` by int.
    """
    if isinstance(node, (Fraction, Name)):
        return leaf(node)
    items = list(node)
    if not isinstance(items[0], Name) and isinstance(items[0], str):
        # unary minus, possibly repeated
        value = fold_tree(items[-1], leaf, line)
        for _ in items[:-1]:
            value = -value
        return value
    operands = [fold_tree(item, leaf, line) for item in items[0::2]]
    operators = items[1::2]
    if operators[0] in ("^", "**"):
        value = operands[-1]
        for base in reversed(operands[:-1]):
            value = _power(base, value, line)
        return value
    value = operands[0]
    for operator, operand in zip(operators, operands[1:]):
        if operator == "+":
            value = value + operand
        elif operator == "-":
            value = value - operand
        elif operator == "*":
            value = value * operand
        else:
            try:
                value = value / operand
            except ZeroDivisionError as exc:
                raise DivisionByZeroFunction(
                    f"line {line}: division by zero" if line else "division by zero"
                ) from exc
    return value


def _power(base, exponent, line):
    if getattr(exponent, "is_constant", False):
        exponent = exponent.constant_value()
    if not isinstance(exponent, Fraction) or exponent.denominator != 1:
        raise ParseError("exponent must be an integer constant", line=line or 1, column=1)
    return base ** int(exponent)


def _constant_leaf(line):
    def leaf(node):
        if isinstance(node, Name):
            raise ParseError(f"unexpected identifier {str(node)!r}", line=line or 1, column=node.loc + 1)
        return node

    return leaf


def parse_constant(text, line=None):
    return fold_tree(parse_tree(text, line), _constant_leaf(line), line)


def expression_to_function(tree, ring, line=None):
    from .ratfunc import RationalFunction, parameter_names

    names = parameter_names(ring)

    def leaf(node):
        if isinstance(node, Name):
            if node not in names:
                raise ParseError(f"unknown parameter {str(node)!r}", line=line or 1, column=node.loc + 1)
            return RationalFunction.parameter(ring, node)
        return RationalFunction.constant(ring, node)

    return fold_tree(tree, leaf, line)


def parse_expression(text, ring, line=None):
    return expression_to_function(parse_tree(text, line), ring, line)


# model files

HEADER_LINE = (
    pp.one_of("pmc pmdp", as_keyword=True)
    | (pp.Keyword("parameters") + pp.Group(pp.OneOrMore(IDENT)))
    | (pp.Keyword("states") + INTEGER + pp.Keyword("init") + INTEGER)
    | (pp.Keyword("label") + IDENT + pp.Group(pp.ZeroOrMore(INTEGER)))
)
PMC_TRANSITION = pp.Keyword("transition") + INTEGER + INTEGER + EXPRESSION
PMDP_TRANSITION = pp.Keyword("transition") + INTEGER + IDENT + INTEGER + EXPRESSION
STATE_REWARD = pp.Keyword("reward") + INTEGER + EXPRESSION
ACTION_REWARD = pp.Keyword("reward") + INTEGER + IDENT + EXPRESSION


def _parse_line(grammar, content, number):
    try:
        return grammar.parse_string(content, parse_all=True)
    except pp.ParseBaseException as exc:
        _raise_parse_error(exc, line=number)


def model_lines(text):
    """
    Yield ``(line_number, tokens)`` for every non-blank line of a model file;
    ``#`` starts a comment and ``tokens[0]`` is the line's keyword.

    Transition and reward lines are read according to the model kind declared
    earlier in the file. In a pmdp a reward line names an action unless its
    first word is a parameter; the expression is always the last token.
    """
    kind = None
    parameters = ()
    for number, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0]
        if not content.strip():
            continue
        keyword = content.split()[0]
        if keyword == "transition":
            if kind is None:
                raise ParseError("transition before the model kind", line=number, column=1)
            tokens = _parse_line(PMDP_TRANSITION if kind == "pmdp" else PMC_TRANSITION, content, number)
        elif keyword == "reward":
            tokens = None
            if kind == "pmdp":
                try:
                    tokens = ACTION_REWARD.parse_string(content, parse_all=True)
                except pp.ParseBaseException:
                    tokens = None
                if tokens is not None and tokens[2] in parameters:
                    tokens = None
            if tokens is None:
                tokens = _parse_line(STATE_REWARD, content, number)
        else:
            tokens = _parse_line(HEADER_LINE, content, number)
            if tokens[0] in ("pmc", "pmdp"):
                kind = tokens[0]
            elif tokens[0] == "parameters":
                parameters = tuple(tokens[1])
        yield number, tokens


# specifications and regions

SPECIFICATION = (
    pp.one_of("P E")
    + RELATION
    + EXPRESSION
    + pp.Opt(pp.Keyword("within") + INTEGER)
    + pp.Keyword("reach")
    + IDENT
)

INTERVAL = pp.Group(EXPRESSION + pp.Literal("<=") + IDENT + pp.Literal("<=") + EXPRESSION)
REGION = pp.DelimitedList(INTERVAL, delim=",")


ASSIGNMENT = pp.Group(IDENT + pp.Literal("=") + EXPRESSION)
POINT = pp.DelimitedList(ASSIGNMENT, delim=",")


def parse_point_tokens(text):
    try:
        tokens = POINT.parse_string(text, parse_all=True)
    except pp.ParseBaseException as exc:
        _raise_parse_error(exc)
    leaf = _constant_leaf(1)
    return [(str(group[0]), fold_tree(group[2], leaf)) for group in tokens]


def parse_specification_tokens(text):
    """``(measure, relation, threshold, step_bound or None, target)``."""
    try:
        tokens = SPECIFICATION.parse_string(text, parse_all=True)
    except pp.ParseBaseException as exc:
        _raise_parse_error(exc)
    threshold = fold_tree(tokens[2], _constant_leaf(1))
    bound = tokens[4] if tokens[3] == "within" else None
    return tokens[0], tokens[1], threshold, bound, tokens[-1]


def parse_region_tokens(text):
    try:
        tokens = REGION.parse_string(text, parse_all=True)
    except pp.ParseBaseException as exc:
        _raise_parse_error(exc)
    leaf = _constant_leaf(1)
    return [(str(group[2]), fold_tree(group[0], leaf), fold_tree(group[4], leaf)) for group in tokens]


# solver answers

SEXPR = pp.nested_expr("(", ")")


def parse_sexpr(text):
    try:
        return SEXPR.parse_string(text, parse_all=True).as_list()[0]
    except pp.ParseBaseException as exc:
        raise ProtocolParseError(f"cannot read solver answer {text!r}: {exc.msg}") from exc
