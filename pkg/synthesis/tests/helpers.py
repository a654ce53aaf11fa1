from fractions import Fraction

from synthesis.models import ParametricModel, load_model


def F(text):
    return Fraction(text)


def corpus(name):
    return load_model(name)


def pmc(body, parameters="p q"):
    """A pmc from its state, label and transition lines."""
    return ParametricModel.parse(f"pmc\nparameters {parameters}\n{body}", name="inline")
