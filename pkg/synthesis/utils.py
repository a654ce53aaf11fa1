# synthesis/utils.py
from fractions import Fraction

from django.conf import settings


def synthesis_setting(key, default=None):
    """Look up ``key`` in ``settings.PARAMSYNTH``; dotted keys descend into sub-dicts."""
    node = getattr(settings, 'PARAMSYNTH', {})
    for part in key.split('.'):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    return node


def as_fraction(value):
    """Exact conversion of ints, strings ("2/5", "0.4") and Fractions; floats are refused."""
    if isinstance(value, float):
        raise TypeError("floats are not accepted in the exact pipeline")
    return Fraction(value)


def format_fraction(value):
    if value is None:
        return "undefined"
    if isinstance(value, float):
        return "inf" if value > 0 else "-inf"
    return str(value)
