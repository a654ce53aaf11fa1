# synthesis/reports.py
"""Command results with a stable ``key=value`` rendering and a JSON one."""
import time
from dataclasses import dataclass, field
from fractions import Fraction

from rest_framework.renderers import JSONRenderer

from .ratfunc import RationalFunction
from .regions import Region
from .serializers import RunReportSerializer
from .utils import format_fraction


def render_value(value):
    """Text (or nested lists and dicts of text) for one result value."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None or isinstance(value, (Fraction, float)):
        return format_fraction(value)
    if isinstance(value, int):
        return value
    if isinstance(value, (RationalFunction, Region)):
        return str(value)
    if isinstance(value, dict):
        return {str(k): render_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [render_value(v) for v in value]
    return str(value)


def _flat(value):
    if isinstance(value, dict):
        return ", ".join(f"{k}={_flat(v)}" for k, v in value.items())
    if isinstance(value, list):
        return "; ".join(str(_flat(v)) for v in value)
    return value


@dataclass
class RunReport:
    command: str
    arguments: dict = field(default_factory=dict)
    result: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    exit_code: int = 0
    wall_time_ms: int = 0
    started: float = field(default_factory=time.monotonic, repr=False)

    def set(self, key, value):
        self.result[key] = render_value(value)

    def note(self, key, value):
        self.diagnostics[key] = render_value(value)

    def finish(self, exit_code=None):
        if exit_code is not None:
            self.exit_code = exit_code
        self.wall_time_ms = int((time.monotonic() - self.started) * 1000)
        return self

    def as_lines(self):
        lines = [f"command={self.command}"]
        lines.extend(f"{key}={_flat(value)}" for key, value in self.result.items())
        lines.extend(f"diagnostics.{key}={_flat(value)}" for key, value in self.diagnostics.items())
        lines.append(f"exit_code={self.exit_code}")
        lines.append(f"wall_time_ms={self.wall_time_ms}")
        return "\n".join(lines)

    def as_json(self):
        data = RunReportSerializer(self).data
        return JSONRenderer().render(data).decode("utf-8")

    def render(self, as_json=False):
        return self.as_json() if as_json else self.as_lines()
