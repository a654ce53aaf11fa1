# synthesis/exceptions.py
"""
Errors raised by the synthesis library.

Modelled on DRF's ``APIException``: every error has a ``default_detail`` and a
``default_code``, and additionally the process ``exit_code`` the management
commands use when the error reaches the command line.
"""


class SynthesisError(Exception):
    default_detail = "Synthesis failed."
    default_code = "error"
    exit_code = 2

    def __init__(self, detail=None, code=None):
        self.detail = detail if detail is not None else self.default_detail
        self.code = code if code is not None else self.default_code
        super().__init__(self.detail)

    def __str__(self):
        return str(self.detail)


class ParseError(SynthesisError):
    default_detail = "Malformed input."
    default_code = "parse_error"

    def __init__(self, detail=None, line=None, column=None, code=None):
        self.line = line
        self.column = column
        if line is not None and detail is not None:
            detail = f"line {line}, column {column}: {detail}"
        super().__init__(detail, code)


class DivisionByZeroFunction(SynthesisError, ZeroDivisionError):
    default_detail = "Division by the zero function."
    default_code = "division_by_zero"


class MissingParameter(SynthesisError, KeyError):
    default_detail = "The instantiation does not assign every parameter."
    default_code = "missing_parameter"


class NotWellDefined(SynthesisError):
    default_detail = "The instantiation does not induce a stochastic model."
    default_code = "not_well_defined"


class AbsorbingSelfLoop(SynthesisError):
    default_detail = "Cannot eliminate a self-loop with probability one."
    default_code = "absorbing_self_loop"


class RewardDiverges(SynthesisError):
    default_detail = "The target is not reached almost surely; the expected reward is infinite."
    default_code = "reward_diverges"


class NotLocallyMonotone(SynthesisError):
    default_detail = "The model is not locally monotone."
    default_code = "not_locally_monotone"


class RegionNotGraphPreserving(SynthesisError):
    default_detail = "The region is not graph-preserving."
    default_code = "region_not_graph_preserving"


class UnsupportedSpecification(SynthesisError):
    default_detail = "The specification is not supported by this engine."
    default_code = "unsupported_specification"


class StrategyCapExceeded(SynthesisError):
    default_detail = "Too many strategies to enumerate."
    default_code = "strategy_cap_exceeded"


class SolverSpawnFailure(SynthesisError):
    default_detail = "Could not start the SMT solver."
    default_code = "solver_spawn_failure"
    exit_code = 3


class ProtocolParseError(SynthesisError):
    default_detail = "Unexpected answer from the SMT solver."
    default_code = "protocol_parse_error"
    exit_code = 3


class NoMixedSamples(SynthesisError):
    default_detail = "Interpolation needs both accepting and rejecting samples."
    default_code = "no_mixed_samples"


class EngineUnavailable(SynthesisError):
    default_detail = "The verification engine is not available."
    default_code = "engine_unavailable"
    exit_code = 3


class DimensionUnsupported(SynthesisError):
    default_detail = "This export needs exactly two parameters."
    default_code = "dimension_unsupported"
