# synthesis/verification.py
"""One entry point for region verification, whatever the engine."""
import logging

from django.db import models

from .exceptions import EngineUnavailable, UnsupportedSpecification
from .lifting import Hypothesis, NondeterminismRelation, check_region, opposite
from .models import check_point
from .smt import SmtForm, SolverSession, solver_available, verify_region_smt

logger = logging.getLogger(__name__)


class VerificationEngine(models.TextChoices):
    LIFTING = "lifting", "Parameter lifting"
    SMT_ES = "smt-es", "SMT, equation system"
    SMT_SF = "smt-sf", "SMT, solution function"
    SMT_DEMONIC = "smt-demonic", "SMT, all strategies"
    SMT_ANGELIC = "smt-angelic", "SMT, some strategy"


SMT_ENGINES = (
    VerificationEngine.SMT_ES,
    VerificationEngine.SMT_SF,
    VerificationEngine.SMT_DEMONIC,
    VerificationEngine.SMT_ANGELIC,
)


def sample_mode(model, spec, relation=NondeterminismRelation.DEMONIC):
    """Strategy direction under which a single point decides ``spec``."""
    if model.is_pmdp and relation == NondeterminismRelation.ANGELIC:
        return opposite(spec.direction)
    return spec.direction


def holds_at(model, spec, point, relation=NondeterminismRelation.DEMONIC):
    """``(satisfied, value)`` of ``spec`` at one instantiation."""
    value = check_point(model, spec, point, mode=sample_mode(model, spec, relation))
    return spec.holds(value), value


def verify_region(model, region, spec, engine=VerificationEngine.LIFTING,
                  relation=NondeterminismRelation.DEMONIC, hypothesis=None, session=None, command=None):
    """
    RegionVerdict for ``spec`` on ``region``. The SMT engines need a solver;
    ``session`` is reused when given.
    """
    engine = VerificationEngine(engine)
    if engine == VerificationEngine.LIFTING:
        return check_region(model, region, spec, relation=relation, hypothesis=hypothesis)

    if engine == VerificationEngine.SMT_DEMONIC:
        relation = NondeterminismRelation.DEMONIC
    elif engine == VerificationEngine.SMT_ANGELIC:
        relation = NondeterminismRelation.ANGELIC
    if engine in (VerificationEngine.SMT_DEMONIC, VerificationEngine.SMT_ANGELIC) and not model.is_pmdp:
        raise UnsupportedSpecification(f"engine {engine.value} needs a pmdp")
    if session is None and not solver_available(command):
        raise EngineUnavailable(f"engine {engine.value} needs an SMT solver on PATH")
    form = SmtForm.SOLUTION_FUNCTION if engine == VerificationEngine.SMT_SF else SmtForm.EQUATION_SYSTEM
    logger.debug("verifying %s with %s", region, engine.value)
    owned = session is None
    session = session or SolverSession(command)
    try:
        return verify_region_smt(
            model, region, spec, form=form, relation=relation,
            hypothesis=Hypothesis(hypothesis) if hypothesis else None, session=session,
        )
    finally:
        if owned:
            session.close()
