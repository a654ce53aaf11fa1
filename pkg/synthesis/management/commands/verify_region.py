# synthesis/management/commands/verify_region.py
from synthesis.lifting import Hypothesis, NondeterminismRelation
from synthesis.management.base import ReportCommand
from synthesis.regions import Region, RegionStatus
from synthesis.verification import VerificationEngine, verify_region

EXIT_CODES = {
    RegionStatus.ALL_SAT: 0,
    RegionStatus.ALL_VIOLATE: 1,
    RegionStatus.UNKNOWN: 3,
}


class Command(ReportCommand):
    help = 'Decide whether a specification holds on a whole parameter region.'

    def add_arguments(self, parser):
        self.add_model_arguments(parser)
        parser.add_argument('--region', required=True, help='e.g. "1/10<=p<=4/5, 2/5<=q<=7/10".')
        parser.add_argument('--engine', choices=VerificationEngine.values, default=VerificationEngine.LIFTING)
        parser.add_argument('--relation', choices=NondeterminismRelation.values, default=NondeterminismRelation.DEMONIC)
        parser.add_argument('--hypothesis', choices=Hypothesis.values)
        parser.add_argument('--smt-cmd', dest='smt_command', help='Solver command line, e.g. "z3 -in".')
        super().add_arguments(parser)

    def run(self, report, **options):
        model, spec = self.load(options)
        region = Region.parse(options['region'], model.parameters)
        verdict = verify_region(
            model, region, spec, options['engine'],
            relation=options['relation'], hypothesis=options['hypothesis'], command=options['smt_command'],
        )
        report.set('model', model.name)
        report.set('spec', spec)
        report.set('region', region)
        report.set('status', verdict.status)
        if verdict.bound is not None:
            report.set('bound', verdict.bound)
        if verdict.lower is not None:
            report.set('lower', verdict.lower)
        if verdict.upper is not None:
            report.set('upper', verdict.upper)
        if verdict.counterexample is not None:
            report.set('counterexample', verdict.counterexample)
        for key, value in verdict.diagnostics.items():
            report.note(key, value)
        return EXIT_CODES[verdict.status]
