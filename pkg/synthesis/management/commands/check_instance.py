# synthesis/management/commands/check_instance.py
from synthesis.lifting import NondeterminismRelation
from synthesis.management.base import ReportCommand
from synthesis.models import check_concrete, instantiate, parse_point
from synthesis.solvers import Direction
from synthesis.verification import sample_mode


class Command(ReportCommand):
    help = 'Check a specification at one parameter instantiation.'

    def add_arguments(self, parser):
        self.add_model_arguments(parser)
        parser.add_argument('--point', required=True, help='e.g. "p=2/5, q=7/10".')
        parser.add_argument(
            '--mode', choices=Direction.values,
            help='Optimise a pmdp in this direction instead of checking all strategies.',
        )
        parser.add_argument('--relation', choices=NondeterminismRelation.values, default=NondeterminismRelation.DEMONIC)
        super().add_arguments(parser)

    def run(self, report, **options):
        model, spec = self.load(options)
        point = parse_point(options['point'], model)
        concrete = instantiate(model, point)
        mode = options['mode'] or sample_mode(model, spec, options['relation'])
        report.set('model', model.name)
        report.set('spec', spec)
        report.set('point', point)
        report.set('well_defined', concrete.well_defined)
        value = check_concrete(concrete, spec, mode)
        satisfied = spec.holds(value)
        report.set('value', value)
        report.set('satisfied', satisfied)
        if model.is_pmdp:
            report.note('mode', mode)
        return 0 if satisfied else 1
