# synthesis/management/commands/solve_function.py
from synthesis.elimination import EliminationOrder, Engine, solution_vector, synthesise
from synthesis.management.base import ReportCommand
from synthesis.models import Measure
from synthesis.ratfunc import stats


class Command(ReportCommand):
    help = 'Compute the solution function of a parametric Markov chain.'

    def add_arguments(self, parser):
        self.add_model_arguments(parser)
        parser.add_argument('--order', choices=EliminationOrder.values, default=EliminationOrder.FORWARD)
        parser.add_argument('--engine', choices=Engine.values, default=Engine.STATE_ELIMINATION)
        parser.add_argument('--vector', action='store_true', help='Also print the value of every state.')
        super().add_arguments(parser)

    def run(self, report, **options):
        model, spec = self.load(options)
        function = synthesise(model, spec, options['order'], options['engine'])
        deg_num, deg_den, terms_num, terms_den = stats(function)
        report.set('model', model.name)
        report.set('spec', spec)
        report.set('function', function)
        report.set('degree_numerator', deg_num)
        report.set('degree_denominator', deg_den)
        report.set('terms_numerator', terms_num)
        report.set('terms_denominator', terms_den)
        if options['vector'] and spec.measure == Measure.REACH:
            vector = solution_vector(model, model.targets(spec.target))
            report.set('vector', {f"s{s}": f for s, f in enumerate(vector)})
        report.note('order', options['order'])
        report.note('engine', options['engine'])
        return 0
