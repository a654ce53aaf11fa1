# synthesis/management/commands/partition.py
from pathlib import Path

from synthesis.management.base import ReportCommand
from synthesis.lifting import NondeterminismRelation
from synthesis.partition import PARTITION_ENGINES, ExportFormat, Splitter, export_partition, refine
from synthesis.regions import Region
from synthesis.serializers import PartitionConfigSerializer
from synthesis.utils import synthesis_setting


class Command(ReportCommand):
    help = 'Partition a parameter space into accepting and rejecting regions.'

    def add_arguments(self, parser):
        self.add_model_arguments(parser)
        parser.add_argument('--space', help='Parameter space; default: the open unit box shrunk by REGION_EPSILON.')
        parser.add_argument('--coverage')
        parser.add_argument('--grid', type=int)
        parser.add_argument('--engine', choices=[e.value for e in PARTITION_ENGINES])
        parser.add_argument('--splitter', choices=Splitter.values)
        parser.add_argument('--workers', type=int)
        parser.add_argument('--budget', type=float, dest='budget_seconds')
        parser.add_argument('--max-iterations', type=int)
        parser.add_argument('--relation', choices=NondeterminismRelation.values)
        parser.add_argument('--smt-cmd', dest='smt_command')
        parser.add_argument('--csv', help='Write the partition as CSV to this file.')
        parser.add_argument('--svg', help='Write the partition as SVG to this file (two parameters only).')
        super().add_arguments(parser)

    def run(self, report, **options):
        model, spec = self.load(options)
        if options['space']:
            space = Region.parse(options['space'], model.parameters)
        else:
            space = Region.unit(model.parameters).shrink_open(synthesis_setting('REGION_EPSILON', '1/100'))

        fields = PartitionConfigSerializer().fields
        serializer = PartitionConfigSerializer(
            data={key: options[key] for key in fields if options.get(key) is not None}
        )
        serializer.is_valid(raise_exception=True)
        config = serializer.save()

        state = refine(model, spec, space, config)
        for fmt, target in ((ExportFormat.CSV, options['csv']), (ExportFormat.SVG, options['svg'])):
            if target:
                Path(target).write_text(export_partition(state, fmt), encoding='utf-8')

        report.set('model', model.name)
        report.set('spec', spec)
        report.set('space', space)
        report.set('coverage', state.coverage)
        report.set('accepted', len(state.accepted))
        report.set('rejected', len(state.rejected))
        report.set('undecided', len(state.undecided))
        report.set('queued', len(state.queue))
        report.set('samples', len(state.samples))
        report.set('budget_exhausted', state.budget_exhausted)
        report.note('iterations', state.iterations)
        report.note('verifications', state.verifications)
        report.note('engine', config.engine)
        report.note('splitter', config.splitter)
        return 0 if state.coverage >= config.coverage else 3
