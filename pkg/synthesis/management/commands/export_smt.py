# synthesis/management/commands/export_smt.py
from pathlib import Path

from synthesis.lifting import NondeterminismRelation
from synthesis.management.base import ReportCommand
from synthesis.regions import Region
from synthesis.smt import SmtForm, build_encoding, export_script


class Command(ReportCommand):
    help = 'Write the SMT-LIB script that verifies a specification on a region.'

    def add_arguments(self, parser):
        self.add_model_arguments(parser)
        parser.add_argument('--region', required=True)
        parser.add_argument('--form', choices=SmtForm.values, default=SmtForm.EQUATION_SYSTEM)
        parser.add_argument('--relation', choices=NondeterminismRelation.values, default=NondeterminismRelation.DEMONIC)
        parser.add_argument('--reject', action='store_true', help='Encode the rejecting query instead.')
        parser.add_argument('--output', help='Write the script here instead of stdout.')
        super().add_arguments(parser)

    def run(self, report, **options):
        model, spec = self.load(options)
        region = Region.parse(options['region'], model.parameters)
        encoding = build_encoding(model, spec, options['form'], options['relation'])
        script = export_script(
            encoding, region, accepting=not options['reject'],
            comment=f"{model.name}: {spec} on {region}",
        )
        report.set('model', model.name)
        report.set('spec', spec)
        report.set('region', region)
        if options['output']:
            self.script = None
            Path(options['output']).write_text(script, encoding='utf-8')
            report.set('output', options['output'])
        else:
            self.script = script
        report.set('variables', len(encoding.declarations()))
        return 0

    def write_output(self, report, options):
        if self.script is not None:
            # the script owns stdout
            self.stdout.write(self.script, ending='')
            self.stderr.write(report.render(as_json=options['json']))
        else:
            super().write_output(report, options)
