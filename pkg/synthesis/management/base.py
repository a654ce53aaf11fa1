# synthesis/management/base.py
"""Shared plumbing of the synthesis management commands."""
import logging
import sys

from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from synthesis.exceptions import SynthesisError
from synthesis.models import Specification, load_model
from synthesis.reports import RunReport

logger = logging.getLogger(__name__)


class ReportCommand(BaseCommand):
    """
    Subclasses implement ``run(report, **options)`` and return the exit code.
    The report goes to stdout; errors become ``CommandError`` with the exit
    code of the underlying ``SynthesisError``.
    """

    exit_code = 0
    base_options = {
        'verbosity', 'settings', 'pythonpath', 'traceback', 'no_color', 'force_color', 'skip_checks', 'json',
        'stdout', 'stderr',
    }

    def add_arguments(self, parser):
        parser.add_argument('--json', action='store_true', help='Print the report as JSON.')

    def add_model_arguments(self, parser):
        parser.add_argument('model', help='Model file, or the name of a bundled model.')
        parser.add_argument('--spec', required=True, help='e.g. "P <= 2/5 reach target".')

    def load(self, options):
        model = load_model(options['model'])
        spec = Specification.parse(options['spec'])
        model.targets(spec.target)
        return model, spec

    def handle(self, *args, **options):
        report = RunReport(
            command=self.command_name(),
            arguments={
                key: str(value) for key, value in options.items()
                if key not in self.base_options and value is not None
            },
        )
        try:
            code = self.run(report, **options)
        except SynthesisError as exc:
            logger.debug("%s failed: %s", report.command, exc)
            raise CommandError(str(exc), returncode=exc.exit_code) from exc
        except serializers.ValidationError as exc:
            raise CommandError(f"invalid options: {exc.detail}", returncode=2) from exc
        report.finish(code)
        self.exit_code = report.exit_code
        self.report = report
        self.write_output(report, options)

    def write_output(self, report, options):
        self.stdout.write(report.render(as_json=options['json']))

    def command_name(self):
        return self.__module__.rsplit('.', 1)[-1]

    def run_from_argv(self, argv):
        super().run_from_argv(argv)
        if self.exit_code:
            sys.exit(self.exit_code)

    def run(self, report, **options):
        raise NotImplementedError
