import json
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from lateral_vision.experiments.report import AccuracyReport, ReportException

FORMATS = ('text', 'csv', 'json')


class Command(BaseCommand):
    help = 'Renders the report of a finished run, or recounts it from the per image outcomes'

    def add_arguments(self, parser):
        parser.add_argument('directory', help='Output directory of a run')
        parser.add_argument('--recount', action='store_true', default=False,
                            help='Recount accuracies from `outcomes.json` and compare them with `report.json`')
        parser.add_argument('--format', choices=FORMATS, default='text')

    def load(self, path: Path):
        try:
            with open(path) as json_file:
                return json.load(json_file)
        except (OSError, json.JSONDecodeError) as exc:
            raise CommandError(f'Cannot read {path}: {exc}')

    def handle(self, *args, **options):
        directory = Path(options['directory'])
        try:
            stored = AccuracyReport.from_dict(self.load(directory / 'report.json'))
            report = AccuracyReport.from_outcomes(self.load(directory / 'outcomes.json')) \
                if options['recount'] else stored
        except ReportException as exc:
            raise CommandError(str(exc))

        if options['format'] == 'csv':
            self.stdout.write(report.to_csv(), ending='')
        elif options['format'] == 'json':
            self.stdout.write(json.dumps(report.to_dict(), indent=2, sort_keys=True))
        else:
            self.stdout.write(report.to_text(), ending='')

        if options['recount']:
            if report.to_dict() != stored.to_dict():
                raise CommandError(f'Recounted report differs from {directory / "report.json"}')
            self.stdout.write(self.style.SUCCESS('Recounted report matches the stored report'))
