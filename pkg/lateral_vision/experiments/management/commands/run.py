from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from lateral_vision.classification.types import InputDomainError
from lateral_vision.experiments.services import ExperimentService

from ._manifest import add_manifest_arguments, manifest_from_options


class Command(BaseCommand):
    help = 'Runs the cross-validation experiment of a manifest. Trains every fold, attacks its test split and ' \
           'evaluates the holistic baseline and the lateralized system on every condition'

    def add_arguments(self, parser):
        add_manifest_arguments(parser)
        parser.add_argument('--jobs', type=int, default=settings.EXPERIMENT_JOBS, help='Folds run at the same time')
        parser.add_argument('--out', help='Output directory, `EXPERIMENT_OUTPUT_DIR/<manifest name>` by default')
        parser.add_argument('--acceptance', action='store_true', default=False,
                            help='Check the robustness, parity, ordering and inhibit criteria, fail if any fails')

    def handle(self, *args, **options):
        manifest = manifest_from_options(options)
        if options['jobs'] < 1:
            raise CommandError(f'Not valid jobs={options["jobs"]}')
        service = ExperimentService(settings.EXPERIMENT_OUTPUT_DIR, jobs=options['jobs'])
        try:
            result = service.run_experiment(manifest)
        except InputDomainError as exc:
            raise CommandError(str(exc))
        directory = service.write_outputs(result, options['out'])

        self.stdout.write(result.report.to_text())
        self.stdout.write(self.style.SUCCESS(f'Run {manifest.name} written to {directory}'))
        if options['acceptance']:
            for check in result.acceptance:
                style = self.style.SUCCESS if check.passed else self.style.ERROR
                self.stdout.write(style(f'{"PASS" if check.passed else "FAIL"} {check.name}: {check.detail}'))
            if not result.passed:
                failed = [check.name for check in result.acceptance if not check.passed]
                raise CommandError(f'Acceptance checks failed: {", ".join(failed)}')
