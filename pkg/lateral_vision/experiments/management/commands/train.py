from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from lateral_vision.classification.types import InputDomainError
from lateral_vision.experiments.services import ExperimentService
from lateral_vision.experiments.training import fold_directory

from ._manifest import add_manifest_arguments, fold_indexes, manifest_from_options


class Command(BaseCommand):
    help = 'Trains the networks and forests of every fold and stores them on `<out>/fold-XX`'

    def add_arguments(self, parser):
        add_manifest_arguments(parser)
        parser.add_argument('--fold', type=int, help='Train only this fold')
        parser.add_argument('--out', help='Models directory, `EXPERIMENT_OUTPUT_DIR/<manifest name>/models` by default')

    def handle(self, *args, **options):
        manifest = manifest_from_options(options)
        service = ExperimentService(settings.EXPERIMENT_OUTPUT_DIR)
        out = Path(options['out'] or service.output_dir / manifest.name / 'models')
        for fold in fold_indexes(manifest, options['fold']):
            try:
                models = service.train_fold(manifest, fold)
            except InputDomainError as exc:
                raise CommandError(str(exc))
            directory = models.save(fold_directory(out, fold))
            accuracies = ', '.join(f'{part}={value:.3f}' for part, value in sorted(models.train_accuracy.items()))
            self.stdout.write(self.style.SUCCESS(f'Fold {fold} models stored on {directory}, train accuracy '
                                                 f'{accuracies}'))
