from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from lateral_vision.adversarial.attacks import PRESETS
from lateral_vision.adversarial.services import AttackService
from lateral_vision.classification.types import InputDomainError
from lateral_vision.experiments.management.commands._manifest import (add_manifest_arguments, fold_indexes,
                                                                      manifest_from_options)
from lateral_vision.experiments.services import ExperimentService
from lateral_vision.experiments.training import fold_directory


class Command(BaseCommand):
    help = 'Writes the adversarial test split of every fold, attacked with the holistic model of the fold'

    def add_arguments(self, parser):
        add_manifest_arguments(parser)
        parser.add_argument('--preset', action='append', choices=list(PRESETS),
                            help='Attack preset, can be repeated. Attacked conditions of the manifest by default')
        parser.add_argument('--fold', type=int, help='Attack only this fold')
        parser.add_argument('--models', help='Directory written by `train`, models are trained if not provided')
        parser.add_argument('--out', help='Splits directory, `EXPERIMENT_OUTPUT_DIR/<manifest name>/attacks` by '
                                          'default')

    def handle(self, *args, **options):
        manifest = manifest_from_options(options)
        presets = options['preset'] or [condition for condition in manifest.conditions if condition in PRESETS]
        if not presets:
            raise CommandError('Manifest has no attacked condition, use --preset')
        service = ExperimentService(settings.EXPERIMENT_OUTPUT_DIR)
        out = Path(options['out'] or service.output_dir / manifest.name / 'attacks')

        for fold in fold_indexes(manifest, options['fold']):
            try:
                data = service.fold_data(manifest, fold)
                if options['models']:
                    models = service.load_fold_models(manifest, fold_directory(options['models'], fold))
                else:
                    models = service.train_fold(manifest, fold, data)
                for preset in presets:
                    result = service.attack_fold(manifest, fold, models, preset, data)
                    manifest_path = AttackService().write_split(fold_directory(out, fold) / preset, result)
                    self.stdout.write(self.style.SUCCESS(
                        f'Fold {fold} {preset}: loss increased on {result.manifest["loss_increased"]}/'
                        f'{result.manifest["n_images"]} images, manifest on {manifest_path}'))
            except (InputDomainError, OSError) as exc:
                raise CommandError(str(exc))
