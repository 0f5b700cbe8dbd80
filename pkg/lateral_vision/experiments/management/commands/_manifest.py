import json
from dataclasses import replace

from django.core.management.base import CommandError

from lateral_vision.experiments.serializers import ManifestException, load_manifest
from lateral_vision.experiments.types import RunManifest


def add_manifest_arguments(parser):
    parser.add_argument('--manifest', help='JSON run manifest, every field takes its default if not provided')
    parser.add_argument('--seed', type=int, help='Overrides the seed of the manifest')
    parser.add_argument('--max-folds', type=int, help='Overrides the folds evaluated of the manifest')


def manifest_from_options(options) -> RunManifest:
    try:
        manifest = load_manifest(options['manifest'] or {})
    except (OSError, json.JSONDecodeError, ManifestException) as exc:
        raise CommandError(str(exc))
    overrides = {}
    if options.get('seed') is not None:
        if options['seed'] < 0:
            raise CommandError(f'Not valid seed={options["seed"]}')
        overrides['seed'] = options['seed']
    if options.get('max_folds') is not None:
        if options['max_folds'] < 1:
            raise CommandError(f'Not valid max-folds={options["max_folds"]}')
        overrides['max_folds'] = options['max_folds']
    return replace(manifest, **overrides)


def fold_indexes(manifest: RunManifest, fold=None):
    """
    :return: `fold` alone or every evaluated fold of the manifest
    """
    if fold is None:
        return list(range(manifest.evaluated_folds))
    if not 0 <= fold < manifest.folds:
        raise CommandError(f'Fold {fold} out of the {manifest.folds} folds of the manifest')
    return [fold]
