from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

import numpy as np

from lateral_vision.classification.narration import narrate
from lateral_vision.classification.serializers import FULL_PRECISION, trace_to_json
from lateral_vision.classification.services import LateralEngine, PredictorBank, PredictorBoxSource
from lateral_vision.classification.types import CROPPED_PARTS, InputDomainError, LateralVisionException
from lateral_vision.dataprep.types import BoxSource, PartBox, Specimen
from lateral_vision.predictors.table import TablePredictor

# Table predictors ignore pixels and boxes, images only need an id
TABLE_IMAGE_SIDE = 2


def full_frame_boxes(specimen: Specimen):
    return {part: PartBox(part, 0., 0., specimen.width, specimen.height, BoxSource.PREDICTED)
            for part in CROPPED_PARTS}


class Command(BaseCommand):
    help = 'Decides one image and prints its decision trace. Perceptions come from probability tables ' \
           '(`--context-table`) or from the models of a trained fold (`--models`)'

    def add_arguments(self, parser):
        parser.add_argument('image_id')
        parser.add_argument('--context-table', help='CSV with whole image and part probabilities of the context '
                                                    'phase')
        parser.add_argument('--attention-table', help='CSV with part probabilities of the attention phase')
        parser.add_argument('--n-classes', type=int, help='Checked against the tables')
        parser.add_argument('--models', help='Fold directory written by `train`')
        parser.add_argument('--manifest', help='Run manifest of the models, its dataset holds the image')
        parser.add_argument('--sequential', action='store_true', default=False,
                            help='Run attention after context instead of alongside it')
        parser.add_argument('--decimals', type=int, help=f'Decimals of the trace scores, '
                                                         f'{settings.LATERAL_TRACE_DECIMALS} by default')
        parser.add_argument('--full-precision', action='store_true', default=False)
        parser.add_argument('--narrate', action='store_true', default=False,
                            help='Print the interpretation of the decision')
        parser.add_argument('--out', help='Write the trace JSON to this file')

    def table_engine(self, options, parallel: bool):
        context_table = TablePredictor.load(options['context_table'], options['n_classes'])
        context_bank = PredictorBank({part: context_table for part in CROPPED_PARTS}, context_table)
        attention_bank = None
        if options['attention_table']:
            attention_table = TablePredictor.load(options['attention_table'], context_table.n_classes)
            attention_bank = PredictorBank({part: attention_table for part in CROPPED_PARTS})
        engine = LateralEngine(context_bank, attention_bank, box_source=PredictorBoxSource(full_frame_boxes),
                               parallel=parallel)
        return engine, Specimen(options['image_id'], np.zeros((TABLE_IMAGE_SIDE, TABLE_IMAGE_SIDE)))

    def model_engine(self, options, parallel: bool):
        from lateral_vision.experiments.serializers import load_manifest
        from lateral_vision.experiments.services import ExperimentService, load_specimens

        manifest = load_manifest(options['manifest'] or {})
        models = ExperimentService(settings.EXPERIMENT_OUTPUT_DIR).load_fold_models(manifest, options['models'])
        specimens = {specimen.image_id: specimen for specimen in load_specimens(manifest.dataset)}
        if options['image_id'] not in specimens:
            raise CommandError(f'Image={options["image_id"]} is not on the dataset of the manifest')
        return models.engine(parallel=parallel, include_face=manifest.include_face), specimens[options['image_id']]

    def handle(self, *args, **options):
        if bool(options['context_table']) == bool(options['models']):
            raise CommandError('Use one of --context-table or --models')
        parallel = not options['sequential']
        try:
            engine, specimen = (self.table_engine(options, parallel) if options['context_table']
                                else self.model_engine(options, parallel))
            trace = engine.decide(specimen)
        except (LateralVisionException, InputDomainError, OSError) as exc:
            raise CommandError(str(exc))

        decimals = FULL_PRECISION if options['full_precision'] else (
            -1 if options['decimals'] is None else options['decimals'])
        trace_json = trace_to_json(trace, decimals=decimals)
        if options['out']:
            Path(options['out']).write_text(trace_json + '\n')
        self.stdout.write(trace_json)
        if options['narrate']:
            self.stdout.write(narrate(trace))
        self.stdout.write(self.style.SUCCESS(f'Image={trace.image_id} decided {trace.final_label.species} by '
                                             f'{trace.rule.value}'))
