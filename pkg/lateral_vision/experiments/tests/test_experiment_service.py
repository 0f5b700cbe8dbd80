import json
import tempfile
from collections import Counter
from pathlib import Path

from django.test import SimpleTestCase

import numpy as np

from lateral_vision.classification.serializers import trace_to_dict
from lateral_vision.classification.types import CROPPED_PARTS, InputDomainError, PartKind
from lateral_vision.dataprep.boxes import resize_specimen
from lateral_vision.dataprep.synthetic import SYNTHETIC_PART_KINDS, SyntheticSpec, generate_synthetic, write_dataset
from lateral_vision.dataprep.types import Specimen
from lateral_vision.features.descriptors import SiftParams
from lateral_vision.predictors.forest import part_crop

from ..report import AccuracyReport
from ..serializers import load_manifest
from ..services import ExperimentService, FoldResult, load_specimens
from ..services.experiment_service import UnknownDatasetSource, UnlabeledDataset, shared_extraction_service
from ..training import (FoldModels, dataset_classes, dataset_parts, derive_seed, extraction_service_for, fold_directory,
                        train_fold)
from ..types import BASELINE, DATASET_DIRECTORY, LATERAL, DatasetConfig
from .manifests import ATTACKED_MANIFEST, TRIVIAL_MANIFEST

OUTPUT_FILES = ['attacks.json', 'folds.json', 'manifest.json', 'outcomes.json', 'report.csv', 'report.json',
                'report.txt', 'traces.jsonl']


class TestLoadSpecimens(SimpleTestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.directory.cleanup()

    def test_synthetic(self):
        specimens = load_specimens(DatasetConfig(n_images=6, synthetic=SyntheticSpec(n_classes=2)))
        self.assertEqual(len(specimens), 6)
        self.assertEqual(set(specimens[0].boxes), set(SYNTHETIC_PART_KINDS))
        self.assertIs(load_specimens(DatasetConfig(n_images=6, synthetic=SyntheticSpec(n_classes=2))), specimens)

        resized = load_specimens(DatasetConfig(n_images=6, synthetic=SyntheticSpec(n_classes=2), resize=16))
        self.assertEqual({specimen.pixels.shape for specimen in resized}, {(16, 16)})

    def test_directory(self):
        written = generate_synthetic(SyntheticSpec(n_classes=2), 5)
        # Boxes are derived from keypoints when the dataset has none
        write_dataset(self.directory.name, [Specimen(specimen.image_id, specimen.pixels, specimen.label, {},
                                                     specimen.keypoints) for specimen in written])
        specimens = load_specimens(DatasetConfig(DATASET_DIRECTORY, self.directory.name, limit=3))
        self.assertEqual([specimen.image_id for specimen in specimens],
                         [specimen.image_id for specimen in written[:3]])
        self.assertTrue(all(specimen.boxes for specimen in specimens))

    def test_not_valid(self):
        write_dataset(self.directory.name, [Specimen('unlabeled', np.zeros((8, 8)))])
        with self.assertRaises(UnlabeledDataset):
            load_specimens(DatasetConfig(DATASET_DIRECTORY, self.directory.name))
        with self.assertRaises(UnknownDatasetSource):
            load_specimens(DatasetConfig('imagenet'))


class TestTraining(SimpleTestCase):
    def setUp(self):
        self.specimens = generate_synthetic(SyntheticSpec(n_classes=1), 6)

    def test_derive_seed(self):
        self.assertEqual(derive_seed(0, 1, 2), derive_seed(0, 1, 2))
        self.assertNotEqual(derive_seed(0, 1, 2), derive_seed(0, 2, 1))
        self.assertEqual(fold_directory('models', 3), Path('models') / 'fold-03')

    def test_dataset_parts_and_classes(self):
        self.assertEqual(dataset_parts(self.specimens), [part for part in CROPPED_PARTS
                                                         if part in SYNTHETIC_PART_KINDS])
        self.assertEqual(dataset_parts([Specimen('bare', np.zeros((8, 8)), 0)]), [])
        # A single class still trains two class models
        self.assertEqual(dataset_classes(self.specimens), 2)
        self.assertEqual(dataset_classes([Specimen('a', np.zeros((8, 8)), 4), Specimen('b', np.zeros((8, 8)))]), 5)
        with self.assertRaises(InputDomainError):
            dataset_classes([Specimen('a', np.zeros((8, 8)))])

    def test_mixed_sizes(self):
        manifest = load_manifest(TRIVIAL_MANIFEST)
        mixed = self.specimens[:2] + [resize_specimen(self.specimens[2], 16)]
        with self.assertRaises(InputDomainError):
            train_fold(mixed, manifest, 0, 2, shared_extraction_service(manifest.features))


class TestExperimentService(SimpleTestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.service = ExperimentService(self.directory.name)
        self.manifest = load_manifest(TRIVIAL_MANIFEST)

    def tearDown(self):
        self.directory.cleanup()

    def test_fold_data(self):
        data = self.service.fold_data(self.manifest, 1)
        self.assertEqual((len(data.train), len(data.test)), (8, 4))
        self.assertEqual({specimen.image_id for specimen in data.train} &
                         {specimen.image_id for specimen in data.test}, set())
        self.assertEqual(data.n_classes, 2)
        self.assertEqual([specimen.image_id for specimen in data.test], list(data.plan.test_ids(1)))
        with self.assertRaises(InputDomainError):
            self.service.fold_data(self.manifest, 3)

    def test_fold_models_save_load(self):
        data = self.service.fold_data(self.manifest, 0)
        models = self.service.train_fold(self.manifest, 0, data)
        self.assertEqual(set(models.context_parts), set(dataset_parts(data.train)))
        self.assertEqual(set(models.attention_parts), set(models.context_parts))
        self.assertIn(PartKind.WHOLE_IMAGE.value, models.train_accuracy)

        directory = models.save(fold_directory(self.directory.name, 0))
        loaded = self.service.load_fold_models(self.manifest, directory)
        self.assertIsInstance(loaded, FoldModels)
        self.assertEqual(loaded.train_accuracy, models.train_accuracy)
        self.assertEqual(loaded.holistic.net.checksum, models.holistic.net.checksum)
        for specimen in data.test:
            self.assertEqual(trace_to_dict(loaded.engine().decide(specimen)),
                             trace_to_dict(models.engine().decide(specimen)))

    def test_trivial_run(self):
        result = self.service.run_experiment(self.manifest)
        self.assertEqual(result.report.folds, (0, 1, 2))
        self.assertEqual(result.report.mean('OrigImgs', BASELINE), 100.)
        self.assertEqual(result.report.mean('OrigImgs', LATERAL), 100.)
        self.assertEqual(len(result.outcomes), 12)
        self.assertEqual(len(result.traces), 12)
        # Perceptions always agree, the attention phase never runs
        self.assertTrue(all(outcome['signal'] == 'inhibit' for outcome in result.outcomes))
        self.assertTrue(all(outcome['feature_extractions'] == 0 for outcome in result.outcomes))
        self.assertFalse(result.passed)
        self.assertIn('robustness_margin', [check.name for check in result.acceptance if not check.passed])

        fold_result = result.fold_results[0]
        self.assertEqual(FoldResult.from_dict(fold_result.to_dict()), fold_result)
        self.assertEqual(fold_result.accuracy('OrigImgs', LATERAL), 100.)
        self.assertEqual(fold_result.attacks, {})

    def test_write_outputs(self):
        first = self.service.write_outputs(self.service.run_experiment(self.manifest),
                                           Path(self.directory.name) / 'first')
        self.assertEqual(sorted(path.name for path in first.iterdir()), OUTPUT_FILES)
        with open(first / 'report.json') as report_file:
            stored = json.load(report_file)
        with open(first / 'outcomes.json') as outcomes_file:
            outcomes = json.load(outcomes_file)
        self.assertEqual(AccuracyReport.from_dict(stored), AccuracyReport.from_outcomes(outcomes))
        self.assertEqual(set(stored['training']), {'0', '1', '2'})
        self.assertEqual(load_manifest(first / 'manifest.json'), self.manifest)
        self.assertEqual(len((first / 'traces.jsonl').read_text().splitlines()), 12)

        # Equal manifests write equal files
        second = self.service.write_outputs(self.service.run_experiment(self.manifest),
                                            Path(self.directory.name) / 'second')
        for name in OUTPUT_FILES:
            self.assertEqual((first / name).read_bytes(), (second / name).read_bytes(), name)

        default = self.service.write_outputs(self.service.run_experiment(self.manifest))
        self.assertEqual(default, Path(self.directory.name) / 'trivial')

    def test_attacked_run(self):
        manifest = load_manifest(ATTACKED_MANIFEST)
        result = ExperimentService(self.directory.name, jobs=2).run_experiment(manifest)
        self.assertEqual(len(result.fold_results), 1)
        self.assertEqual(result.report.conditions, ('OrigImgs', 'FGSM-M', 'Itr-M'))
        self.assertEqual(len(result.outcomes), 8 * 3)

        attacks = result.fold_results[0].attacks
        self.assertEqual(set(attacks), {'FGSM-M', 'Itr-M'})
        self.assertEqual(attacks['FGSM-M']['budget'], 50.)
        self.assertEqual(attacks['Itr-M']['budget'], 10.)
        for summary in attacks.values():
            self.assertNotIn('images', summary)
            self.assertEqual(summary['n_images'], 8)
            self.assertLessEqual(summary['max_linf'], summary['budget'] + 1e-9)
        self.assertEqual({trace['condition'] for trace in result.traces}, {'OrigImgs', 'FGSM-M', 'Itr-M'})
        self.assertEqual(Counter(outcome['condition'] for outcome in result.outcomes),
                         {'OrigImgs': 8, 'FGSM-M': 8, 'Itr-M': 8})

    def test_attack_params(self):
        manifest = load_manifest(dict(ATTACKED_MANIFEST, epsilon_scale='unit', attacks=[
            {'name': 'Itr-M', 'kind': 'iterative', 'epsilon': .05, 'alpha': .004, 'iterations': 10}]))
        self.assertAlmostEqual(self.service.attack_params(manifest, 'FGSM-M').epsilon, 50. / 255.)
        self.assertEqual(self.service.attack_params(manifest, 'Itr-M').alpha, .004)

        data = self.service.fold_data(manifest, 0)
        models = self.service.train_fold(manifest, 0, data)
        replaced = self.service.attack_fold(manifest, 0, models, 'Itr-M', data).manifest
        self.assertEqual(replaced['epsilon_scale'], 'unit')
        self.assertEqual(replaced['params']['epsilon'], .05)
        self.assertAlmostEqual(replaced['budget'], 10.2)
        # Presets keep their 0-255 budget on the unit scale
        self.assertAlmostEqual(self.service.attack_fold(manifest, 0, models, 'FGSM-M', data).manifest['budget'], 50.)

    def test_feature_dumps(self):
        features_dir = Path(self.directory.name) / 'features'
        service = ExperimentService(self.directory.name, features_dir=features_dir)
        data = service.fold_data(self.manifest, 0)
        models = service.train_fold(self.manifest, 0, data)
        parts = list(models.attention_parts)
        for part in parts:
            with open(fold_directory(features_dir, 0) / part.value / 'sift-16.csv.json') as json_file:
                metadata = json.load(json_file)
            self.assertEqual(metadata['image_ids'], [specimen.image_id for specimen in data.train
                                                     if part in specimen.boxes])

        # Another process fills its cache from the dumps instead of extracting again
        extraction = extraction_service_for(self.manifest.features)
        loaded = extraction.load_dumps(features_dir)
        self.assertEqual(loaded, 2 * sum(part in specimen.boxes for part in parts for specimen in data.train))
        specimen, part = data.train[0], parts[0]
        crop = part_crop(specimen, specimen.boxes[part])
        self.assertIn((crop.checksum, SiftParams(16), part), extraction.cache)
        self.assertEqual(extraction.extract_variant(crop, SiftParams(16), part),
                         extraction_service_for(self.manifest.features, cache_size=0).extract_variant(
                             crop, SiftParams(16), part))

        with self.assertLogs('lateral_vision.features.services.feature_extraction_service', 'INFO') as logs:
            service.train_fold(self.manifest, 1)
        self.assertTrue(any('Loaded' in line for line in logs.output))
        self.assertTrue((fold_directory(features_dir, 1) / parts[0].value / 'hog-16-8.csv').exists())
