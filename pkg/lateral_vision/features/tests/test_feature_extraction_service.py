import json
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

import numpy as np

from lateral_vision.classification.types import PartKind

from ..descriptors import SiftParams, sift_descriptor
from ..images import GrayImage, resize_square
from ..services import ExtractionCounter, FeatureExtractionService
from ..services.feature_extraction_service import (FUSION_PER_VARIANT, FeatureDumpException, UnknownFusionMode,
                                                   read_feature_dump, write_feature_dump)


class TestFeatureExtractionService(SimpleTestCase):
    def setUp(self):
        self.crop = GrayImage(np.random.default_rng(7).random((20, 30)))

    def test_extract(self):
        service = FeatureExtractionService()
        self.assertEqual(service.variant_names, ['sift-64', 'sift-128', 'sift-256', 'hog-64-32', 'hog-126-64',
                                                 'hog-256-128'])
        counter = ExtractionCounter()
        features = service.extract(self.crop, part=PartKind.TAIL, counter=counter)
        self.assertEqual(counter.value, 6)
        # 4x4, 2x2 and 1x1 SIFT patch grids on the 256 pixel resize
        self.assertEqual([len(feature) for feature in features], [512, 128, 32, 36, 9, 36])
        self.assertTrue(all(feature.provenance.part is PartKind.TAIL for feature in features))

        fused = service.extract_fused(self.crop, part=PartKind.TAIL, counter=counter)
        self.assertEqual(counter.value, 12)
        self.assertEqual(len(fused), 1)
        self.assertEqual(len(fused[0]), service.vector_length)
        self.assertEqual(service.vector_length, 753)
        np.testing.assert_array_equal(fused[0].values, np.concatenate([feature.values for feature in features]))

    def test_cache(self):
        service = FeatureExtractionService(cache_size=10)
        first = service.extract(self.crop)
        second = service.extract(GrayImage(self.crop.pixels.copy()))
        self.assertTrue(all(a is b for a, b in zip(first, second)))
        service.clear_cache()
        self.assertEqual(len(service.cache), 0)
        self.assertEqual(service.extract(self.crop), first)

        uncached = FeatureExtractionService(cache_size=0)
        self.assertIsNone(uncached.cache)
        self.assertEqual(uncached.extract(self.crop), first)

    def test_per_variant(self):
        service = FeatureExtractionService(fusion=FUSION_PER_VARIANT)
        self.assertEqual(service.vectors_per_crop, 6)
        self.assertEqual(len(service.extract_fused(self.crop)), 6)
        with self.assertRaises(UnknownFusionMode):
            FeatureExtractionService(fusion='average')

    def test_feature_dump(self):
        service = FeatureExtractionService()
        rows = [(f'image-{i}', service.extract(GrayImage(np.full((8, 8), i / 10.) + np.eye(8) / 10.),
                                               part=PartKind.WING)[3])
                for i in range(3)]
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / 'hog.csv'
            sidecar = write_feature_dump(path, rows)
            self.assertTrue(sidecar.exists())
            self.assertEqual(read_feature_dump(path), rows)

            with self.assertRaises(FeatureDumpException):
                write_feature_dump(path, rows + [('image-9', service.extract(self.crop)[0])])
            with self.assertRaises(FeatureDumpException):
                read_feature_dump(Path(directory) / 'missing.csv')
            with self.assertRaises(FeatureDumpException):
                write_feature_dump(path, rows, checksums=['only-one'])

    def test_dump_features(self):
        service = FeatureExtractionService(cache_size=100)
        crops = [(f'image-{i}', PartKind.WING, GrayImage(np.full((8, 8), i / 10.) + np.eye(8) / 10.))
                 for i in range(3)]
        crops.append(('image-0', PartKind.TAIL, self.crop))
        with tempfile.TemporaryDirectory() as directory:
            sidecars = service.dump_features(directory, crops)
            self.assertEqual(len(sidecars), 2 * 6)
            self.assertTrue((Path(directory) / 'wing' / 'sift-64.csv').exists())
            with open(Path(directory) / 'wing' / 'sift-64.csv.json') as json_file:
                metadata = json.load(json_file)
            self.assertEqual(metadata['checksums'], [crop.checksum for _, _, crop in crops[:3]])
            self.assertEqual(metadata['params']['resize'], 256)

            fresh = FeatureExtractionService(cache_size=100)
            self.assertEqual(fresh.load_dumps(directory), 4 * 6)
            self.assertEqual(len(fresh.cache), 4 * 6)
            for _, part, crop in crops:
                self.assertEqual(fresh.extract(crop, part=part), service.extract(crop, part=part))
            self.assertEqual(len(fresh.cache), 4 * 6)

            # SIFT vectors depend on the resize, only the HOG dumps apply
            self.assertEqual(FeatureExtractionService(sift_resize=64).load_dumps(directory), 4 * 3)
            self.assertEqual(FeatureExtractionService(cache_size=0).load_dumps(directory), 0)

    def test_sift_grid(self):
        service = FeatureExtractionService(sift_resize=128)
        features = service.extract(self.crop)
        self.assertEqual([len(feature) for feature in features[:3]], [4 * 32, 32, 32])
        self.assertEqual(service.vector_length, 4 * 32 + 32 + 32 + 36 + 9 + 36)
        self.assertEqual(features[0], sift_descriptor(resize_square(self.crop, 128), SiftParams(64)))
