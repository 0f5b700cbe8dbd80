from django.test import SimpleTestCase

import numpy as np

from lateral_vision.classification.types import InputDomainError, PartKind
from lateral_vision.features.images import GrayImage

from ..boxes import bird_extent, boxes_from_keypoints, crop, crop_pixels, pixel_bounds, resize_specimen
from ..types import KEYPOINT_NAMES, BoxSource, Keypoint, KeypointAnnotation, PartBox, Specimen


def annotation(image_id='bird-1', **points):
    """
    :param points: keypoint name with underscores -> `(x, y)`, or `(x, y, visible)`
    """
    keypoints = []
    for name, point in points.items():
        x, y, visible = point if len(point) == 3 else point + (True,)
        keypoints.append(Keypoint(name.replace('_', ' '), float(x), float(y), visible))
    return KeypointAnnotation(image_id, tuple(keypoints))


def coordinates(box: PartBox):
    return box.x0, box.y0, box.x1, box.y1


class TestKeypointBoxes(SimpleTestCase):
    def setUp(self):
        self.annotation = annotation(back=(40, 40), tail=(70, 30), beak=(10, 30), crown=(20, 22),
                                     left_eye=(20, 28), right_eye=(22, 28), left_wing=(50, 50, False),
                                     right_wing=(55, 45), left_leg=(45, 60))

    def test_bird_extent(self):
        self.assertEqual(bird_extent(self.annotation), 60.)
        self.assertEqual(bird_extent(annotation(back=(0, 0), tail=(3, 4))), 5.)
        self.assertIsNone(bird_extent(annotation(back=(0, 0), tail=(3, 4, False))))

    def test_boxes_from_keypoints(self):
        boxes = boxes_from_keypoints(self.annotation, 100, 100)
        self.assertEqual(set(boxes), {PartKind.BACK, PartKind.TAIL, PartKind.BEAK, PartKind.CROWN, PartKind.EYE,
                                      PartKind.WING, PartKind.FACE})
        self.assertEqual(coordinates(boxes[PartKind.BACK]), (32.5, 32.5, 47.5, 47.5))
        # Left eye wins, invisible left wing leaves the right one
        self.assertEqual(coordinates(boxes[PartKind.EYE]), (12.5, 20.5, 27.5, 35.5))
        self.assertEqual(boxes[PartKind.WING].center, (55., 45.))
        # Face spans eyes, beak and crown, never smaller than a part box
        self.assertEqual(coordinates(boxes[PartKind.FACE]), (8.5, 18.5, 23.5, 33.5))
        self.assertTrue(all(box.source is BoxSource.GROUND_TRUTH for box in boxes.values()))

        ratios = {PartKind.TAIL: .5}
        self.assertEqual(boxes_from_keypoints(self.annotation, 100, 100, ratios=ratios)[PartKind.TAIL].width, 30.)

    def test_clipping(self):
        edge = annotation(tail=(99, 50), back=(59, 50))
        self.assertEqual(coordinates(boxes_from_keypoints(edge, 100, 100)[PartKind.TAIL]), (94., 45., 100., 55.))
        self.assertEqual(boxes_from_keypoints(edge, 100, 100, clip=False)[PartKind.TAIL].x1, 104.)

        with self.assertRaises(InputDomainError):
            boxes_from_keypoints(edge, 90, 100)
        with self.assertLogs('lateral_vision.dataprep.boxes', level='WARNING'):
            self.assertEqual(boxes_from_keypoints(annotation(tail=(10, 10)), 100, 100), {})

    def test_not_valid_annotations(self):
        with self.assertRaises(InputDomainError):
            annotation(left_foot=(1, 1))
        with self.assertRaises(InputDomainError):
            KeypointAnnotation('bird-1', (Keypoint('tail', 1., 1., True), Keypoint('tail', 2., 2., True)))
        with self.assertRaises(InputDomainError):
            PartBox(PartKind.TAIL, 5., 5., 5., 9.)

    def test_translation_equivariance(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            points = {name.replace(' ', '_'): (float(rng.uniform(100., 200.)), float(rng.uniform(100., 200.)),
                                               bool(rng.random() < .7))
                      for name in KEYPOINT_NAMES}
            dx, dy = rng.uniform(-100., 100., size=2)
            shifted = {name: (x + dx, y + dy, visible) for name, (x, y, visible) in points.items()}
            boxes = boxes_from_keypoints(annotation(**points), 300, 300, clip=False)
            moved = boxes_from_keypoints(annotation(**shifted), 300, 300, clip=False)
            self.assertEqual(set(moved), set(boxes))
            for part, box in boxes.items():
                np.testing.assert_allclose(coordinates(moved[part]),
                                           (box.x0 + dx, box.y0 + dy, box.x1 + dx, box.y1 + dy), atol=1e-9)


class TestCrops(SimpleTestCase):
    def setUp(self):
        self.pixels = np.arange(60.).reshape(6, 10)

    def test_crop_pixels(self):
        box = PartBox(PartKind.TAIL, 1.5, 2.2, 4.2, 4.)
        self.assertEqual(pixel_bounds(box, 10, 6), (1, 2, 5, 4))
        np.testing.assert_array_equal(crop_pixels(self.pixels, box), self.pixels[2:4, 1:5])

        outside = PartBox(PartKind.TAIL, 8., -3., 14., 3.)
        self.assertEqual(crop_pixels(self.pixels, outside).shape, (3, 2))
        self.assertIsNone(crop_pixels(self.pixels, PartBox(PartKind.TAIL, 9.2, 0., 12., 6.)))
        self.assertIsNone(crop(GrayImage(self.pixels / 60.), PartBox(PartKind.TAIL, 2., 2., 3., 3.)))
        self.assertEqual(crop(GrayImage(self.pixels / 60.), box).pixels.shape, (2, 4))

    def test_resize_specimen(self):
        specimen = Specimen('bird-1', np.full((20, 40), 100.), 3,
                            {PartKind.TAIL: PartBox(PartKind.TAIL, 10., 5., 30., 15., BoxSource.PREDICTED)},
                            annotation(tail=(20, 10), back=(4, 4)))
        resized = resize_specimen(specimen, 10)
        self.assertEqual(resized.pixels.shape, (10, 10))
        np.testing.assert_allclose(resized.pixels, 100.)
        self.assertEqual(resized.label, 3)
        self.assertEqual(coordinates(resized.boxes[PartKind.TAIL]), (2.5, 2.5, 7.5, 7.5))
        self.assertIs(resized.boxes[PartKind.TAIL].source, BoxSource.PREDICTED)
        self.assertEqual(resized.keypoints.get('tail'), Keypoint('tail', 5., 5., True))
