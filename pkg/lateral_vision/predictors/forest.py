from logging import getLogger
from typing import List, Optional, Sequence

import numpy as np

from lateral_vision.classification.types import PartKind, ProbabilityVector
from lateral_vision.dataprep.boxes import crop
from lateral_vision.dataprep.types import PartBox, Specimen
from lateral_vision.features.images import GrayImage
from lateral_vision.features.services import (ExtractionCounter,
                                              FeatureExtractionService)
from lateral_vision.forest.forest import (FeatureDimensionMismatch, ForestParams, RandomForest,
                                          average_probabilities)

from .base import Predictor
from .neural import PIXEL_SCALE

logger = getLogger(__name__)


def part_crop(specimen: Specimen, box: Optional[PartBox]) -> Optional[GrayImage]:
    if box is None:
        return None
    return crop(GrayImage(specimen.pixels / PIXEL_SCALE), box)


class ForestPredictor(Predictor):
    """
    Part crop -> SIFT and HOG variants -> random forest. With `per_variant` fusion every variant has
    its own forest and their probabilities are averaged
    """
    def __init__(self, forests: Sequence[RandomForest], extraction_service: FeatureExtractionService,
                 part: PartKind):
        expected = extraction_service.vectors_per_crop
        if len(forests) != expected:
            raise FeatureDimensionMismatch(f'Fusion={extraction_service.fusion} needs {expected} forests, '
                                           f'got {len(forests)}')
        self.forests = list(forests)
        self.extraction_service = extraction_service
        self.part = part
        self.n_classes = forests[0].n_classes

    @classmethod
    def features(cls, extraction_service: FeatureExtractionService, specimen: Specimen, part: PartKind,
                 box: Optional[PartBox] = None,
                 counter: Optional[ExtractionCounter] = None) -> Optional[List[np.ndarray]]:
        """
        :return: One vector per forest, `None` if the part is missing
        """
        part_image = part_crop(specimen, box if box is not None else specimen.boxes.get(part))
        if part_image is None:
            return None
        fused = extraction_service.extract_fused(part_image, part=part, counter=counter)
        return [feature.values for feature in fused]

    @classmethod
    def fit(cls, extraction_service: FeatureExtractionService, specimens: Sequence[Specimen], part: PartKind,
            params: ForestParams, n_classes: int) -> 'ForestPredictor':
        """
        Train the forests of one part on the specimens where the part can be cropped
        """
        rows: List[List[np.ndarray]] = []
        labels: List[int] = []
        for specimen in specimens:
            vectors = cls.features(extraction_service, specimen, part)
            if vectors is None:
                logger.warning('Image=%s has no usable %s for training', specimen.image_id, part.value)
                continue
            rows.append(vectors)
            labels.append(specimen.label)
        if not rows:
            raise FeatureDimensionMismatch(f'No training image has a usable {part.value}')
        forests = [RandomForest.fit(np.array([vectors[i] for vectors in rows]), labels, params, n_classes=n_classes)
                   for i in range(len(rows[0]))]
        logger.info('Trained %d forest/s for part=%s on %d images', len(forests), part.value, len(rows))
        return cls(forests, extraction_service, part)

    def predict_proba(self, specimen: Specimen, part: PartKind, box: Optional[PartBox] = None,
                      counter: Optional[ExtractionCounter] = None) -> Optional[ProbabilityVector]:
        vectors = self.features(self.extraction_service, specimen, part, box=box, counter=counter)
        if vectors is None:
            return None
        if len(self.forests) == 1:
            return self.forests[0].predict_proba(vectors[0])
        return average_probabilities(self.forests, vectors)

    def to_dicts(self) -> List[dict]:
        return [forest.to_dict() for forest in self.forests]

