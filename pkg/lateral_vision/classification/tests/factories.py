from typing import Dict, Iterable, Optional, Tuple

import factory.fuzzy
import numpy as np

from lateral_vision.dataprep.types import BoxSource, PartBox, Specimen
from lateral_vision.predictors.table import TablePredictor

from ..types import CONSTITUENT_PARTS, CROPPED_PARTS, ClassLabel, PartKind, PartPrediction, ProbabilityVector

N_CLASSES = 4
IMAGE_SIDE = 8


class ClassLabelFactory(factory.Factory):
    class Meta:
        model = ClassLabel

    index = factory.fuzzy.FuzzyInteger(0, N_CLASSES - 1)
    n_classes = N_CLASSES


class PartPredictionFactory(factory.Factory):
    class Meta:
        model = PartPrediction

    part = factory.fuzzy.FuzzyChoice(CONSTITUENT_PARTS)
    label = factory.SubFactory(ClassLabelFactory)
    probability = factory.fuzzy.FuzzyFloat(0.01, 1.)


def peaked(index: int, peak: float, n_classes: int = N_CLASSES) -> ProbabilityVector:
    """
    Distribution with `peak` on `index` and the rest spread evenly
    """
    values = np.full(n_classes, (1. - peak) / (n_classes - 1))
    values[index] = peak
    return ProbabilityVector.from_softmax(values)


def full_frame_boxes(parts: Iterable[PartKind] = CROPPED_PARTS, side: int = IMAGE_SIDE) -> Dict[PartKind, PartBox]:
    return {part: PartBox(part, 0., 0., float(side), float(side), BoxSource.SYNTHETIC) for part in parts}


def make_specimen(image_id: str, parts: Iterable[PartKind] = CROPPED_PARTS, label: Optional[int] = None) -> Specimen:
    return Specimen(image_id, np.zeros((IMAGE_SIDE, IMAGE_SIDE)), label, full_frame_boxes(parts))


def make_table(rows: Dict[Tuple[str, PartKind], Tuple[int, float]], n_classes: int = N_CLASSES) -> TablePredictor:
    """
    :param rows: `(image_id, part) -> (class index, top probability)`
    """
    return TablePredictor({key: peaked(index, peak, n_classes) for key, (index, peak) in rows.items()}, n_classes)


class CountingTablePredictor(TablePredictor):
    """
    Table predictor that records its calls and counts one extraction per call, as feature
    based predictors do
    """
    def __init__(self, entries, n_classes: int):
        super().__init__(entries, n_classes)
        self.calls = []

    def predict_proba(self, specimen, part, box=None, counter=None):
        self.calls.append((specimen.image_id, part))
        if counter is not None:
            counter.increment()
        return super().predict_proba(specimen, part, box=box, counter=counter)


class FailingPredictor(TablePredictor):
    """
    Table predictor raising for the given parts
    """
    def __init__(self, entries, n_classes: int, failing_parts: Iterable[PartKind]):
        super().__init__(entries, n_classes)
        self.failing_parts = set(failing_parts)

    def predict_proba(self, specimen, part, box=None, counter=None):
        if part in self.failing_parts:
            raise RuntimeError(f'Model for part={part.value} crashed')
        return super().predict_proba(specimen, part, box=box, counter=counter)
