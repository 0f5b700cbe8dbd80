import csv
from logging import getLogger
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from lateral_vision.classification.types import (SOFTMAX_TOLERANCE, InputDomainError, PartKind, PartPrediction,
                                                 ProbabilityVector)
from lateral_vision.dataprep.types import PartBox, Specimen
from lateral_vision.features.services import ExtractionCounter

from .base import Predictor, PredictorException

logger = getLogger(__name__)

UNRECOGNIZED = 'UNRECOGNIZED'

TableKey = Tuple[str, PartKind]


class InvalidProbabilityTable(PredictorException, InputDomainError):
    pass


class TablePredictor(Predictor):
    """
    Probabilities produced elsewhere (for example by deep models) stored per image and part
    """
    def __init__(self, entries: Dict[TableKey, Optional[ProbabilityVector]], n_classes: int):
        for (image_id, part), probabilities in entries.items():
            if probabilities is not None and probabilities.n_classes != n_classes:
                raise InvalidProbabilityTable(f'Entry image={image_id} part={part.value} has '
                                              f'{probabilities.n_classes} classes, expected {n_classes}')
        self.entries = dict(entries)
        self.n_classes = n_classes

    def __len__(self):
        return len(self.entries)

    def lookup(self, image_id: str, part: PartKind) -> PartPrediction:
        """
        :return: Stored top-1 prediction, unrecognized for explicit `UNRECOGNIZED` rows and unknown ids
        """
        probabilities = self.get_probabilities(image_id, part)
        if probabilities is None:
            return PartPrediction.unrecognized(part, self.n_classes)
        return PartPrediction.from_probabilities(part, probabilities)

    def get_probabilities(self, image_id: str, part: PartKind) -> Optional[ProbabilityVector]:
        key = (image_id, part)
        if key not in self.entries:
            logger.warning('No probabilities for image=%s part=%s, using unrecognized', image_id, part.value)
            return None
        return self.entries[key]

    def predict_proba(self, specimen: Specimen, part: PartKind, box: Optional[PartBox] = None,
                      counter: Optional[ExtractionCounter] = None) -> Optional[ProbabilityVector]:
        return self.get_probabilities(specimen.image_id, part)

    def image_ids(self):
        return sorted({image_id for image_id, _ in self.entries})

    @classmethod
    def load(cls, path: Union[str, Path], n_classes: Optional[int] = None) -> 'TablePredictor':
        """
        Read a CSV with header `image_id,part,p_0,...,p_{n-1}`. Rows can be `image_id,part,UNRECOGNIZED`
        :param path:
        :param n_classes: checked against the header if provided
        """
        entries: Dict[TableKey, Optional[ProbabilityVector]] = {}
        with open(path, newline='') as csv_file:
            reader = csv.reader(csv_file)
            try:
                header = next(reader)
            except StopIteration:
                raise InvalidProbabilityTable(f'Empty probability table {path}')
            if header[:2] != ['image_id', 'part'] or header[2:] != [f'p_{i}' for i in range(len(header) - 2)]:
                raise InvalidProbabilityTable(f'Not valid header on {path}: {header}')
            header_classes = len(header) - 2
            if n_classes is not None and header_classes != n_classes:
                raise InvalidProbabilityTable(f'Table {path} has {header_classes} classes, expected {n_classes}')

            for line_number, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    key = (row[0], PartKind(row[1]))
                except (IndexError, ValueError) as exc:
                    raise InvalidProbabilityTable(f'{path}:{line_number} not valid row {row}') from exc
                if key in entries:
                    raise InvalidProbabilityTable(f'{path}:{line_number} duplicated entry {key}')
                if row[2:] == [UNRECOGNIZED]:
                    entries[key] = None
                    continue
                try:
                    values = np.array(row[2:], dtype=np.float64)
                except ValueError as exc:
                    raise InvalidProbabilityTable(f'{path}:{line_number} not numeric probabilities') from exc
                if values.size != header_classes:
                    raise InvalidProbabilityTable(f'{path}:{line_number} has {values.size} probabilities, '
                                                  f'expected {header_classes}')
                if abs(values.sum() - 1.) > SOFTMAX_TOLERANCE:
                    raise InvalidProbabilityTable(f'{path}:{line_number} probabilities sum {values.sum()}')
                try:
                    entries[key] = ProbabilityVector.from_softmax(values)
                except InputDomainError as exc:
                    raise InvalidProbabilityTable(f'{path}:{line_number} {exc}') from exc
        logger.info('Loaded %d probability entries from %s', len(entries), path)
        return cls(entries, header_classes)

    def save(self, path: Union[str, Path]):
        with open(path, 'w', newline='') as csv_file:
            writer = csv.writer(csv_file)
            writer.writerow(['image_id', 'part'] + [f'p_{i}' for i in range(self.n_classes)])
            for (image_id, part), probabilities in self.entries.items():
                if probabilities is None:
                    writer.writerow([image_id, part.value, UNRECOGNIZED])
                else:
                    writer.writerow([image_id, part.value] + [repr(float(value)) for value in probabilities.values])
