from abc import ABC, abstractmethod
from typing import Optional

import numpy as np

from lateral_vision.classification.types import (PartKind, PartPrediction,
                                                 ProbabilityVector)
from lateral_vision.dataprep.types import PartBox, Specimen
from lateral_vision.features.services import ExtractionCounter


class PredictorException(Exception):
    pass


class UnsupportedModel(PredictorException):
    pass


class Predictor(ABC):
    """
    Probability source for one part (or the whole image) of a specimen
    """
    n_classes: int
    differentiable: bool = False

    @abstractmethod
    def predict_proba(self, specimen: Specimen, part: PartKind, box: Optional[PartBox] = None,
                      counter: Optional[ExtractionCounter] = None) -> Optional[ProbabilityVector]:
        """
        :param specimen:
        :param part:
        :param box: box of the part, `None` for the whole image
        :param counter: incremented on every feature extraction
        :return: Probabilities, `None` if the part cannot be recognized
        """
        pass

    def predict(self, specimen: Specimen, part: PartKind, box: Optional[PartBox] = None,
                counter: Optional[ExtractionCounter] = None) -> PartPrediction:
        """
        :return: `(C, P)` for the part, probability 0 if it was not recognized
        """
        probabilities = self.predict_proba(specimen, part, box=box, counter=counter)
        if probabilities is None:
            return PartPrediction.unrecognized(part, self.n_classes)
        return PartPrediction.from_probabilities(part, probabilities)


class DifferentiablePredictor(Predictor):
    """
    Predictor with a loss differentiable with respect to the pixels of the image (0-255 scale)
    """
    differentiable = True

    @abstractmethod
    def loss(self, pixels: np.ndarray, label: int) -> float:
        pass

    @abstractmethod
    def input_gradient(self, pixels: np.ndarray, label: int) -> np.ndarray:
        """
        :return: Gradient of the loss with respect to every pixel, same shape as `pixels`
        """
        pass

    @property
    def checksum(self) -> str:
        raise NotImplementedError
